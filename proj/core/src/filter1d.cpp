#include "desnow/filter1d.hpp"

#include <string>

#include "desnow/error.hpp"

namespace desnow::wavelet {

std::size_t extend_index(std::ptrdiff_t i, std::size_t n, Extension ext) {
  const auto len = static_cast<std::ptrdiff_t>(n);
  if (ext == Extension::kPeriodic) {
    auto r = i % len;
    return static_cast<std::size_t>(r < 0 ? r + len : r);
  }
  if (len == 1) return 0;
  const auto period = 2 * len - 2;
  auto r = i % period;
  if (r < 0) r += period;
  return static_cast<std::size_t>(r < len ? r : period - r);
}

namespace {

struct Lines {
  std::size_t outer = 1, extent = 1, inner = 1;
};

Lines lines_of(const Shape& shape, std::size_t axis) {
  if (axis >= shape.size()) throw ShapeError("filter axis " + std::to_string(axis) + " invalid for " + to_string(shape));
  Lines l;
  for (std::size_t i = 0; i < axis; ++i) l.outer *= shape[i];
  l.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) l.inner *= shape[i];
  return l;
}

// Sparse map: out[k] = sum over (src, w) in row k of in[src] * w.
struct Stencil {
  std::size_t out_len = 0, in_len = 0, width = 0;
  std::vector<std::size_t> src;
  std::vector<double> weight;
};

Stencil decimate_stencil(std::size_t n, const AxisFilter& f) {
  if (n % 2 != 0) throw ShapeError("decimate: extent " + std::to_string(n) + " is odd");
  Stencil s{n / 2, n, f.taps.size(), {}, {}};
  s.src.reserve(s.out_len * s.width);
  s.weight.reserve(s.out_len * s.width);
  for (std::size_t k = 0; k < s.out_len; ++k) {
    for (std::size_t j = 0; j < s.width; ++j) {
      const auto i = static_cast<std::ptrdiff_t>(2 * k) + f.phase + f.center - static_cast<std::ptrdiff_t>(j);
      s.src.push_back(extend_index(i, n, f.ext));
      s.weight.push_back(f.taps[j]);
    }
  }
  return s;
}

// Interpolation folded into one stencil from the short signal y to x: the
// zero samples of the upsampled signal drop out.
Stencil interpolate_stencil(std::size_t m, const AxisFilter& f) {
  const std::size_t n = 2 * m;
  Stencil s{n, m, f.taps.size(), {}, {}};
  s.src.reserve(n * s.width);
  s.weight.reserve(n * s.width);
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t j = 0; j < s.width; ++j) {
      const auto i = static_cast<std::ptrdiff_t>(k) + f.center - static_cast<std::ptrdiff_t>(j);
      const auto u = extend_index(i, n, f.ext);
      const bool on_grid = (u % 2) == static_cast<std::size_t>(f.phase % 2) && u >= static_cast<std::size_t>(f.phase % 2);
      s.src.push_back(on_grid ? (u - std::size_t(f.phase % 2)) / 2 : 0);
      s.weight.push_back(on_grid ? f.taps[j] : 0.0);
    }
  }
  return s;
}

Tensor apply(const Tensor& x, std::size_t axis, const Stencil& s) {
  const auto l = lines_of(x.shape(), axis);
  if (l.extent != s.in_len) throw ShapeError("filter: extent mismatch along axis");
  Shape shape = x.shape();
  shape[axis] = s.out_len;
  Tensor y(shape);
  const double* in = x.data().data();
  double* out = y.data().data();
  for (std::size_t o = 0; o < l.outer; ++o) {
    for (std::size_t k = 0; k < s.out_len; ++k) {
      double* dst = out + (o * s.out_len + k) * l.inner;
      for (std::size_t j = 0; j < s.width; ++j) {
        const double w = s.weight[k * s.width + j];
        if (w == 0.0) continue;
        const double* src = in + (o * s.in_len + s.src[k * s.width + j]) * l.inner;
        for (std::size_t i = 0; i < l.inner; ++i) dst[i] += w * src[i];
      }
    }
  }
  return y;
}

Tensor apply_adjoint(const Tensor& y, std::size_t axis, const Stencil& s) {
  const auto l = lines_of(y.shape(), axis);
  if (l.extent != s.out_len) throw ShapeError("filter adjoint: extent mismatch along axis");
  Shape shape = y.shape();
  shape[axis] = s.in_len;
  Tensor x(shape);
  const double* in = y.data().data();
  double* out = x.data().data();
  for (std::size_t o = 0; o < l.outer; ++o) {
    for (std::size_t k = 0; k < s.out_len; ++k) {
      const double* src = in + (o * s.out_len + k) * l.inner;
      for (std::size_t j = 0; j < s.width; ++j) {
        const double w = s.weight[k * s.width + j];
        if (w == 0.0) continue;
        double* dst = out + (o * s.in_len + s.src[k * s.width + j]) * l.inner;
        for (std::size_t i = 0; i < l.inner; ++i) dst[i] += w * src[i];
      }
    }
  }
  return x;
}

}  // namespace

Tensor decimate(const Tensor& x, std::size_t axis, const AxisFilter& f) {
  return apply(x, axis, decimate_stencil(lines_of(x.shape(), axis).extent, f));
}

Tensor decimate_adjoint(const Tensor& y, std::size_t axis, const AxisFilter& f) {
  return apply_adjoint(y, axis, decimate_stencil(2 * lines_of(y.shape(), axis).extent, f));
}

Tensor interpolate(const Tensor& y, std::size_t axis, const AxisFilter& f) {
  return apply(y, axis, interpolate_stencil(lines_of(y.shape(), axis).extent, f));
}

Tensor interpolate_adjoint(const Tensor& x, std::size_t axis, const AxisFilter& f) {
  const auto n = lines_of(x.shape(), axis).extent;
  if (n % 2 != 0) throw ShapeError("interpolate adjoint: extent " + std::to_string(n) + " is odd");
  return apply_adjoint(x, axis, interpolate_stencil(n / 2, f));
}

Var decimate(const Var& x, std::size_t axis, const AxisFilter& f) {
  auto s = decimate_stencil(lines_of(x.shape(), axis).extent, f);
  auto y = apply(x.value(), axis, s);
  return x.tape().record(std::move(y), {x}, [axis, s = std::move(s)](BackwardContext& ctx) {
    *ctx.input_grad(0) += apply_adjoint(ctx.grad_output(), axis, s);
  });
}

Var interpolate(const Var& y, std::size_t axis, const AxisFilter& f) {
  auto s = interpolate_stencil(lines_of(y.shape(), axis).extent, f);
  auto x = apply(y.value(), axis, s);
  return y.tape().record(std::move(x), {y}, [axis, s = std::move(s)](BackwardContext& ctx) {
    *ctx.input_grad(0) += apply_adjoint(ctx.grad_output(), axis, s);
  });
}

}  // namespace desnow::wavelet
