#include "desnow/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "desnow/error.hpp"

namespace desnow::ops {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using StridedMap = Eigen::Map<RowMat, 0, Eigen::OuterStride<>>;
using ConstStridedMap = Eigen::Map<const RowMat, 0, Eigen::OuterStride<>>;

// Bounds the im2col buffer to roughly 32 MiB of doubles.
constexpr std::size_t kMaxColumnElements = std::size_t{1} << 22;

struct ConvGeometry {
  std::size_t channels, height, width, out_channels, kernel, stride, padding, out_h, out_w;

  std::size_t patch() const { return channels * kernel * kernel; }
  std::size_t rows_per_chunk() const {
    const std::size_t per_row = std::max<std::size_t>(1, patch() * out_w);
    return std::clamp<std::size_t>(kMaxColumnElements / per_row, 1, out_h);
  }
};

ConvGeometry conv_geometry(const Tensor& input, const Tensor& weight, const Tensor& bias, int stride,
                           int padding) {
  if (input.rank() != 3) throw ShapeError("conv2d: input must be (C,H,W), got " + to_string(input.shape()));
  if (weight.rank() != 4 || weight.dim(2) != weight.dim(3)) {
    throw ShapeError("conv2d: weight must be (O,C,K,K), got " + to_string(weight.shape()));
  }
  if (weight.dim(1) != input.dim(0)) {
    throw ShapeError("conv2d: weight " + to_string(weight.shape()) + " does not match input " +
                     to_string(input.shape()) + " channels");
  }
  if (bias.rank() != 1 || bias.dim(0) != weight.dim(0)) {
    throw ShapeError("conv2d: bias " + to_string(bias.shape()) + " does not match weight " +
                     to_string(weight.shape()));
  }
  if (stride < 1 || padding < 0) throw ShapeError("conv2d: stride must be positive and padding non-negative");
  ConvGeometry g{input.dim(0), input.dim(1),  input.dim(2), weight.dim(0), weight.dim(2),
                 std::size_t(stride), std::size_t(padding), 0, 0};
  if (g.height + 2 * g.padding < g.kernel || g.width + 2 * g.padding < g.kernel) {
    throw ShapeError("conv2d: kernel " + to_string(weight.shape()) + " does not fit padded input " +
                     to_string(input.shape()));
  }
  g.out_h = (g.height + 2 * g.padding - g.kernel) / g.stride + 1;
  g.out_w = (g.width + 2 * g.padding - g.kernel) / g.stride + 1;
  return g;
}

// Fills cols (patch x rows*out_w) for output rows [r0, r0+rows).
void im2col(const ConvGeometry& g, const double* in, std::size_t r0, std::size_t rows, double* cols) {
  const std::size_t ncols = rows * g.out_w;
  const auto k = g.kernel;
  for (std::size_t c = 0; c < g.channels; ++c) {
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        double* dst = cols + ((c * k + ky) * k + kx) * ncols;
        for (std::size_t r = 0; r < rows; ++r) {
          const auto iy = static_cast<std::ptrdiff_t>((r0 + r) * g.stride + ky) - static_cast<std::ptrdiff_t>(g.padding);
          double* row = dst + r * g.out_w;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.height)) {
            std::fill(row, row + g.out_w, 0.0);
            continue;
          }
          const double* src = in + (c * g.height + std::size_t(iy)) * g.width;
          for (std::size_t x = 0; x < g.out_w; ++x) {
            const auto ix = static_cast<std::ptrdiff_t>(x * g.stride + kx) - static_cast<std::ptrdiff_t>(g.padding);
            row[x] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.width)) ? 0.0 : src[ix];
          }
        }
      }
    }
  }
}

void col2im(const ConvGeometry& g, const double* cols, std::size_t r0, std::size_t rows, double* in_grad) {
  const std::size_t ncols = rows * g.out_w;
  const auto k = g.kernel;
  for (std::size_t c = 0; c < g.channels; ++c) {
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        const double* src = cols + ((c * k + ky) * k + kx) * ncols;
        for (std::size_t r = 0; r < rows; ++r) {
          const auto iy = static_cast<std::ptrdiff_t>((r0 + r) * g.stride + ky) - static_cast<std::ptrdiff_t>(g.padding);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.height)) continue;
          double* dst = in_grad + (c * g.height + std::size_t(iy)) * g.width;
          const double* row = src + r * g.out_w;
          for (std::size_t x = 0; x < g.out_w; ++x) {
            const auto ix = static_cast<std::ptrdiff_t>(x * g.stride + kx) - static_cast<std::ptrdiff_t>(g.padding);
            if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(g.width)) dst[ix] += row[x];
          }
        }
      }
    }
  }
}

Tensor conv_forward(const ConvGeometry& g, const Tensor& input, const Tensor& weight, const Tensor& bias) {
  Tensor out(Shape{g.out_channels, g.out_h, g.out_w});
  const std::size_t plane = g.out_h * g.out_w;
  Eigen::Map<const RowMat> w(weight.data().data(), Eigen::Index(g.out_channels), Eigen::Index(g.patch()));
  const std::size_t chunk = g.rows_per_chunk();
  std::vector<double> cols(g.patch() * chunk * g.out_w);
  for (std::size_t r0 = 0; r0 < g.out_h; r0 += chunk) {
    const std::size_t rows = std::min(chunk, g.out_h - r0);
    const std::size_t ncols = rows * g.out_w;
    im2col(g, input.data().data(), r0, rows, cols.data());
    Eigen::Map<const RowMat> c(cols.data(), Eigen::Index(g.patch()), Eigen::Index(ncols));
    StridedMap o(out.data().data() + r0 * g.out_w, Eigen::Index(g.out_channels), Eigen::Index(ncols),
                 Eigen::OuterStride<>(Eigen::Index(plane)));
    o.noalias() = w * c;
  }
  for (std::size_t oc = 0; oc < g.out_channels; ++oc) {
    double* p = out.data().data() + oc * plane;
    for (std::size_t i = 0; i < plane; ++i) p[i] += bias[oc];
  }
  return out;
}

void conv_backward(const ConvGeometry& g, const Tensor& input, const Tensor& weight, const Tensor& gout,
                   Tensor* gin, Tensor* gw, Tensor* gb) {
  const std::size_t plane = g.out_h * g.out_w;
  if (gb) {
    for (std::size_t oc = 0; oc < g.out_channels; ++oc) {
      const double* p = gout.data().data() + oc * plane;
      double s = 0.0;
      for (std::size_t i = 0; i < plane; ++i) s += p[i];
      (*gb)[oc] += s;
    }
  }
  if (!gin && !gw) return;
  Eigen::Map<const RowMat> w(weight.data().data(), Eigen::Index(g.out_channels), Eigen::Index(g.patch()));
  const std::size_t chunk = g.rows_per_chunk();
  std::vector<double> cols(g.patch() * chunk * g.out_w);
  for (std::size_t r0 = 0; r0 < g.out_h; r0 += chunk) {
    const std::size_t rows = std::min(chunk, g.out_h - r0);
    const std::size_t ncols = rows * g.out_w;
    ConstStridedMap go(gout.data().data() + r0 * g.out_w, Eigen::Index(g.out_channels), Eigen::Index(ncols),
                       Eigen::OuterStride<>(Eigen::Index(plane)));
    Eigen::Map<RowMat> c(cols.data(), Eigen::Index(g.patch()), Eigen::Index(ncols));
    if (gw) {
      im2col(g, input.data().data(), r0, rows, cols.data());
      Eigen::Map<RowMat> dw(gw->data().data(), Eigen::Index(g.out_channels), Eigen::Index(g.patch()));
      dw.noalias() += go * c.transpose();
    }
    if (gin) {
      c.noalias() = w.transpose() * go;
      col2im(g, cols.data(), r0, rows, gin->data().data());
    }
  }
}

// Decomposes a shape around `axis` as (outer, extent, inner).
struct AxisSplit {
  std::size_t outer = 1, extent = 1, inner = 1;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis) {
  if (axis >= shape.size()) {
    throw ShapeError("axis " + std::to_string(axis) + " invalid for shape " + to_string(shape));
  }
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

void require_same(const Var& a, const Var& b, const char* what) { require_same_shape(a.value(), b.value(), what); }

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, int stride, int padding) {
  const auto g = conv_geometry(input, weight, bias, stride, padding);
  return conv_forward(g, input, weight, bias);
}

Var conv2d(const Var& input, const Var& weight, const Var& bias, int stride, int padding) {
  const auto g = conv_geometry(input.value(), weight.value(), bias.value(), stride, padding);
  auto out = conv_forward(g, input.value(), weight.value(), bias.value());
  return input.tape().record(std::move(out), {input, weight, bias}, [g](BackwardContext& ctx) {
    conv_backward(g, ctx.input(0), ctx.input(1), ctx.grad_output(), ctx.input_grad(0), ctx.input_grad(1),
                  ctx.input_grad(2));
  });
}

Var relu(const Var& x) {
  Tensor out = x.value();
  for (auto& v : out.data()) v = v > 0.0 ? v : 0.0;
  return x.tape().record(std::move(out), {x}, [](BackwardContext& ctx) {
    const auto& in = ctx.input(0);
    const auto& g = ctx.grad_output();
    Tensor* gi = ctx.input_grad(0);
    for (std::size_t i = 0; i < in.numel(); ++i) {
      if (in[i] > 0.0) (*gi)[i] += g[i];
    }
  });
}

Var softmax(const Var& x, std::size_t axis) {
  const auto s = split_axis(x.shape(), axis);
  const Tensor& in = x.value();
  Tensor out(in.shape());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      const std::size_t base = o * s.extent * s.inner + i;
      double m = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < s.extent; ++k) m = std::max(m, in[base + k * s.inner]);
      double z = 0.0;
      for (std::size_t k = 0; k < s.extent; ++k) {
        const double e = std::exp(in[base + k * s.inner] - m);
        out[base + k * s.inner] = e;
        z += e;
      }
      for (std::size_t k = 0; k < s.extent; ++k) out[base + k * s.inner] /= z;
    }
  }
  return x.tape().record(std::move(out), {x}, [s](BackwardContext& ctx) {
    const auto& y = ctx.output();
    const auto& g = ctx.grad_output();
    Tensor* gi = ctx.input_grad(0);
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t i = 0; i < s.inner; ++i) {
        const std::size_t base = o * s.extent * s.inner + i;
        double d = 0.0;
        for (std::size_t k = 0; k < s.extent; ++k) d += g[base + k * s.inner] * y[base + k * s.inner];
        for (std::size_t k = 0; k < s.extent; ++k) {
          const auto idx = base + k * s.inner;
          (*gi)[idx] += y[idx] * (g[idx] - d);
        }
      }
    }
  });
}

Var global_avg_pool(const Var& x) {
  const Tensor& in = x.value();
  if (in.rank() != 3) throw ShapeError("global_avg_pool: expected (C,H,W), got " + to_string(in.shape()));
  const std::size_t c = in.dim(0), plane = in.dim(1) * in.dim(2);
  Tensor out(Shape{c});
  for (std::size_t k = 0; k < c; ++k) {
    double s = 0.0;
    for (std::size_t i = 0; i < plane; ++i) s += in[k * plane + i];
    out[k] = s / double(plane);
  }
  return x.tape().record(std::move(out), {x}, [c, plane](BackwardContext& ctx) {
    const auto& g = ctx.grad_output();
    Tensor* gi = ctx.input_grad(0);
    for (std::size_t k = 0; k < c; ++k) {
      const double v = g[k] / double(plane);
      for (std::size_t i = 0; i < plane; ++i) (*gi)[k * plane + i] += v;
    }
  });
}

Var add(const Var& a, const Var& b) {
  require_same(a, b, "add");
  return a.tape().record(a.value() + b.value(), {a, b}, [](BackwardContext& ctx) {
    if (auto* g = ctx.input_grad(0)) *g += ctx.grad_output();
    if (auto* g = ctx.input_grad(1)) *g += ctx.grad_output();
  });
}

Var sub(const Var& a, const Var& b) {
  require_same(a, b, "sub");
  return a.tape().record(a.value() - b.value(), {a, b}, [](BackwardContext& ctx) {
    if (auto* g = ctx.input_grad(0)) *g += ctx.grad_output();
    if (auto* g = ctx.input_grad(1)) *g -= ctx.grad_output();
  });
}

Var mul(const Var& a, const Var& b) {
  require_same(a, b, "mul");
  return a.tape().record(hadamard(a.value(), b.value()), {a, b}, [](BackwardContext& ctx) {
    if (auto* g = ctx.input_grad(0)) *g += hadamard(ctx.grad_output(), ctx.input(1));
    if (auto* g = ctx.input_grad(1)) *g += hadamard(ctx.grad_output(), ctx.input(0));
  });
}

Var scale(const Var& a, double s) {
  return a.tape().record(a.value() * s, {a}, [s](BackwardContext& ctx) {
    *ctx.input_grad(0) += ctx.grad_output() * s;
  });
}

Var add_scalar(const Var& a, double s) {
  Tensor out = a.value();
  for (auto& v : out.data()) v += s;
  return a.tape().record(std::move(out), {a}, [](BackwardContext& ctx) { *ctx.input_grad(0) += ctx.grad_output(); });
}

Var weighted_sum(std::span<const Var> tensors, const Var& weights) {
  if (tensors.empty()) throw ShapeError("weighted_sum: no tensors");
  const Tensor& w = weights.value();
  if (w.rank() != 1 || w.dim(0) != tensors.size()) {
    throw ShapeError("weighted_sum: weights " + to_string(w.shape()) + " do not match " +
                     std::to_string(tensors.size()) + " tensors");
  }
  Tensor out = Tensor::zeros(tensors[0].shape());
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    require_same_shape(tensors[0].value(), tensors[i].value(), "weighted_sum");
    const auto& t = tensors[i].value();
    for (std::size_t j = 0; j < out.numel(); ++j) out[j] += w[i] * t[j];
  }
  std::vector<Var> inputs(tensors.begin(), tensors.end());
  inputs.push_back(weights);
  const std::size_t n = tensors.size();
  return weights.tape().record(std::move(out), std::move(inputs), [n](BackwardContext& ctx) {
    const auto& g = ctx.grad_output();
    const auto& wv = ctx.input(n);
    Tensor* gw = ctx.input_grad(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (auto* gt = ctx.input_grad(i)) *gt += g * wv[i];
      if (gw) (*gw)[i] += dot(g, ctx.input(i));
    }
  });
}

Var concat(std::span<const Var> parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no tensors");
  Shape shape = parts[0].shape();
  split_axis(shape, axis);
  std::vector<std::size_t> extents;
  std::size_t total = 0;
  for (const auto& p : parts) {
    const auto& s = p.shape();
    bool ok = s.size() == shape.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) ok = (i == axis) || s[i] == shape[i];
    if (!ok) {
      throw ShapeError("concat: " + to_string(s) + " incompatible with " + to_string(shape) + " along axis " +
                       std::to_string(axis));
    }
    extents.push_back(s[axis]);
    total += s[axis];
  }
  shape[axis] = total;
  const auto split = split_axis(shape, axis);
  Tensor out(shape);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto& src = parts[k].value();
    const std::size_t block = extents[k] * split.inner;
    for (std::size_t o = 0; o < split.outer; ++o) {
      std::copy_n(src.data().data() + o * block, block,
                  out.data().data() + o * total * split.inner + offset * split.inner);
    }
    offset += extents[k];
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return parts[0].tape().record(std::move(out), std::move(inputs), [extents, split, total](BackwardContext& ctx) {
    const auto& g = ctx.grad_output();
    std::size_t offset = 0;
    for (std::size_t k = 0; k < extents.size(); ++k) {
      const std::size_t block = extents[k] * split.inner;
      if (auto* gi = ctx.input_grad(k)) {
        for (std::size_t o = 0; o < split.outer; ++o) {
          const double* src = g.data().data() + o * total * split.inner + offset * split.inner;
          double* dst = gi->data().data() + o * block;
          for (std::size_t i = 0; i < block; ++i) dst[i] += src[i];
        }
      }
      offset += extents[k];
    }
  });
}

Var slice(const Var& x, std::size_t axis, std::size_t begin, std::size_t length) {
  const auto s = split_axis(x.shape(), axis);
  if (length == 0 || begin + length > s.extent) {
    throw ShapeError("slice: [" + std::to_string(begin) + ", " + std::to_string(begin + length) +
                     ") out of range for " + to_string(x.shape()) + " axis " + std::to_string(axis));
  }
  Shape shape = x.shape();
  shape[axis] = length;
  Tensor out(shape);
  const std::size_t block = length * s.inner;
  for (std::size_t o = 0; o < s.outer; ++o) {
    std::copy_n(x.value().data().data() + (o * s.extent + begin) * s.inner, block, out.data().data() + o * block);
  }
  return x.tape().record(std::move(out), {x}, [s, begin, block](BackwardContext& ctx) {
    const auto& g = ctx.grad_output();
    Tensor* gi = ctx.input_grad(0);
    for (std::size_t o = 0; o < s.outer; ++o) {
      double* dst = gi->data().data() + (o * s.extent + begin) * s.inner;
      const double* src = g.data().data() + o * block;
      for (std::size_t i = 0; i < block; ++i) dst[i] += src[i];
    }
  });
}

Var reshape(const Var& x, Shape shape) {
  auto out = x.value().reshaped(std::move(shape));
  return x.tape().record(std::move(out), {x}, [](BackwardContext& ctx) {
    Tensor* gi = ctx.input_grad(0);
    const auto& g = ctx.grad_output();
    for (std::size_t i = 0; i < g.numel(); ++i) (*gi)[i] += g[i];
  });
}

Var clamp(const Var& x, double lo, double hi) {
  Tensor out = x.value();
  for (auto& v : out.data()) v = std::clamp(v, lo, hi);
  return x.tape().record(std::move(out), {x}, [lo, hi](BackwardContext& ctx) {
    const auto& in = ctx.input(0);
    const auto& g = ctx.grad_output();
    Tensor* gi = ctx.input_grad(0);
    for (std::size_t i = 0; i < in.numel(); ++i) {
      if (in[i] >= lo && in[i] <= hi) (*gi)[i] += g[i];
    }
  });
}

Var sum(const Var& x) {
  return x.tape().record(Tensor::scalar(desnow::sum(x.value())), {x}, [](BackwardContext& ctx) {
    const double g = ctx.grad_output()[0];
    for (auto& v : ctx.input_grad(0)->data()) v += g;
  });
}

Var mean(const Var& x) {
  const double n = double(x.numel());
  return x.tape().record(Tensor::scalar(desnow::sum(x.value()) / n), {x}, [n](BackwardContext& ctx) {
    const double g = ctx.grad_output()[0] / n;
    for (auto& v : ctx.input_grad(0)->data()) v += g;
  });
}

Var l1_loss(const Var& pred, const Var& target) {
  require_same(pred, target, "l1_loss");
  const auto& p = pred.value();
  const auto& t = target.value();
  double s = 0.0;
  for (std::size_t i = 0; i < p.numel(); ++i) s += std::abs(p[i] - t[i]);
  const double n = double(p.numel());
  return pred.tape().record(Tensor::scalar(s / n), {pred, target}, [n](BackwardContext& ctx) {
    const auto& p = ctx.input(0);
    const auto& t = ctx.input(1);
    const double g = ctx.grad_output()[0] / n;
    Tensor* gp = ctx.input_grad(0);
    Tensor* gt = ctx.input_grad(1);
    for (std::size_t i = 0; i < p.numel(); ++i) {
      const double d = p[i] - t[i];
      const double sgn = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
      if (gp) (*gp)[i] += g * sgn;
      if (gt) (*gt)[i] -= g * sgn;
    }
  });
}

Var mse_loss(const Var& pred, const Var& target) {
  require_same(pred, target, "mse_loss");
  const auto& p = pred.value();
  const auto& t = target.value();
  double s = 0.0;
  for (std::size_t i = 0; i < p.numel(); ++i) s += (p[i] - t[i]) * (p[i] - t[i]);
  const double n = double(p.numel());
  return pred.tape().record(Tensor::scalar(s / n), {pred, target}, [n](BackwardContext& ctx) {
    const auto& p = ctx.input(0);
    const auto& t = ctx.input(1);
    const double g = 2.0 * ctx.grad_output()[0] / n;
    Tensor* gp = ctx.input_grad(0);
    Tensor* gt = ctx.input_grad(1);
    for (std::size_t i = 0; i < p.numel(); ++i) {
      if (gp) (*gp)[i] += g * (p[i] - t[i]);
      if (gt) (*gt)[i] -= g * (p[i] - t[i]);
    }
  });
}

}  // namespace desnow::ops
