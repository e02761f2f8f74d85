#pragma once

// Independent reference implementations and generators shared by the unit
// tests and the acceptance runner. Nothing here calls into the code under
// test except for Tape plumbing in the gradient checker.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "desnow/autograd.hpp"
#include "desnow/tensor.hpp"

namespace desnow::testing {

inline Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> d(lo, hi);
  for (double& v : t.data()) v = d(rng);
  return t;
}

inline int random_int(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

/// Six nested loops, zero padding outside the input.
inline Tensor direct_conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad) {
  const long C = long(x.dim(0)), H = long(x.dim(1)), W = long(x.dim(2));
  const long O = long(w.dim(0)), K = long(w.dim(2));
  const long Ho = (H + 2 * pad - K) / stride + 1, Wo = (W + 2 * pad - K) / stride + 1;
  Tensor out({std::size_t(O), std::size_t(Ho), std::size_t(Wo)});
  for (long o = 0; o < O; ++o)
    for (long y = 0; y < Ho; ++y)
      for (long xo = 0; xo < Wo; ++xo) {
        double s = b[std::size_t(o)];
        for (long c = 0; c < C; ++c)
          for (long i = 0; i < K; ++i)
            for (long j = 0; j < K; ++j) {
              const long yy = y * stride + i - pad, xx = xo * stride + j - pad;
              if (yy < 0 || yy >= H || xx < 0 || xx >= W) continue;
              s += w[std::size_t(((o * C + c) * K + i) * K + j)] * x.at(std::size_t(c), std::size_t(yy), std::size_t(xx));
            }
        out.at(std::size_t(o), std::size_t(y), std::size_t(xo)) = s;
      }
  return out;
}

/// Patch-extremum map by direct scan. inner picks over channels (min or max),
/// outer over the clipped (2r+1)^2 window.
inline Tensor direct_prior(const Tensor& img, int r, bool inner_max, bool outer_max) {
  const long H = long(img.dim(1)), W = long(img.dim(2));
  Tensor out({1, std::size_t(H), std::size_t(W)});
  for (long y = 0; y < H; ++y)
    for (long x = 0; x < W; ++x) {
      double best = outer_max ? -1e300 : 1e300;
      for (long yy = std::max(0L, y - r); yy <= std::min(H - 1, y + r); ++yy)
        for (long xx = std::max(0L, x - r); xx <= std::min(W - 1, x + r); ++xx) {
          double v = inner_max ? -1e300 : 1e300;
          for (std::size_t c = 0; c < img.dim(0); ++c) {
            const double s = img.at(c, std::size_t(yy), std::size_t(xx));
            v = inner_max ? std::max(v, s) : std::min(v, s);
          }
          best = outer_max ? std::max(best, v) : std::min(best, v);
        }
      out.at(0, std::size_t(y), std::size_t(x)) = best;
    }
  return out;
}

/// Relative error with an absolute floor so two near-zero values compare equal.
inline double rel_error(double a, double b, double floor = 1e-6) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

struct GradCheck {
  double max_rel = 0.0;
  int probes = 0;
};

/// Central differences on `probes` entries of `x` (perturbed in place and
/// restored), compared with the analytic gradient. Probes favour entries
/// with nonzero analytic gradient so dead units do not pass trivially.
inline GradCheck check_gradient(Tensor& x, const Tensor& analytic, const std::function<double()>& loss,
                                int probes, std::mt19937_64& rng, double eps = 1e-5) {
  std::vector<std::size_t> live;
  for (std::size_t i = 0; i < analytic.numel(); ++i)
    if (analytic[i] != 0.0) live.push_back(i);
  GradCheck r;
  for (int p = 0; p < probes; ++p) {
    const bool use_live = !live.empty() && (p % 4 != 3);
    const std::size_t i = use_live ? live[std::uniform_int_distribution<std::size_t>(0, live.size() - 1)(rng)]
                                   : std::uniform_int_distribution<std::size_t>(0, x.numel() - 1)(rng);
    const double keep = x[i];
    x[i] = keep + eps;
    const double up = loss();
    x[i] = keep - eps;
    const double down = loss();
    x[i] = keep;
    const double numeric = (up - down) / (2.0 * eps);
    r.max_rel = std::max(r.max_rel, rel_error(analytic[i], numeric));
    ++r.probes;
  }
  return r;
}

/// Checks d(probe(f(x)))/dx for a unary Var function, where probe is a fixed
/// random linear functional so every output element matters.
inline GradCheck check_unary(const std::function<Var(const Var&)>& f, Tensor x, int probes, std::mt19937_64& rng,
                             double eps = 1e-5) {
  Tensor weights;
  {
    Tape t;
    weights = random_tensor(f(t.constant(x)).shape(), rng);
  }
  const auto project = [&weights](const Tensor& y) {
    double s = 0.0;
    for (std::size_t i = 0; i < y.numel(); ++i) s += weights[i] * y[i];
    return s;
  };
  Tape tape;
  const Var in = tape.leaf(x);
  const Var y = f(in);
  const Var probe = tape.record(Tensor::scalar(project(y.value())), {y}, [&weights](BackwardContext& ctx) {
                                  if (Tensor* g = ctx.input_grad(0)) *g += weights * ctx.grad_output()[0];
                                });
  tape.backward(probe);
  const Tensor analytic = tape.grad(in);
  return check_gradient(
      x, analytic,
      [&] {
        Tape t;
        return project(f(t.constant(x)).value());
      },
      probes, rng, eps);
}

}  // namespace desnow::testing
