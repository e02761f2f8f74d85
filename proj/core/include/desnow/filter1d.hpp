#pragma once

#include <cstddef>
#include <vector>

#include "desnow/autograd.hpp"
#include "desnow/tensor.hpp"

/// Two-channel filter-bank building blocks applied along one tensor axis.
///
/// Every operation is linear and ships with its exact adjoint, which is what
/// the differentiable (Var) overloads use for their backward pass.
namespace desnow::wavelet {

enum class Extension {
  kSymmetric,  ///< whole-sample mirror: x[-1] = x[1], x[N] = x[N-2]
  kPeriodic,   ///< x[-1] = x[N-1]
};

/// Index of sample i of an extended signal of length n.
std::size_t extend_index(std::ptrdiff_t i, std::size_t n, Extension ext);

struct AxisFilter {
  std::vector<double> taps;
  int center = 0;  ///< tap index aligned with the output sample
  int phase = 0;   ///< polyphase offset of the decimated/upsampled grid
  Extension ext = Extension::kSymmetric;
};

/// y[n] = sum_j taps[j] * x[ext(2n + phase + center - j)], n < N/2.
Tensor decimate(const Tensor& x, std::size_t axis, const AxisFilter& f);
Tensor decimate_adjoint(const Tensor& y, std::size_t axis, const AxisFilter& f);

/// Zero-insert y at positions 2n + phase (length 2M), then
/// x[m] = sum_j taps[j] * u[ext(m + center - j)].
Tensor interpolate(const Tensor& y, std::size_t axis, const AxisFilter& f);
Tensor interpolate_adjoint(const Tensor& x, std::size_t axis, const AxisFilter& f);

Var decimate(const Var& x, std::size_t axis, const AxisFilter& f);
Var interpolate(const Var& y, std::size_t axis, const AxisFilter& f);

}  // namespace desnow::wavelet
