#pragma once

#include <span>
#include <vector>

#include "desnow/autograd.hpp"
#include "desnow/tensor.hpp"

/// Differentiable tensor operations recorded on a Tape.
///
/// All operations are deterministic. Shape violations raise ShapeError with
/// both shapes in the message.
namespace desnow::ops {

/// Cross-correlation with zero padding. input (C,H,W), weight (O,C,K,K), bias (O).
/// Output (O, (H+2p-K)/s+1, (W+2p-K)/s+1).
Var conv2d(const Var& input, const Var& weight, const Var& bias, int stride = 1, int padding = 0);
/// Non-recording forward of conv2d, same contract.
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, int stride = 1,
              int padding = 0);

Var relu(const Var& x);
/// Exponent-normalized along `axis`, max-subtracted.
Var softmax(const Var& x, std::size_t axis);
/// (C,H,W) -> (C): spatial mean per channel.
Var global_avg_pool(const Var& x);

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
/// out = sum_i weights[i] * tensors[i]; weights has shape (N).
Var weighted_sum(std::span<const Var> tensors, const Var& weights);

Var concat(std::span<const Var> parts, std::size_t axis);
/// Extent [begin, begin+length) along axis.
Var slice(const Var& x, std::size_t axis, std::size_t begin, std::size_t length);
Var reshape(const Var& x, Shape shape);
/// Elementwise clamp; gradient passes where lo <= x <= hi.
Var clamp(const Var& x, double lo, double hi);

Var sum(const Var& x);
Var mean(const Var& x);
/// Mean absolute difference; gradient w.r.t. both arguments (sign, 0 at ties).
Var l1_loss(const Var& pred, const Var& target);
/// Mean squared difference.
Var mse_loss(const Var& pred, const Var& target);

}  // namespace desnow::ops
