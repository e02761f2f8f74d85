#pragma once

#include "desnow/tensor.hpp"

namespace desnow::metrics {

struct SsimOptions {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 1.0;
};

/// 10 log10(1 / MSE), peak 1. Identical inputs give +infinity.
double psnr(const Tensor& a, const Tensor& b);

/// Mean SSIM over all full (unpadded) Gaussian windows, averaged over channels.
double ssim(const Tensor& a, const Tensor& b, const SsimOptions& options = {});

struct QualityReport {
  double psnr_db = 0.0;
  double ssim = 0.0;
};

QualityReport evaluate(const Tensor& restored, const Tensor& reference);

}  // namespace desnow::metrics
