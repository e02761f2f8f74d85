#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "desnow/autograd.hpp"

namespace desnow {

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam with bias correction. Moment state is keyed by parameter position, so
/// step() must always receive the same parameter list in the same order.
class Adam {
 public:
  explicit Adam(AdamOptions options = {}) : options_(options) {}

  void step(std::span<Parameter> params, double lr);

  std::int64_t steps() const noexcept { return t_; }
  const AdamOptions& options() const noexcept { return options_; }

 private:
  AdamOptions options_;
  std::vector<Tensor> m_, v_;
  std::int64_t t_ = 0;
};

}  // namespace desnow
