#include "desnow/optim.hpp"

#include <cmath>

#include "desnow/error.hpp"

namespace desnow {

void Adam::step(std::span<Parameter> params, double lr) {
  if (m_.empty()) {
    for (const auto& p : params) {
      m_.push_back(Tensor::zeros(p.value.shape()));
      v_.push_back(Tensor::zeros(p.value.shape()));
    }
  }
  if (m_.size() != params.size()) throw std::logic_error("Adam::step: parameter list changed between steps");
  for (const auto& p : params) {
    if (p.grad.shape() != p.value.shape()) {
      throw ShapeError("Adam::step: parameter '" + p.name + "' has no gradient of shape " + to_string(p.value.shape()));
    }
  }
  ++t_;
  const double b1 = options_.beta1, b2 = options_.beta2;
  const double c1 = 1.0 - std::pow(b1, double(t_));
  const double c2 = 1.0 - std::pow(b2, double(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = params[k];
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < p.value.numel(); ++i) {
      const double g = p.grad[i];
      m[i] = b1 * m[i] + (1.0 - b1) * g;
      v[i] = b2 * v[i] + (1.0 - b2) * g * g;
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      p.value[i] -= lr * mhat / (std::sqrt(vhat) + options_.epsilon);
    }
  }
}

}  // namespace desnow
