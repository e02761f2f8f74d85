#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "desnow/autograd.hpp"
#include "desnow/tensor.hpp"

/// DCA -> DTCWE (nesting a second DTCWE on its lowpass) -> RLR restoration network.
namespace desnow::net {

struct NetConfig {
  int base_channels = 64;
  int n_parallel_kernels = 4;
  int conv_kernel = 5;
  int rdn_layers = 4;
  int toy_scale_factor = 1;

  /// Feature width actually used: base_channels / toy_scale_factor.
  int channels() const { return base_channels / toy_scale_factor; }
  void validate() const;
  bool operator==(const NetConfig&) const = default;
};

/// Named parameters of the whole network, in a fixed creation order.
/// Parameter addresses are stable for the lifetime of the object.
class ModelWeights {
 public:
  ModelWeights() = default;
  /// All parameters allocated with the right shapes and zero values.
  explicit ModelWeights(const NetConfig& config);

  const NetConfig& config() const { return config_; }
  std::span<Parameter> params() { return params_; }
  std::span<const Parameter> params() const { return params_; }

  bool contains(std::string_view name) const;
  Parameter& get(std::string_view name);
  const Parameter& get(std::string_view name) const;

  std::size_t parameter_count() const;  ///< sum of enumerated extents
  void zero_grad();

 private:
  void add(std::string name, Shape shape);

  NetConfig config_;
  std::vector<Parameter> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Weights uniform in ±1/sqrt(fan_in), biases zero, each weight generator's
/// second conv zero (uniform kernel mixing at start).
ModelWeights init_weights(const NetConfig& config, std::uint64_t seed);

/// Zero the terminal RLR conv so the model starts as the identity map.
void zero_final_layer(ModelWeights& weights);

std::size_t parameter_count(const NetConfig& config);

/// Binds weights onto a tape: trainable Parameters, or constants for inference.
class Binder {
 public:
  Binder(Tape& tape, ModelWeights& weights) : tape_(tape), mutable_(&weights), const_(&weights) {}
  Binder(Tape& tape, const ModelWeights& weights) : tape_(tape), const_(&weights) {}

  Var operator()(const std::string& name);
  Tape& tape() { return tape_; }
  const NetConfig& config() const { return const_->config(); }

 private:
  Tape& tape_;
  ModelWeights* mutable_ = nullptr;
  const ModelWeights* const_ = nullptr;
};

/// gap -> 1x1 conv (C->N) -> relu -> 1x1 conv (N->N) -> softmax; shape (N).
Var wg_forward(const Var& features, Binder& b, const std::string& prefix);

/// One convolution with kernel sum_i pi_i W_i and bias sum_i pi_i b_i.
Var dynamic_conv_forward(const Var& input, std::span<const Var> weights, std::span<const Var> biases,
                         const Var& pi, int padding);

Var dca_forward(const Var& image, Binder& b);
/// Residual dense block with `channels` in and out.
Var rdb_forward(const Var& features, Binder& b, const std::string& prefix);
/// index 1 is the outer module; when nest is true it applies module 2 to its lowpass.
Var dtcwe_forward(const Var& features, Binder& b, int index, bool nest);
Var rlr_forward(const Var& features, const Var& original, Binder& b);

Var model_forward(const Var& image, Binder& b);
/// Inference without gradients.
Tensor model_forward(const Tensor& image, const ModelWeights& weights);

/// Names of the six directional branches in subband order.
std::string_view branch_name(std::size_t k);

}  // namespace desnow::net
