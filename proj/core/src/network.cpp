#include "desnow/network.hpp"

#include <array>
#include <cmath>
#include <utility>
#include <random>

#include "desnow/dtcwt.hpp"
#include "desnow/error.hpp"
#include "desnow/ops.hpp"

namespace desnow::net {

namespace {

constexpr std::array<std::string_view, 6> kBranches{"p15", "m15", "p45", "m45", "p75", "m75"};

std::size_t conv_count(std::size_t in, std::size_t out, std::size_t k) { return out * in * k * k + out; }

std::size_t rdb_count(std::size_t c, std::size_t layers, std::size_t k) {
  std::size_t n = conv_count(layers * c, c, 1);
  for (std::size_t i = 1; i < layers; ++i) n += conv_count(i * c, c, k);
  return n;
}

std::string dtcwe_prefix(int index) { return "dtcwe" + std::to_string(index); }

Var conv(const Var& x, Binder& b, const std::string& name, int padding) {
  return ops::conv2d(x, b(name + ".weight"), b(name + ".bias"), 1, padding);
}

}  // namespace

void NetConfig::validate() const {
  if (base_channels < 1) throw ConfigError("base_channels must be >= 1");
  if (toy_scale_factor < 1) throw ConfigError("toy_scale_factor must be >= 1");
  if (base_channels % toy_scale_factor != 0)
    throw ConfigError("base_channels (" + std::to_string(base_channels) +
                      ") must be divisible by toy_scale_factor (" + std::to_string(toy_scale_factor) + ")");
  if (n_parallel_kernels < 1) throw ConfigError("n_parallel_kernels must be >= 1");
  if (conv_kernel < 1 || conv_kernel % 2 == 0) throw ConfigError("conv_kernel must be a positive odd integer");
  if (rdn_layers < 2) throw ConfigError("rdn_layers must be >= 2");
}

ModelWeights::ModelWeights(const NetConfig& config) : config_(config) {
  config.validate();
  const std::size_t C = std::size_t(config.channels()), N = std::size_t(config.n_parallel_kernels),
                    K = std::size_t(config.conv_kernel), L = std::size_t(config.rdn_layers);
  const auto conv_param = [&](const std::string& name, std::size_t in, std::size_t out, std::size_t k) {
    add(name + ".weight", {out, in, k, k});
    add(name + ".bias", {out});
  };
  const auto rdb = [&](const std::string& p, std::size_t c) {
    for (std::size_t i = 1; i < L; ++i) conv_param(p + ".conv" + std::to_string(i), i * c, c, K);
    conv_param(p + ".fuse", L * c, c, 1);
  };

  conv_param("dca.conv1", 3, C, K);
  for (int layer = 1; layer <= 3; ++layer) {
    const std::string p = "dca.dyn" + std::to_string(layer);
    for (std::size_t i = 0; i < N; ++i) conv_param(p + ".k" + std::to_string(i), C, C, K);
    conv_param(p + ".wg.fc1", C, N, 1);
    conv_param(p + ".wg.fc2", N, N, 1);
  }
  for (int m = 1; m <= 2; ++m) {
    for (auto br : kBranches) rdb(dtcwe_prefix(m) + "." + std::string(br), 2 * C);
    rdb(dtcwe_prefix(m) + ".low", C);
  }
  rdb("rlr.rdb1", C);
  conv_param("rlr.conv1", C, C, K);
  rdb("rlr.rdb2", C);
  rdb("rlr.rdb3", C);
  conv_param("rlr.fuse", 2 * C, C, 1);
  conv_param("rlr.tune", C, C, K);
  conv_param("rlr.out", C, 3, K);
}

void ModelWeights::add(std::string name, Shape shape) {
  if (index_.count(name)) throw std::logic_error("duplicate parameter " + name);
  index_.emplace(name, params_.size());
  params_.emplace_back(std::move(name), Tensor::zeros(std::move(shape)));
}

bool ModelWeights::contains(std::string_view name) const { return index_.count(std::string(name)) > 0; }

Parameter& ModelWeights::get(std::string_view name) {
  return const_cast<Parameter&>(std::as_const(*this).get(name));
}

const Parameter& ModelWeights::get(std::string_view name) const {
  const auto it = index_.find(std::string(name));
  if (it == index_.end()) throw DataError("model has no parameter named '" + std::string(name) + "'");
  return params_[it->second];
}

std::size_t ModelWeights::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.numel();
  return n;
}

void ModelWeights::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

ModelWeights init_weights(const NetConfig& config, std::uint64_t seed) {
  ModelWeights w(config);
  std::mt19937_64 rng(seed);
  for (auto& p : w.params()) {
    if (p.value.rank() != 4) continue;  // biases stay zero
    if (p.name.ends_with(".wg.fc2.weight")) continue;
    const Shape& s = p.value.shape();
    const double bound = 1.0 / std::sqrt(static_cast<double>(s[1] * s[2] * s[3]));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& v : p.value.data()) v = dist(rng);
  }
  return w;
}

void zero_final_layer(ModelWeights& weights) {
  weights.get("rlr.out.weight").value.fill(0.0);
  weights.get("rlr.out.bias").value.fill(0.0);
}

std::size_t parameter_count(const NetConfig& config) {
  config.validate();
  const std::size_t C = std::size_t(config.channels()), N = std::size_t(config.n_parallel_kernels),
                    K = std::size_t(config.conv_kernel), L = std::size_t(config.rdn_layers);
  const std::size_t dca = conv_count(3, C, K) + 3 * (N * conv_count(C, C, K) + conv_count(C, N, 1) + conv_count(N, N, 1));
  const std::size_t dtcwe = 6 * rdb_count(2 * C, L, K) + rdb_count(C, L, K);
  const std::size_t rlr = 3 * rdb_count(C, L, K) + 2 * conv_count(C, C, K) + conv_count(2 * C, C, 1) + conv_count(C, 3, K);
  return dca + 2 * dtcwe + rlr;
}

Var Binder::operator()(const std::string& name) {
  if (mutable_) return tape_.parameter(mutable_->get(name));
  return tape_.constant(const_->get(name).value);
}

Var wg_forward(const Var& features, Binder& b, const std::string& prefix) {
  const auto C = std::size_t(b.config().channels());
  if (features.shape().size() != 3 || features.shape()[0] != C)
    throw ShapeError("wg_forward: expected " + std::to_string(C) + " feature channels, got " +
                     to_string(features.shape()));
  Var h = ops::reshape(ops::global_avg_pool(features), {C, 1, 1});
  h = ops::relu(conv(h, b, prefix + ".fc1", 0));
  h = conv(h, b, prefix + ".fc2", 0);
  return ops::softmax(ops::reshape(h, {h.numel()}), 0);
}

Var dynamic_conv_forward(const Var& input, std::span<const Var> weights, std::span<const Var> biases,
                         const Var& pi, int padding) {
  if (weights.empty() || weights.size() != biases.size())
    throw ShapeError("dynamic_conv: need matching non-empty weight and bias lists");
  if (pi.shape() != Shape{weights.size()})
    throw ShapeError("dynamic_conv: pi has shape " + to_string(pi.shape()) + ", expected (" +
                     std::to_string(weights.size()) + ")");
  return ops::conv2d(input, ops::weighted_sum(weights, pi), ops::weighted_sum(biases, pi), 1, padding);
}

Var dca_forward(const Var& image, Binder& b) {
  const NetConfig& cfg = b.config();
  const int pad = cfg.conv_kernel / 2;
  const Var h1 = conv(image, b, "dca.conv1", pad);
  Var h = h1;
  for (int layer = 1; layer <= 3; ++layer) {
    const std::string p = "dca.dyn" + std::to_string(layer);
    const Var pi = wg_forward(h, b, p + ".wg");
    std::vector<Var> ws, bs;
    for (int i = 0; i < cfg.n_parallel_kernels; ++i) {
      ws.push_back(b(p + ".k" + std::to_string(i) + ".weight"));
      bs.push_back(b(p + ".k" + std::to_string(i) + ".bias"));
    }
    h = ops::relu(dynamic_conv_forward(h, ws, bs, pi, pad));
  }
  return ops::relu(ops::add(h1, h));
}

Var rdb_forward(const Var& features, Binder& b, const std::string& prefix) {
  const NetConfig& cfg = b.config();
  const int pad = cfg.conv_kernel / 2;
  std::vector<Var> stack{features};
  for (int i = 1; i < cfg.rdn_layers; ++i) {
    const Var in = stack.size() == 1 ? features : ops::concat(stack, 0);
    stack.push_back(ops::relu(conv(in, b, prefix + ".conv" + std::to_string(i), pad)));
  }
  return ops::add(features, conv(ops::concat(stack, 0), b, prefix + ".fuse", 0));
}

Var dtcwe_forward(const Var& features, Binder& b, int index, bool nest) {
  const std::string p = dtcwe_prefix(index);
  const auto& s = features.shape();
  if (s.size() != 3 || s[1] % 2 || s[2] % 2)
    throw ShapeError("dtcwe: feature extents must be even, got " + to_string(s));
  const std::size_t C = s[0];
  wavelet::VarPyramid pyr = wavelet::dtcwt_forward(features, 1);
  for (std::size_t k = 0; k < 6; ++k) {
    auto& band = pyr.highpass[0][k];
    const std::array<Var, 2> parts{band.real, band.imag};
    const Var out = rdb_forward(ops::concat(parts, 0), b, p + "." + std::string(kBranches[k]));
    band.real = ops::slice(out, 0, 0, C);
    band.imag = ops::slice(out, 0, C, C);
  }
  pyr.lowpass = rdb_forward(pyr.lowpass, b, p + ".low");
  if (nest) pyr.lowpass = dtcwe_forward(pyr.lowpass, b, index + 1, false);
  return wavelet::idtcwt(pyr);
}

Var rlr_forward(const Var& features, const Var& original, Binder& b) {
  const auto& fs = features.shape();
  const auto& os = original.shape();
  if (fs.size() != 3 || os.size() != 3 || os[0] != 3 || fs[1] != os[1] || fs[2] != os[2])
    throw ShapeError("rlr: features " + to_string(fs) + " do not match original image " + to_string(os));
  const int pad = b.config().conv_kernel / 2;
  const Var u = ops::relu(rdb_forward(features, b, "rlr.rdb1"));
  const Var s = ops::relu(conv(u, b, "rlr.conv1", pad));
  const Var r1 = rdb_forward(s, b, "rlr.rdb2");
  const Var r2 = rdb_forward(r1, b, "rlr.rdb3");
  const std::array<Var, 2> dense{r1, r2};
  const Var fused = ops::add(conv(ops::concat(dense, 0), b, "rlr.fuse", 0), s);
  const Var t = ops::relu(conv(fused, b, "rlr.tune", pad));
  const Var residual = conv(t, b, "rlr.out", pad);
  return ops::clamp(ops::add(original, residual), 0.0, 1.0);
}

Var model_forward(const Var& image, Binder& b) {
  const auto& s = image.shape();
  if (s.size() != 3 || s[0] != 3)
    throw ShapeError("model: expected a (3,H,W) image, got " + to_string(s));
  wavelet::require_divisible(s, 2, "model");
  const Var f = dtcwe_forward(dca_forward(image, b), b, 1, true);
  return rlr_forward(f, image, b);
}

Tensor model_forward(const Tensor& image, const ModelWeights& weights) {
  Tape tape;
  Binder b(tape, weights);
  return model_forward(tape.constant(image), b).value();
}

std::string_view branch_name(std::size_t k) { return kBranches.at(k); }

}  // namespace desnow::net
