#include "desnow/training.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include "desnow/error.hpp"
#include "desnow/image_io.hpp"
#include "desnow/ops.hpp"
#include "desnow/optim.hpp"

namespace desnow::train {

namespace fs = std::filesystem;

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (epochs < 1) throw ConfigError("train.epochs must be >= 1");
  if (lambda_ccl < 0.0) throw ConfigError("train.lambda_ccl must be >= 0");
  if (checkpoint_every < 0) throw ConfigError("train.checkpoint_every must be >= 0");
  if (crop_size < 0 || crop_size % 4 != 0) throw ConfigError("train.crop_size must be 0 or a positive multiple of 4");
  patch.validate();
  if (lr_schedule.empty()) throw ConfigError("train.lr_schedule is empty");
  int next = 1;
  for (const auto& p : lr_schedule) {
    if (p.first_epoch != next || p.last_epoch < p.first_epoch)
      throw ConfigError("train.lr_schedule must partition epochs 1.." + std::to_string(epochs) +
                        " in order; phase starting at " + std::to_string(p.first_epoch) + " expected at " +
                        std::to_string(next));
    if (!(p.lr > 0.0)) throw ConfigError("train.lr_schedule learning rates must be positive");
    next = p.last_epoch + 1;
  }
  if (next != epochs + 1)
    throw ConfigError("train.lr_schedule ends at epoch " + std::to_string(next - 1) + " but epochs is " +
                      std::to_string(epochs));
}

double TrainConfig::lr_at(int epoch) const {
  for (const auto& p : lr_schedule)
    if (epoch >= p.first_epoch && epoch <= p.last_epoch) return p.lr;
  throw ConfigError("no learning rate scheduled for epoch " + std::to_string(epoch));
}

std::vector<LrPhase> compressed_schedule(int epochs, double lr) {
  if (epochs < 3) throw ConfigError("compressed schedule needs at least 3 epochs");
  const int a = std::max(1, epochs * 3 / 10);
  const int b = std::max(a + 1, epochs * 6 / 10);
  return {{1, a, lr}, {a + 1, b, lr * 0.1}, {b + 1, epochs, lr * 0.01}};
}

Var total_loss(const Var& restored, const Var& clean, const TrainConfig& config) {
  const Var l1 = ops::l1_loss(restored, clean);
  if (config.lambda_ccl == 0.0) return l1;
  return ops::add(l1, ops::scale(priors::ccl_loss(restored, clean, config.patch, config.ccl_norm),
                                 config.lambda_ccl));
}

double total_loss(const Tensor& restored, const Tensor& clean, const TrainConfig& config) {
  require_same_shape(restored, clean, "total_loss");
  double l1 = 0.0;
  for (std::size_t i = 0; i < restored.numel(); ++i) l1 += std::abs(restored[i] - clean[i]);
  l1 /= static_cast<double>(restored.numel());
  if (config.lambda_ccl == 0.0) return l1;
  return l1 + config.lambda_ccl * priors::ccl_loss(restored, clean, config.patch, config.ccl_norm);
}

namespace {

Tensor crop_at(const Tensor& t, std::size_t y0, std::size_t x0, std::size_t s) {
  Tensor out({t.dim(0), s, s});
  for (std::size_t c = 0; c < t.dim(0); ++c)
    for (std::size_t y = 0; y < s; ++y)
      for (std::size_t x = 0; x < s; ++x) out.at(c, y, x) = t.at(c, y0 + y, x0 + x);
  return out;
}

}  // namespace

std::vector<EpochRecord> train(net::ModelWeights& weights, const Dataset& data, const TrainConfig& config,
                               const TrainHooks& hooks) {
  config.validate();
  if (data.empty()) throw DataError("training dataset is empty");
  for (const auto& p : data) {
    if (p.degraded.shape() != p.clean.shape())
      throw ShapeError("pair '" + p.name + "': degraded " + to_string(p.degraded.shape()) + " vs clean " +
                       to_string(p.clean.shape()));
    const auto& s = p.clean.shape();
    if (s.size() != 3 || s[0] != 3 || s[1] % 4 || s[2] % 4)
      throw ShapeError("pair '" + p.name + "': extents " + to_string(s) + " must be (3,H,W) with H,W divisible by 4");
    if (config.crop_size > 0 && (s[1] < std::size_t(config.crop_size) || s[2] < std::size_t(config.crop_size)))
      throw ShapeError("pair '" + p.name + "' is smaller than crop_size " + std::to_string(config.crop_size));
  }

  std::mt19937_64 rng(config.seed);
  Adam adam;
  std::vector<std::size_t> order(data.size());
  std::vector<EpochRecord> log;
  const std::size_t B = std::size_t(config.batch_size);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const double lr = config.lr_at(epoch);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start < order.size(); start += B) {
      const std::size_t end = std::min(order.size(), start + B);
      const double inv = 1.0 / double(end - start);
      weights.zero_grad();
      double batch_loss = 0.0;
      for (std::size_t k = start; k < end; ++k) {
        const Pair& p = data[order[k]];
        Tensor x = p.degraded, y = p.clean;
        if (config.crop_size > 0) {
          const std::size_t s = std::size_t(config.crop_size);
          const std::size_t y0 = std::uniform_int_distribution<std::size_t>(0, x.dim(1) - s)(rng);
          const std::size_t x0 = std::uniform_int_distribution<std::size_t>(0, x.dim(2) - s)(rng);
          x = crop_at(x, y0, x0, s);
          y = crop_at(y, y0, x0, s);
        }
        Tape tape;
        net::Binder bind(tape, weights);
        const Var out = net::model_forward(tape.constant(std::move(x)), bind);
        const Var loss = total_loss(out, tape.constant(std::move(y)), config);
        batch_loss += loss.value().item() * inv;
        tape.backward(ops::scale(loss, inv));
      }
      adam.step(weights.params(), lr);
      loss_sum += batch_loss;
      ++batches;
    }
    const EpochRecord rec{epoch, adam.steps(), loss_sum / batches, lr};
    log.push_back(rec);
    if (hooks.on_epoch) hooks.on_epoch(rec);
    if (hooks.checkpoint && config.checkpoint_every > 0 &&
        (epoch % config.checkpoint_every == 0 || epoch == config.epochs))
      hooks.checkpoint(epoch, weights);
  }
  return log;
}

Dataset load_pairs(const fs::path& degraded_dir, const fs::path& clean_dir) {
  const auto list = [](const fs::path& dir) {
    if (!fs::is_directory(dir)) throw DataError("not a directory: '" + dir.string() + "'");
    std::set<std::string> names;
    for (const auto& e : fs::directory_iterator(dir)) {
      if (!e.is_regular_file()) continue;
      auto ext = e.path().extension().string();
      std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return char(std::tolower(c)); });
      if (ext == ".png") names.insert(e.path().filename().string());
    }
    return names;
  };
  const auto deg = list(degraded_dir), cln = list(clean_dir);
  for (const auto& n : deg)
    if (!cln.count(n)) throw DataError("degraded image '" + n + "' has no clean counterpart in " + clean_dir.string());
  for (const auto& n : cln)
    if (!deg.count(n)) throw DataError("clean image '" + n + "' has no degraded counterpart in " + degraded_dir.string());
  Dataset out;
  for (const auto& n : deg) {
    Tensor d = io::read_png(degraded_dir / n), c = io::read_png(clean_dir / n);
    if (d.shape() != c.shape())
      throw DataError("pair '" + n + "': degraded " + to_string(d.shape()) + " vs clean " + to_string(c.shape()));
    out.push_back({n, io::reflect_pad(d, 4).image, io::reflect_pad(c, 4).image});
  }
  return out;
}

}  // namespace desnow::train
