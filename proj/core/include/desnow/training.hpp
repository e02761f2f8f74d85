#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "desnow/autograd.hpp"
#include "desnow/channel_priors.hpp"
#include "desnow/network.hpp"
#include "desnow/tensor.hpp"

namespace desnow::train {

struct LrPhase {
  int first_epoch = 1;
  int last_epoch = 1;
  double lr = 0.0;
  bool operator==(const LrPhase&) const = default;
};

struct TrainConfig {
  int batch_size = 16;
  int epochs = 100;
  std::vector<LrPhase> lr_schedule{{1, 30, 1e-4}, {31, 60, 1e-5}, {61, 100, 1e-6}};
  double lambda_ccl = 0.1;
  priors::LossNorm ccl_norm = priors::LossNorm::kL1;
  priors::PatchSpec patch{};
  std::uint64_t seed = 0;
  int checkpoint_every = 0;  ///< epochs between checkpoints, 0 = never
  int crop_size = 0;         ///< random square crop per sample, 0 = whole image

  /// Schedule phases must be ordered, contiguous, cover [1, epochs], lr > 0.
  void validate() const;
  double lr_at(int epoch) const;
  bool operator==(const TrainConfig&) const = default;
};

/// Full-length schedule 1e-4 / 1e-5 / 1e-6 over epochs 1-30 / 31-60 / 61-100, scaled
/// to `epochs` in the same 30/30/40 proportions with base learning rate `lr`.
std::vector<LrPhase> compressed_schedule(int epochs, double lr);

struct Pair {
  std::string name;
  Tensor degraded;
  Tensor clean;
};
using Dataset = std::vector<Pair>;

/// l1(restored, clean) + lambda * ccl(restored, clean).
Var total_loss(const Var& restored, const Var& clean, const TrainConfig& config);
double total_loss(const Tensor& restored, const Tensor& clean, const TrainConfig& config);

struct EpochRecord {
  int epoch = 0;
  std::int64_t step = 0;  ///< optimizer steps taken by the end of the epoch
  double loss = 0.0;      ///< mean pre-update batch loss over the epoch
  double lr = 0.0;
};

using CheckpointFn = std::function<void(int epoch, const net::ModelWeights&)>;
using EpochFn = std::function<void(const EpochRecord&)>;

struct TrainHooks {
  CheckpointFn checkpoint;
  EpochFn on_epoch;
};

/// Shuffled mini-batch Adam. Deterministic for a given seed.
std::vector<EpochRecord> train(net::ModelWeights& weights, const Dataset& data, const TrainConfig& config,
                               const TrainHooks& hooks = {});

/// Pairs PNG files with identical names in two directories, sorted by name.
/// Images are reflect-padded to a multiple of 4.
Dataset load_pairs(const std::filesystem::path& degraded_dir, const std::filesystem::path& clean_dir);

}  // namespace desnow::train
