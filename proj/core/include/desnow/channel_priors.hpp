#pragma once

#include "desnow/autograd.hpp"
#include "desnow/tensor.hpp"

/// Patch-extremum channel maps over RGB images and the contradict-channel loss.
///
/// Windows are centered and clipped at the image border. Argmax/argmin ties go
/// to the first candidate in row-major order (and the first channel).
namespace desnow::priors {

struct PatchSpec {
  int size = 15;  ///< odd window edge in pixels

  void validate() const;
  int radius() const { return size / 2; }
  bool operator==(const PatchSpec&) const = default;
};

enum class PriorKind { kDark, kContradict, kBright };

/// 1×H×W map.
struct ChannelMap {
  Tensor values;
};

/// dark: min over patch of channel-min; contradict: max over patch of
/// channel-min; bright: max over patch of channel-max.
ChannelMap channel_prior_map(const Tensor& image, PriorKind kind, PatchSpec patch);
/// Direct patch scan, used as a reference.
ChannelMap channel_prior_map_brute(const Tensor& image, PriorKind kind, PatchSpec patch);

/// Differentiable contradict channel. The gradient of each output pixel flows
/// to the single input sample it was selected from.
Var contradict_channel(const Var& image, PatchSpec patch);

enum class LossNorm { kL1, kL2 };

/// Mean |CC(restored) - CC(clean)| (or mean squared difference for kL2).
Var ccl_loss(const Var& restored, const Var& clean, PatchSpec patch, LossNorm norm = LossNorm::kL1);
double ccl_loss(const Tensor& restored, const Tensor& clean, PatchSpec patch,
                LossNorm norm = LossNorm::kL1);

struct ChannelStats {
  double dark = 0.0;
  double contradict = 0.0;
  double bright = 0.0;
};

struct ContrastReport {
  ChannelStats snowy;
  ChannelStats clean;
};

ChannelStats channel_stats(const Tensor& image, PatchSpec patch);
ContrastReport channel_contrast_report(const Tensor& snowy, const Tensor& clean, PatchSpec patch);

}  // namespace desnow::priors
