#include "desnow/channel_priors.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <string>

#include "desnow/error.hpp"
#include "desnow/ops.hpp"

namespace desnow::priors {

namespace {

void require_rgb(const Shape& s, const char* what) {
  if (s.size() != 3 || s[0] != 3)
    throw ShapeError(std::string(what) + ": expected a 3-channel (3,H,W) image, got " + to_string(s));
}

// Per-pixel channel extremum plus the channel it came from (first on ties).
struct PixelField {
  std::vector<double> value;
  std::vector<std::size_t> channel;
};

PixelField channel_extremum(const Tensor& img, bool take_max) {
  const std::size_t hw = img.dim(1) * img.dim(2);
  PixelField f{std::vector<double>(hw), std::vector<std::size_t>(hw, 0)};
  for (std::size_t p = 0; p < hw; ++p) {
    double best = img[p];
    for (std::size_t c = 1; c < 3; ++c) {
      const double v = img[c * hw + p];
      if (take_max ? v > best : v < best) {
        best = v;
        f.channel[p] = c;
      }
    }
    f.value[p] = best;
  }
  return f;
}

// Sliding extremum along one line of n samples spaced by `stride`, window
// [i-r, i+r] clipped. Writes the winning source position (earliest on ties).
void slide(const double* in, std::size_t n, std::size_t stride, int r, bool take_max,
           std::size_t* winner) {
  std::deque<std::size_t> dq;
  const auto better = [&](double a, double b) { return take_max ? a > b : a < b; };
  const std::size_t R = static_cast<std::size_t>(r);
  for (std::size_t j = 0; j < n + R; ++j) {
    if (j < n) {
      while (!dq.empty() && better(in[j * stride], in[dq.back() * stride])) dq.pop_back();
      dq.push_back(j);
    }
    if (j < R) continue;
    const std::size_t i = j - R;
    while (dq.front() + R < i) dq.pop_front();
    winner[i] = dq.front();
  }
}

// Index (into the H×W field) of the window extremum for every pixel.
std::vector<std::size_t> window_arg(const std::vector<double>& field, std::size_t H, std::size_t W,
                                    int r, bool take_max) {
  // Row pass: best column per (y, x).
  std::vector<std::size_t> col(H * W);
  std::vector<double> rowbest(H * W);
  for (std::size_t y = 0; y < H; ++y) {
    slide(field.data() + y * W, W, 1, r, take_max, col.data() + y * W);
    for (std::size_t x = 0; x < W; ++x) rowbest[y * W + x] = field[y * W + col[y * W + x]];
  }
  // Column pass: best row among the row winners. Earliest row wins ties, and
  // within that row the earliest column already won, giving row-major order.
  std::vector<std::size_t> out(H * W), row(H);
  for (std::size_t x = 0; x < W; ++x) {
    slide(rowbest.data() + x, H, W, r, take_max, row.data());
    for (std::size_t y = 0; y < H; ++y) out[y * W + x] = row[y] * W + col[row[y] * W + x];
  }
  return out;
}

bool field_is_max(PriorKind k) { return k == PriorKind::kBright; }
bool window_is_max(PriorKind k) { return k != PriorKind::kDark; }

}  // namespace

void PatchSpec::validate() const {
  if (size < 1 || size % 2 == 0)
    throw ConfigError("patch size must be a positive odd integer, got " + std::to_string(size));
}

ChannelMap channel_prior_map(const Tensor& image, PriorKind kind, PatchSpec patch) {
  require_rgb(image.shape(), "channel_prior_map");
  patch.validate();
  const std::size_t H = image.dim(1), W = image.dim(2);
  const PixelField f = channel_extremum(image, field_is_max(kind));
  const auto arg = window_arg(f.value, H, W, patch.radius(), window_is_max(kind));
  Tensor out({1, H, W});
  for (std::size_t p = 0; p < H * W; ++p) out[p] = f.value[arg[p]];
  return {std::move(out)};
}

ChannelMap channel_prior_map_brute(const Tensor& image, PriorKind kind, PatchSpec patch) {
  require_rgb(image.shape(), "channel_prior_map_brute");
  patch.validate();
  const long H = long(image.dim(1)), W = long(image.dim(2)), r = patch.radius();
  const bool fmax = field_is_max(kind), wmax = window_is_max(kind);
  Tensor out({1, std::size_t(H), std::size_t(W)});
  for (long y = 0; y < H; ++y) {
    for (long x = 0; x < W; ++x) {
      double best = wmax ? -1e300 : 1e300;
      for (long v = std::max(0L, y - r); v <= std::min(H - 1, y + r); ++v) {
        for (long u = std::max(0L, x - r); u <= std::min(W - 1, x + r); ++u) {
          double px = image.at(0, v, u);
          for (std::size_t c = 1; c < 3; ++c)
            px = fmax ? std::max(px, image.at(c, v, u)) : std::min(px, image.at(c, v, u));
          best = wmax ? std::max(best, px) : std::min(best, px);
        }
      }
      out.at(0, y, x) = best;
    }
  }
  return {std::move(out)};
}

Var contradict_channel(const Var& image, PatchSpec patch) {
  require_rgb(image.shape(), "contradict_channel");
  patch.validate();
  const Tensor& img = image.value();
  const std::size_t H = img.dim(1), W = img.dim(2);
  const PixelField f = channel_extremum(img, false);
  const auto arg = window_arg(f.value, H, W, patch.radius(), true);
  Tensor out({1, H, W});
  std::vector<std::size_t> source(H * W);
  for (std::size_t p = 0; p < H * W; ++p) {
    out[p] = f.value[arg[p]];
    source[p] = f.channel[arg[p]] * H * W + arg[p];
  }
  return image.tape().record(std::move(out), {image}, [source = std::move(source)](BackwardContext& ctx) {
    Tensor* gi = ctx.input_grad(0);
    if (!gi) return;
    const Tensor& go = ctx.grad_output();
    for (std::size_t p = 0; p < source.size(); ++p) (*gi)[source[p]] += go[p];
  });
}

Var ccl_loss(const Var& restored, const Var& clean, PatchSpec patch, LossNorm norm) {
  if (restored.shape() != clean.shape())
    throw ShapeError("ccl_loss: shape mismatch " + to_string(restored.shape()) + " vs " +
                     to_string(clean.shape()));
  const Var a = contradict_channel(restored, patch);
  const Var b = contradict_channel(clean, patch);
  return norm == LossNorm::kL1 ? ops::l1_loss(a, b) : ops::mse_loss(a, b);
}

double ccl_loss(const Tensor& restored, const Tensor& clean, PatchSpec patch, LossNorm norm) {
  require_same_shape(restored, clean, "ccl_loss");
  const Tensor a = channel_prior_map(restored, PriorKind::kContradict, patch).values;
  const Tensor b = channel_prior_map(clean, PriorKind::kContradict, patch).values;
  double s = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    const double d = a[i] - b[i];
    s += norm == LossNorm::kL1 ? std::abs(d) : d * d;
  }
  return s / static_cast<double>(a.numel());
}

ChannelStats channel_stats(const Tensor& image, PatchSpec patch) {
  const auto mean = [](const Tensor& t) { return sum(t) / static_cast<double>(t.numel()); };
  return {mean(channel_prior_map(image, PriorKind::kDark, patch).values),
          mean(channel_prior_map(image, PriorKind::kContradict, patch).values),
          mean(channel_prior_map(image, PriorKind::kBright, patch).values)};
}

ContrastReport channel_contrast_report(const Tensor& snowy, const Tensor& clean, PatchSpec patch) {
  require_same_shape(snowy, clean, "channel_contrast_report");
  return {channel_stats(snowy, patch), channel_stats(clean, patch)};
}

}  // namespace desnow::priors
