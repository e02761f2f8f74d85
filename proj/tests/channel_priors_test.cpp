#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "desnow/channel_priors.hpp"
#include "desnow/error.hpp"
#include "desnow/ops.hpp"
#include "support/oracles.hpp"

using namespace desnow;
using namespace desnow::priors;
using desnow::testing::direct_prior;
using desnow::testing::random_tensor;

class ChannelPriorsTest : public ::testing::Test {
 protected:
  std::mt19937_64 rng{23};

  Tensor oracle(const Tensor& img, PriorKind kind, int size) const {
    const int r = size / 2;
    switch (kind) {
      case PriorKind::kDark: return direct_prior(img, r, false, false);
      case PriorKind::kContradict: return direct_prior(img, r, false, true);
      case PriorKind::kBright: return direct_prior(img, r, true, true);
    }
    return {};
  }
};

TEST_F(ChannelPriorsTest, ConstantImage) {
  const Tensor img({3, 9, 7}, 0.3);
  for (auto kind : {PriorKind::kDark, PriorKind::kContradict, PriorKind::kBright})
    EXPECT_EQ(channel_prior_map(img, kind, {5}).values, Tensor({1, 9, 7}, 0.3));
}

TEST_F(ChannelPriorsTest, WhiteImageIsOneEverywhere) {
  const Tensor img({3, 16, 16}, 1.0);
  for (auto kind : {PriorKind::kDark, PriorKind::kContradict, PriorKind::kBright})
    EXPECT_EQ(channel_prior_map(img, kind, {15}).values, Tensor({1, 16, 16}, 1.0));
}

TEST_F(ChannelPriorsTest, SlidingWindowMatchesDirectScan) {
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t h = std::size_t(desnow::testing::random_int(rng, 1, 24));
    const std::size_t w = std::size_t(desnow::testing::random_int(rng, 1, 24));
    Tensor img = random_tensor({3, h, w}, rng, 0.0, 1.0);
    // Quantized values create ties.
    if (trial % 3 == 0)
      for (double& v : img.data()) v = std::round(v * 4.0) / 4.0;
    for (int size : {3, 5, 15})
      for (auto kind : {PriorKind::kDark, PriorKind::kContradict, PriorKind::kBright}) {
        const Tensor expect = oracle(img, kind, size);
        ASSERT_EQ(channel_prior_map(img, kind, {size}).values, expect) << h << "x" << w << " p" << size;
        ASSERT_EQ(channel_prior_map_brute(img, kind, {size}).values, expect);
      }
  }
}

TEST_F(ChannelPriorsTest, OrderingChain) {
  for (int trial = 0; trial < 30; ++trial) {
    const Tensor img = random_tensor({3, 20, 20}, rng, 0.0, 1.0);
    const Tensor d = channel_prior_map(img, PriorKind::kDark, {7}).values;
    const Tensor c = channel_prior_map(img, PriorKind::kContradict, {7}).values;
    const Tensor b = channel_prior_map(img, PriorKind::kBright, {7}).values;
    for (std::size_t i = 0; i < d.numel(); ++i) {
      EXPECT_LE(d[i], c[i]);
      EXPECT_LE(c[i], b[i]);
    }
  }
}

TEST_F(ChannelPriorsTest, MonotoneInImage) {
  const Tensor img = random_tensor({3, 16, 16}, rng, 0.0, 0.5);
  Tensor brighter = img;
  for (double& v : brighter.data()) v += 0.5 * std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  for (auto kind : {PriorKind::kDark, PriorKind::kContradict, PriorKind::kBright}) {
    const Tensor a = channel_prior_map(img, kind, {5}).values;
    const Tensor b = channel_prior_map(brighter, kind, {5}).values;
    for (std::size_t i = 0; i < a.numel(); ++i) EXPECT_LE(a[i], b[i]);
  }
}

TEST_F(ChannelPriorsTest, LargerPatchWidensContradict) {
  const Tensor img = random_tensor({3, 20, 20}, rng, 0.0, 1.0);
  const Tensor small = channel_prior_map(img, PriorKind::kContradict, {3}).values;
  const Tensor large = channel_prior_map(img, PriorKind::kContradict, {9}).values;
  for (std::size_t i = 0; i < small.numel(); ++i) EXPECT_LE(small[i], large[i]);
}

TEST_F(ChannelPriorsTest, UnitPatchIsChannelExtremum) {
  const Tensor img = random_tensor({3, 6, 5}, rng, 0.0, 1.0);
  const Tensor c = channel_prior_map(img, PriorKind::kContradict, {1}).values;
  const Tensor b = channel_prior_map(img, PriorKind::kBright, {1}).values;
  for (std::size_t y = 0; y < 6; ++y)
    for (std::size_t x = 0; x < 5; ++x) {
      EXPECT_EQ(c.at(0, y, x), std::min({img.at(0, y, x), img.at(1, y, x), img.at(2, y, x)}));
      EXPECT_EQ(b.at(0, y, x), std::max({img.at(0, y, x), img.at(1, y, x), img.at(2, y, x)}));
    }
}

TEST_F(ChannelPriorsTest, PatchValidation) {
  EXPECT_THROW(PatchSpec{4}.validate(), ConfigError);
  EXPECT_THROW(PatchSpec{0}.validate(), ConfigError);
  EXPECT_THROW(PatchSpec{-3}.validate(), ConfigError);
  EXPECT_NO_THROW(PatchSpec{1}.validate());
  EXPECT_THROW(channel_prior_map(Tensor({3, 4, 4}), PriorKind::kDark, {2}), ConfigError);
  EXPECT_THROW(channel_prior_map(Tensor({2, 4, 4}), PriorKind::kDark, {3}), ShapeError);
}

TEST_F(ChannelPriorsTest, CclOfIdenticalImagesIsZero) {
  for (int trial = 0; trial < 10; ++trial) {
    const Tensor x = random_tensor({3, 12, 12}, rng, 0.0, 1.0);
    EXPECT_EQ(ccl_loss(x, x, {5}), 0.0);
    EXPECT_EQ(ccl_loss(x, x, {5}, LossNorm::kL2), 0.0);
  }
}

TEST_F(ChannelPriorsTest, CclNonnegativeAndSymmetric) {
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor x = random_tensor({3, 10, 10}, rng, 0.0, 1.0), y = random_tensor({3, 10, 10}, rng, 0.0, 1.0);
    EXPECT_GE(ccl_loss(x, y, {3}), 0.0);
    EXPECT_DOUBLE_EQ(ccl_loss(x, y, {3}), ccl_loss(y, x, {3}));
  }
}

TEST_F(ChannelPriorsTest, SingleBrightPixelCountsCoveringWindows) {
  // A lone white pixel on black wins the contradict max in every window that
  // covers it, so the map is one on a clipped square and zero elsewhere.
  const std::size_t n = 12;
  for (std::size_t y : {0u, 5u, 11u}) {
    Tensor x({3, n, n});
    for (std::size_t c = 0; c < 3; ++c) x.at(c, y, 4) = 1.0;
    const long lo = std::max(0L, long(y) - 2), hi = std::min(long(n) - 1, long(y) + 2);
    const double covered = double(hi - lo + 1) * 5.0;
    EXPECT_DOUBLE_EQ(ccl_loss(x, Tensor({3, n, n}), {5}), covered / double(n * n));
  }
}

TEST_F(ChannelPriorsTest, CclGradientRoutesToSelectedPixels) {
  // Strictly distinct values keep argmax selections stable under the probe step.
  Tensor x({3, 8, 8});
  std::vector<double> vals(x.numel());
  for (std::size_t i = 0; i < vals.size(); ++i) vals[i] = double(i) / double(vals.size());
  std::shuffle(vals.begin(), vals.end(), rng);
  for (std::size_t i = 0; i < vals.size(); ++i) x[i] = vals[i];
  const Tensor clean = random_tensor({3, 8, 8}, rng, 0.0, 1.0);
  for (auto norm : {LossNorm::kL1, LossNorm::kL2}) {
    const auto r = desnow::testing::check_unary(
        [&](const Var& v) {
          Tape& t = v.tape();
          return ccl_loss(v, t.constant(clean), {3}, norm);
        },
        x, 30, rng, 1e-7);
    EXPECT_LE(r.max_rel, 1e-5);
  }
  const auto cc = desnow::testing::check_unary([](const Var& v) { return contradict_channel(v, {5}); }, x, 30, rng, 1e-7);
  EXPECT_LE(cc.max_rel, 1e-6);
}

TEST_F(ChannelPriorsTest, ContrastReportMatchesMaps) {
  const Tensor snowy = random_tensor({3, 16, 16}, rng, 0.5, 1.0);
  const Tensor clean = random_tensor({3, 16, 16}, rng, 0.0, 0.5);
  const ContrastReport r = channel_contrast_report(snowy, clean, {5});
  const auto mean = [](const Tensor& t) { return sum(t) / double(t.numel()); };
  EXPECT_DOUBLE_EQ(r.snowy.contradict, mean(oracle(snowy, PriorKind::kContradict, 5)));
  EXPECT_DOUBLE_EQ(r.clean.dark, mean(oracle(clean, PriorKind::kDark, 5)));
  EXPECT_DOUBLE_EQ(r.clean.bright, mean(oracle(clean, PriorKind::kBright, 5)));
  EXPECT_GT(r.snowy.contradict, r.clean.contradict);
}
