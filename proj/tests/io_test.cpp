#include <gtest/gtest.h>

#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

#include "desnow/error.hpp"
#include "desnow/image_io.hpp"
#include "desnow/network.hpp"
#include "desnow/run_config.hpp"
#include "desnow/weights_io.hpp"
#include "support/oracles.hpp"
#include "support/temp_dir.hpp"

using namespace desnow;
using namespace desnow::io;
using desnow::testing::random_tensor;

class ImageIoTest : public ::testing::Test {
 protected:
  desnow::testing::TempDir dir;
  std::mt19937_64 rng{59};
};

TEST_F(ImageIoTest, QuantizeRoundsHalfToEvenAndClamps) {
  EXPECT_EQ(quantize(0.0), 0);
  EXPECT_EQ(quantize(1.0), 255);
  EXPECT_EQ(quantize(-0.3), 0);
  EXPECT_EQ(quantize(1.7), 255);
  EXPECT_EQ(quantize(0.5 / 255.0), 0);
  EXPECT_EQ(quantize(1.5 / 255.0), 2);
  EXPECT_EQ(quantize(2.5 / 255.0), 2);
  EXPECT_EQ(quantize(2.6 / 255.0), 3);
}

TEST_F(ImageIoTest, PngRoundTripOfQuantizedValues) {
  Tensor img({3, 7, 5});
  for (double& v : img.data()) v = double(desnow::testing::random_int(rng, 0, 255)) / 255.0;
  write_png(dir / "x.png", img);
  EXPECT_EQ(read_png(dir / "x.png"), img);
}

TEST_F(ImageIoTest, PngQuantizationErrorBounded) {
  const Tensor img = random_tensor({3, 6, 6}, rng, 0.0, 1.0);
  write_png(dir / "x.png", img);
  EXPECT_LE(max_abs_diff(read_png(dir / "x.png"), img), 0.5 / 255.0 + 1e-12);
}

TEST_F(ImageIoTest, GrayscaleReplicated) {
  Tensor g({1, 4, 4});
  for (double& v : g.data()) v = double(desnow::testing::random_int(rng, 0, 255)) / 255.0;
  write_png(dir / "g.png", g);
  const Tensor rgb = read_png(dir / "g.png");
  ASSERT_EQ(rgb.shape(), (Shape{3, 4, 4}));
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < 16; ++i) EXPECT_EQ(rgb[c * 16 + i], g[i]);
}

TEST_F(ImageIoTest, BadFilesReported) {
  EXPECT_THROW(read_png(dir / "missing.png"), DataError);
  std::ofstream(dir / "junk.png") << "not a png";
  EXPECT_THROW(read_png(dir / "junk.png"), DataError);
  EXPECT_THROW(write_png(dir / "two.png", Tensor({2, 4, 4})), ShapeError);
}

TEST_F(ImageIoTest, ReflectPadMirrorsWithoutRepeatingEdge) {
  Tensor img({1, 2, 3});
  for (std::size_t i = 0; i < 6; ++i) img[i] = double(i);
  const Padded p = reflect_pad(img, 4);
  ASSERT_EQ(p.image.shape(), (Shape{1, 4, 4}));
  EXPECT_TRUE(p.changed());
  EXPECT_EQ(p.height, 2u);
  EXPECT_EQ(p.width, 3u);
  // Row 0: 0 1 2 | 1 ; row 1: 3 4 5 | 4 ; rows 2,3 mirror rows 0 and... clipped reflection.
  EXPECT_EQ(p.image.at(0, 0, 3), 1.0);
  EXPECT_EQ(p.image.at(0, 1, 3), 4.0);
  EXPECT_EQ(p.image.at(0, 2, 0), 0.0);
  EXPECT_EQ(crop(p.image, 2, 3), img);
  EXPECT_FALSE(reflect_pad(Tensor({3, 8, 4}), 4).changed());
}

class WeightsIoTest : public ::testing::Test {
 protected:
  desnow::testing::TempDir dir;
  std::mt19937_64 rng{61};
};

TEST_F(WeightsIoTest, TensorsRoundTripBitwise) {
  std::vector<NamedTensor> ts{{"a", random_tensor({2, 3}, rng)},
                              {"b.c", Tensor({1}, -0.0)},
                              {"tiny", Tensor({1}, 4.9e-324)},
                              {"big", random_tensor({2, 2, 3, 3}, rng, -1e300, 1e300)}};
  std::stringstream ss;
  write_tensors(ss, ts);
  const auto back = read_tensors(ss);
  ASSERT_EQ(back.size(), ts.size());
  for (std::size_t i = 0; i < ts.size(); ++i) {
    EXPECT_EQ(back[i].name, ts[i].name);
    EXPECT_EQ(back[i].value.shape(), ts[i].value.shape());
    EXPECT_EQ(std::memcmp(back[i].value.data().data(), ts[i].value.data().data(), ts[i].value.numel() * 8), 0);
  }
}

TEST_F(WeightsIoTest, LittleEndianHeader) {
  std::stringstream ss;
  write_tensors(ss, {{"x", Tensor({1}, 1.0)}});
  const std::string bytes = ss.str();
  EXPECT_EQ(bytes.substr(0, 4), "WDSN");
  EXPECT_EQ(bytes[4], char(1));
  EXPECT_EQ(bytes[8], char(1));
  // 1.0 as little-endian IEEE-754 ends with 0xF0 0x3F.
  EXPECT_EQ(static_cast<unsigned char>(bytes[bytes.size() - 1]), 0x3F);
  EXPECT_EQ(static_cast<unsigned char>(bytes[bytes.size() - 2]), 0xF0);
}

TEST_F(WeightsIoTest, CorruptInputRejected) {
  std::stringstream bad("XXXX\1\0\0\0");
  EXPECT_THROW(read_tensors(bad), DataError);
  std::stringstream ss;
  write_tensors(ss, {{"x", random_tensor({4, 4}, rng)}});
  std::stringstream truncated(ss.str().substr(0, ss.str().size() - 5));
  EXPECT_THROW(read_tensors(truncated), DataError);
  EXPECT_THROW(load_tensors(dir / "none.wdsn"), DataError);
}

TEST_F(WeightsIoTest, ModelRoundTrip) {
  const net::NetConfig c{8, 2, 3, 3, 2};
  const net::ModelWeights w = net::init_weights(c, 3);
  save_model(dir / "m.wdsn", w);
  const net::ModelWeights back = load_model(dir / "m.wdsn");
  EXPECT_EQ(back.config(), c);
  ASSERT_EQ(back.params().size(), w.params().size());
  for (std::size_t i = 0; i < w.params().size(); ++i) {
    EXPECT_EQ(back.params()[i].name, w.params()[i].name);
    EXPECT_EQ(back.params()[i].value, w.params()[i].value);
  }
}

TEST_F(WeightsIoTest, ModelFileMissingParameterRejected) {
  const net::ModelWeights w = net::init_weights({8, 2, 3, 3, 2}, 3);
  save_model(dir / "m.wdsn", w);
  auto ts = load_tensors(dir / "m.wdsn");
  ts.pop_back();
  save_tensors(dir / "short.wdsn", ts);
  EXPECT_THROW(load_model(dir / "short.wdsn"), DataError);
}

class RunConfigTest : public ::testing::Test {};

TEST_F(RunConfigTest, PresetsDifferWhereExpected) {
  const auto paper = config::paper_preset(), desk = config::desk_preset();
  EXPECT_EQ(paper.net, net::NetConfig{});
  EXPECT_EQ(paper.train, train::TrainConfig{});
  EXPECT_EQ(desk.net.channels(), 8);
  EXPECT_EQ(desk.train.batch_size, 4);
  EXPECT_EQ(desk.train.crop_size, 32);
  EXPECT_NO_THROW(paper.validate());
  EXPECT_NO_THROW(desk.validate());
  EXPECT_EQ(config::preset("desk"), desk);
  EXPECT_THROW(config::preset("huge"), ConfigError);
}

TEST_F(RunConfigTest, JsonRoundTrip) {
  auto c = config::desk_preset();
  c.train.seed = 77;
  c.snow.streak_angle = {-10.0, 20.0};
  c.train.ccl_norm = priors::LossNorm::kL2;
  EXPECT_EQ(config::apply_json(config::paper_preset(), config::to_json(c)), c);
}

TEST_F(RunConfigTest, PartialOverlay) {
  const auto c = config::apply_json(config::paper_preset(), nlohmann::json::parse(R"({"net": {"toy_scale_factor": 4}})"));
  EXPECT_EQ(c.net.channels(), 16);
  EXPECT_EQ(c.train, train::TrainConfig{});
}

TEST_F(RunConfigTest, AllErrorsReportedTogether) {
  const auto doc = nlohmann::json::parse(R"({"net": {"bogus": 1, "conv_kernel": "five"}, "extra": {}})");
  try {
    config::apply_json(config::paper_preset(), doc);
    FAIL();
  } catch (const ConfigError& e) {
    const std::string m = e.what();
    EXPECT_NE(m.find("bogus"), std::string::npos) << m;
    EXPECT_NE(m.find("conv_kernel"), std::string::npos) << m;
    EXPECT_NE(m.find("extra"), std::string::npos) << m;
  }
}

TEST_F(RunConfigTest, InvalidValuesRejected) {
  // Structurally fine documents can still describe an invalid run.
  const auto odd = config::apply_json(config::paper_preset(), nlohmann::json::parse(R"({"net": {"toy_scale_factor": 3}})"));
  EXPECT_THROW(odd.validate(), ConfigError);
  EXPECT_THROW(config::apply_json(config::paper_preset(), nlohmann::json::parse(R"({"train": {"ccl_norm": "l3"}})")),
               ConfigError);
}
