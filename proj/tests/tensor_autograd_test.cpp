#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "desnow/autograd.hpp"
#include "desnow/error.hpp"
#include "desnow/ops.hpp"
#include "desnow/optim.hpp"
#include "support/oracles.hpp"

using namespace desnow;
using desnow::testing::check_unary;
using desnow::testing::direct_conv2d;
using desnow::testing::random_tensor;

class OpsTest : public ::testing::Test {
 protected:
  std::mt19937_64 rng{42};
};

TEST_F(OpsTest, TensorRejectsBadShapes) {
  EXPECT_THROW(Tensor(Shape{}), ShapeError);
  EXPECT_THROW(Tensor(Shape{2, 0}), ShapeError);
  EXPECT_THROW(Tensor(Shape{2, 2}, std::vector<double>(3)), ShapeError);
}

TEST_F(OpsTest, MismatchMessageNamesBothShapes) {
  try {
    require_same_shape(Tensor({2, 3}), Tensor({3, 2}), "probe");
    FAIL();
  } catch (const ShapeError& e) {
    const std::string m = e.what();
    EXPECT_NE(m.find("2x3"), std::string::npos) << m;
    EXPECT_NE(m.find("3x2"), std::string::npos) << m;
  }
}

TEST_F(OpsTest, ConvOneByOneIdentity) {
  Tape t;
  const Tensor x = random_tensor({1, 5, 4}, rng);
  const Var y = ops::conv2d(t.constant(x), t.constant(Tensor({1, 1, 1, 1}, 1.0)), t.constant(Tensor({1}, 0.0)));
  EXPECT_EQ(y.value(), x);
}

TEST_F(OpsTest, ConvZeroWeightGivesBias) {
  const Tensor y = ops::conv2d(random_tensor({2, 6, 6}, rng), Tensor({3, 2, 3, 3}), Tensor({3}, 0.5), 1, 1);
  for (double v : y.data()) EXPECT_EQ(v, 0.5);
}

TEST_F(OpsTest, ConvMatchesDirectLoops) {
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t C = 1 + trial % 4, O = 1 + trial % 3;
    const int K = 1 + 2 * (trial % 3), stride = 1 + trial % 2, pad = trial % 3;
    const std::size_t H = 5 + trial % 4, W = 8 - trial % 3;
    if (H + 2 * pad < std::size_t(K) || W + 2 * pad < std::size_t(K)) continue;
    const Tensor x = random_tensor({C, H, W}, rng), w = random_tensor({O, C, std::size_t(K), std::size_t(K)}, rng),
                 b = random_tensor({O}, rng);
    const Tensor got = ops::conv2d(x, w, b, stride, pad);
    const Tensor want = direct_conv2d(x, w, b, stride, pad);
    ASSERT_EQ(got.shape(), want.shape());
    EXPECT_LE(max_abs_diff(got, want), 1e-12);
  }
}

TEST_F(OpsTest, ConvRejectsChannelMismatch) {
  EXPECT_THROW(ops::conv2d(Tensor({2, 4, 4}), Tensor({1, 3, 3, 3}), Tensor({1}), 1, 1), ShapeError);
  EXPECT_THROW(ops::conv2d(Tensor({1, 2, 2}), Tensor({1, 1, 5, 5}), Tensor({1}), 1, 0), ShapeError);
}

TEST_F(OpsTest, ConvGradientsAllArguments) {
  const Tensor x = random_tensor({2, 6, 5}, rng), w = random_tensor({3, 2, 3, 3}, rng), b = random_tensor({3}, rng);
  for (int stride : {1, 2}) {
    auto gx = check_unary([&](const Var& v) {
      Tape& t = v.tape();
      return ops::conv2d(v, t.constant(w), t.constant(b), stride, 1);
    }, x, 20, rng);
    EXPECT_LE(gx.max_rel, 1e-6);
    auto gw = check_unary([&](const Var& v) {
      Tape& t = v.tape();
      return ops::conv2d(t.constant(x), v, t.constant(b), stride, 1);
    }, w, 20, rng);
    EXPECT_LE(gw.max_rel, 1e-6);
    auto gb = check_unary([&](const Var& v) {
      Tape& t = v.tape();
      return ops::conv2d(t.constant(x), t.constant(w), v, stride, 1);
    }, b, 20, rng);
    EXPECT_LE(gb.max_rel, 1e-6);
  }
}

TEST_F(OpsTest, ReluValuesAndGradient) {
  Tape t;
  const Var x = t.leaf(Tensor({3}, {-1.0, 0.0, 2.0}));
  const Var y = ops::relu(x);
  EXPECT_EQ(y.value(), Tensor({3}, {0.0, 0.0, 2.0}));
  t.backward(ops::sum(y));
  EXPECT_EQ(t.grad(x), Tensor({3}, {0.0, 0.0, 1.0}));
  const Tensor pos = random_tensor({4, 4}, rng, 0.0, 1.0);
  Tape t2;
  EXPECT_EQ(ops::relu(t2.constant(pos)).value(), pos);
}

TEST_F(OpsTest, SoftmaxClosedForms) {
  Tape t;
  const Var a = ops::softmax(t.constant(Tensor({4}, 7.0)), 0);
  for (double v : a.value().data()) EXPECT_DOUBLE_EQ(v, 0.25);
  const Var b = ops::softmax(t.constant(Tensor({2}, {0.0, std::log(3.0)})), 0);
  EXPECT_NEAR(b.value()[0], 0.25, 1e-15);
  EXPECT_NEAR(b.value()[1], 0.75, 1e-15);
}

TEST_F(OpsTest, SoftmaxIsProbabilityVectorForLargeInputs) {
  for (int trial = 0; trial < 20; ++trial) {
    Tape t;
    const Var s = ops::softmax(t.constant(random_tensor({3, 6}, rng, -1e3, 1e3)), 1);
    for (std::size_t r = 0; r < 3; ++r) {
      double sum = 0.0;
      for (std::size_t i = 0; i < 6; ++i) {
        const double v = s.value()[r * 6 + i];
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
        sum += v;
      }
      EXPECT_NEAR(sum, 1.0, 1e-12);
    }
  }
  Tape t;
  const Var s = ops::softmax(t.constant(random_tensor({5}, rng, -3, 3)), 0);
  for (double v : s.value().data()) {
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
}

TEST_F(OpsTest, GlobalAvgPool) {
  Tape t;
  EXPECT_EQ(ops::global_avg_pool(t.constant(Tensor({1, 2, 2}, {1, 2, 3, 4}))).value(), Tensor({1}, 2.5));
  const Var c = ops::global_avg_pool(t.constant(Tensor({3, 4, 5}, 0.3)));
  for (double v : c.value().data()) EXPECT_NEAR(v, 0.3, 1e-15);
  const Tensor x = random_tensor({2, 3, 4}, rng);
  const Var m = ops::global_avg_pool(t.constant(x));
  double total = 0.0;
  for (double v : x.data()) total += v;
  EXPECT_NEAR((m.value()[0] + m.value()[1]) * 12.0, total, 1e-12);
}

TEST_F(OpsTest, ElementwiseIdentities) {
  Tape t;
  const Tensor x = random_tensor({3, 4}, rng);
  EXPECT_EQ(ops::add(t.constant(x), t.constant(Tensor({3, 4}))).value(), x);
  EXPECT_EQ(ops::scale(t.constant(x), 0.0).value(), Tensor({3, 4}));
  EXPECT_THROW(ops::add(t.constant(x), t.constant(Tensor({4, 3}))), ShapeError);
  EXPECT_THROW(ops::mul(t.constant(x), t.constant(Tensor({12}))), ShapeError);
}

TEST_F(OpsTest, MulGradientIsOtherFactor) {
  const Tensor a = random_tensor({4, 3}, rng), b = random_tensor({4, 3}, rng);
  Tape t;
  const Var va = t.leaf(a);
  t.backward(ops::sum(ops::mul(va, t.constant(b))));
  EXPECT_EQ(t.grad(va), b);
  const auto r = check_unary([&](const Var& v) { return ops::mul(v, v.tape().constant(b)); }, a, 20, rng);
  EXPECT_LE(r.max_rel, 1e-6);
}

TEST_F(OpsTest, ConcatAndSliceRoundTrip) {
  Tape t;
  const Tensor a = random_tensor({2, 3, 3}, rng), b = random_tensor({3, 3, 3}, rng);
  const std::vector<Var> parts{t.constant(a), t.constant(b)};
  const Var c = ops::concat(parts, 0);
  EXPECT_EQ(c.shape(), (Shape{5, 3, 3}));
  EXPECT_EQ(ops::slice(c, 0, 0, 2).value(), a);
  EXPECT_EQ(ops::slice(c, 0, 2, 3).value(), b);
  const std::vector<Var> one{t.constant(a)};
  EXPECT_EQ(ops::concat(one, 1).value(), a);
  const std::vector<Var> bad{t.constant(a), t.constant(Tensor({2, 4, 3}))};
  EXPECT_THROW(ops::concat(bad, 0), ShapeError);
}

TEST_F(OpsTest, L1LossValues) {
  Tape t;
  const Tensor x = random_tensor({2, 5}, rng);
  EXPECT_EQ(ops::l1_loss(t.constant(x), t.constant(x)).value().item(), 0.0);
  Tensor shifted = x;
  for (double& v : shifted.data()) v += 0.5;
  EXPECT_NEAR(ops::l1_loss(t.constant(shifted), t.constant(x)).value().item(), 0.5, 1e-15);
  const Tensor y = random_tensor({2, 5}, rng);
  double s = 0.0;
  for (std::size_t i = 0; i < 10; ++i) s += std::abs(x[i] - y[i]);
  EXPECT_NEAR(ops::l1_loss(t.constant(x), t.constant(y)).value().item(), s / 10.0, 1e-12);
  EXPECT_THROW(ops::l1_loss(t.constant(x), t.constant(Tensor({10}))), ShapeError);
}

TEST_F(OpsTest, BackwardBasics) {
  Parameter p("p", Tensor({2, 2}, 3.0));
  {
    Tape t;
    t.backward(ops::sum(t.parameter(p)));
  }
  EXPECT_EQ(p.grad, Tensor({2, 2}, 1.0));
  p.zero_grad();
  {
    Tape t;
    const Var v = t.parameter(p);
    t.backward(ops::sum(ops::mul(v, v)));
  }
  EXPECT_EQ(p.grad, Tensor({2, 2}, 6.0));
  {
    Tape t;
    const Var v = t.parameter(p);
    t.backward(ops::sum(ops::mul(v, v)));
  }
  EXPECT_EQ(p.grad, Tensor({2, 2}, 12.0)) << "gradients accumulate across backward calls";
  Tape t;
  EXPECT_THROW(t.backward(t.leaf(Tensor({2}))), ShapeError);
}

TEST_F(OpsTest, BackwardVisitsReverseOrder) {
  Tape t;
  std::vector<int> order;
  const Var x = t.leaf(Tensor({1}, 1.0));
  Var y = x;
  for (int k = 0; k < 4; ++k)
    y = t.record(y.value(), {y}, [k, &order](BackwardContext& ctx) {
      order.push_back(k);
      if (Tensor* g = ctx.input_grad(0)) *g += ctx.grad_output();
    });
  t.backward(y);
  EXPECT_EQ(order, (std::vector<int>{3, 2, 1, 0}));
}

TEST_F(OpsTest, FiniteDifferencesForEveryOp) {
  const Tensor a = random_tensor({2, 4, 5}, rng), b = random_tensor({2, 4, 5}, rng);
  const std::vector<std::pair<const char*, std::function<Var(const Var&)>>> cases{
      {"relu", [](const Var& v) { return ops::relu(v); }},
      {"softmax0", [](const Var& v) { return ops::softmax(v, 0); }},
      {"softmax2", [](const Var& v) { return ops::softmax(v, 2); }},
      {"gap", [](const Var& v) { return ops::global_avg_pool(v); }},
      {"add", [&](const Var& v) { return ops::add(v, v.tape().constant(b)); }},
      {"sub", [&](const Var& v) { return ops::sub(v.tape().constant(b), v); }},
      {"mul", [&](const Var& v) { return ops::mul(v, v.tape().constant(b)); }},
      {"scale", [](const Var& v) { return ops::scale(v, -1.7); }},
      {"add_scalar", [](const Var& v) { return ops::add_scalar(v, 0.3); }},
      {"concat", [&](const Var& v) {
         const std::vector<Var> p{v, v.tape().constant(b), v};
         return ops::concat(p, 1);
       }},
      {"slice", [](const Var& v) { return ops::slice(v, 2, 1, 3); }},
      {"reshape", [](const Var& v) { return ops::reshape(v, {8, 5}); }},
      {"clamp", [](const Var& v) { return ops::clamp(v, -0.5, 0.5); }},
      {"sum", [](const Var& v) { return ops::sum(v); }},
      {"mean", [](const Var& v) { return ops::mean(v); }},
      {"l1", [&](const Var& v) { return ops::l1_loss(v, v.tape().constant(b)); }},
      {"mse", [&](const Var& v) { return ops::mse_loss(v, v.tape().constant(b)); }},
  };
  for (const auto& [name, f] : cases) {
    const auto r = check_unary(f, a, 20, rng);
    EXPECT_LE(r.max_rel, 1e-6) << name;
    EXPECT_EQ(r.probes, 20);
  }
}

TEST_F(OpsTest, WeightedSumGradients) {
  const std::vector<Tensor> ts{random_tensor({2, 3}, rng), random_tensor({2, 3}, rng), random_tensor({2, 3}, rng)};
  const Tensor w = random_tensor({3}, rng);
  const auto over_weights = check_unary([&](const Var& v) {
    std::vector<Var> xs;
    for (const auto& t : ts) xs.push_back(v.tape().constant(t));
    return ops::weighted_sum(xs, v);
  }, w, 20, rng);
  EXPECT_LE(over_weights.max_rel, 1e-6);
  const auto over_tensor = check_unary([&](const Var& v) {
    const std::vector<Var> xs{v.tape().constant(ts[0]), v, v.tape().constant(ts[2])};
    return ops::weighted_sum(xs, v.tape().constant(w));
  }, ts[1], 20, rng);
  EXPECT_LE(over_tensor.max_rel, 1e-6);
}

TEST_F(OpsTest, OpsAreDeterministic) {
  const Tensor x = random_tensor({3, 9, 9}, rng), w = random_tensor({4, 3, 5, 5}, rng), b = random_tensor({4}, rng);
  EXPECT_EQ(ops::conv2d(x, w, b, 1, 2), ops::conv2d(x, w, b, 1, 2));
}

class AdamTest : public ::testing::Test {};

TEST_F(AdamTest, ZeroGradientLeavesParameters) {
  std::vector<Parameter> ps{Parameter("a", Tensor({3}, {1, 2, 3}))};
  Adam adam;
  adam.step(ps, 0.1);
  EXPECT_EQ(ps[0].value, Tensor({3}, {1, 2, 3}));
}

TEST_F(AdamTest, FirstStepMovesByLearningRate) {
  std::vector<Parameter> ps{Parameter("a", Tensor({2}, {1.0, 1.0}))};
  ps[0].grad = Tensor({2}, {0.3, -2.0});
  Adam adam;
  adam.step(ps, 0.01);
  // m_hat = g, v_hat = g^2 at t=1, so the step is lr * g / (|g| + eps)
  EXPECT_NEAR(ps[0].value[0], 1.0 - 0.01 * 0.3 / (0.3 + 1e-8), 1e-15);
  EXPECT_NEAR(ps[0].value[1], 1.0 + 0.01 * 2.0 / (2.0 + 1e-8), 1e-15);
}

TEST_F(AdamTest, DecreasesQuadratic) {
  std::vector<Parameter> ps{Parameter("a", Tensor({2}, {2.0, -1.0}))};
  const auto loss = [&] { return ps[0].value[0] * ps[0].value[0] + ps[0].value[1] * ps[0].value[1]; };
  Adam adam;
  double prev = loss();
  for (int k = 0; k < 2; ++k) {
    ps[0].grad = ps[0].value * 2.0;
    adam.step(ps, 0.05);
    EXPECT_LT(loss(), prev);
    prev = loss();
  }
}

TEST_F(AdamTest, MissingGradientRejected) {
  std::vector<Parameter> ps{Parameter("a", Tensor({2}))};
  ps[0].grad = Tensor();
  Adam adam;
  EXPECT_THROW(adam.step(ps, 0.1), ShapeError);
}

TEST_F(AdamTest, ZeroLearningRateIsNoOp) {
  std::vector<Parameter> ps{Parameter("a", Tensor({2}, {0.5, -0.25}))};
  Adam adam;
  for (int k = 0; k < 5; ++k) {
    ps[0].grad = Tensor({2}, {1.0, -3.0});
    adam.step(ps, 0.0);
  }
  EXPECT_EQ(ps[0].value, Tensor({2}, {0.5, -0.25}));
}
