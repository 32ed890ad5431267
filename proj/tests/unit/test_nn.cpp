#include <gtest/gtest.h>

#include <cmath>

#include "madgan/errors.hpp"
#include "madgan/nn.hpp"

namespace madgan::nn {
namespace {

TEST(Init, SameSeedSameTensor) {
  Rng a(17), b(17);
  EXPECT_EQ(init_params({128, 128}, {}, a), init_params({128, 128}, {}, b));
  Rng c(17), d(17);
  const InitSpec g{InitScheme::kGaussian, 0.05};
  EXPECT_EQ(init_params({10, 3}, g, c), init_params({10, 3}, g, d));
}

TEST(Init, UniformFanInBounds) {
  Rng rng(1);
  const Tensor w = init_params({128, 128}, {}, rng);
  const double bound = 1.0 / std::sqrt(128.0);
  for (double v : w.values()) {
    EXPECT_GE(v, -bound);
    EXPECT_LE(v, bound);
  }
}

TEST(Init, MonteCarloMeanWithinThreeSigma) {
  Rng rng(2);
  const std::size_t n = 100000;
  const Tensor w = init_params({n, 1}, {}, rng);
  double mean = 0.0;
  for (double v : w.values()) mean += v;
  mean /= static_cast<double>(n);
  const double sigma = 1.0 / std::sqrt(3.0);  // U(-1, 1) for fan_in = 1
  EXPECT_LT(std::abs(mean), 3.0 * sigma / std::sqrt(static_cast<double>(n)));

  Rng rng2(3);
  const Tensor g = init_params({n}, {InitScheme::kGaussian, 0.5}, rng2);
  double gm = 0.0;
  for (double v : g.values()) gm += v;
  gm /= static_cast<double>(n);
  EXPECT_LT(std::abs(gm), 3.0 * 0.5 / std::sqrt(static_cast<double>(n)));
}

TEST(Linear, BiasesStartAtZero) {
  Rng rng(4);
  ParameterRegistry reg;
  const auto layer = LinearLayer::create(reg, "fc", 3, 5, {}, rng);
  EXPECT_EQ(layer.bias()->value(), Tensor({5}));
  EXPECT_TRUE(reg.contains("fc.weight"));
  EXPECT_TRUE(reg.contains("fc.bias"));
  EXPECT_THROW(LinearLayer::create(reg, "fc", 3, 5, {}, rng), ContractError);
}

TEST(Linear, ForwardIsAffine) {
  ParameterRegistry reg;
  auto w = reg.create("w", Tensor::matrix({{1, 2}, {3, 4}}));
  auto b = reg.create("b", Tensor({2}, std::vector<double>{0.5, -1}));
  const LinearLayer layer(w, b);
  ad::Tape t;
  const auto y = layer.forward(t, t.constant(Tensor::matrix({{1, 1}})));
  EXPECT_EQ(y.value(), Tensor::matrix({{4.5, 5}}));
}

TEST(Linear, SharedIdReferencesSameParameters) {
  Rng rng(5);
  ParameterRegistry reg;
  const auto a = LinearLayer::shared(reg, "trunk", 4, 3, {}, rng);
  const auto b = LinearLayer::shared(reg, "trunk", 4, 3, {}, rng);
  EXPECT_EQ(a.weight().get(), b.weight().get());
  EXPECT_EQ(a.bias().get(), b.bias().get());
  EXPECT_EQ(reg.all().size(), 2u);
  EXPECT_THROW(LinearLayer::shared(reg, "trunk", 4, 2, {}, rng), DimensionError);
}

TEST(Linear, MutateOneObserveAllAfterOptimizerStep) {
  Rng rng(6);
  ParameterRegistry reg;
  const auto a = LinearLayer::shared(reg, "trunk", 2, 2, {}, rng);
  const auto b = LinearLayer::shared(reg, "trunk", 2, 2, {}, rng);
  Adam opt(reg.all(), {});
  ad::Tape t;
  const auto grads = t.backward(ad::sum(a.forward(t, t.constant(Tensor::matrix({{1, -1}})))));
  const Tensor before = b.weight()->value();
  opt.step(grads);
  EXPECT_NE(b.weight()->value(), before);
  EXPECT_EQ(a.weight()->value(), b.weight()->value());
}

TEST(Adam, SingleStepHandValue) {
  std::vector<double> p{0.0};
  const std::vector<double> g{1.0};
  AdamMoments m{Tensor({1}), Tensor({1})};
  adam_step(p, g, m, 1, {1e-3, 0.9, 0.999, 1e-8});
  // m_hat = v_hat = 1, so the step is lr / (1 + eps).
  EXPECT_NEAR(p[0], -1e-3 / (1.0 + 1e-8), 1e-18);
  EXPECT_NEAR(p[0], -9.99999995e-4, 1e-11);
  EXPECT_NEAR(m.first[0], 0.1, 1e-16);
  EXPECT_NEAR(m.second[0], 1e-3, 1e-18);
}

TEST(Adam, ZeroGradientFreshStateDoesNotMove) {
  std::vector<double> p{1.5, -2.0};
  const std::vector<double> g{0.0, 0.0};
  AdamMoments m{Tensor({2}), Tensor({2})};
  adam_step(p, g, m, 1, {});
  EXPECT_EQ(p, (std::vector<double>{1.5, -2.0}));
}

TEST(Adam, MomentumDecaysAfterGradientStops) {
  std::vector<double> p{0.0};
  AdamMoments m{Tensor({1}), Tensor({1})};
  const AdamOptions opt{1e-3, 0.9, 0.999, 1e-8};
  adam_step(p, std::vector<double>{1.0}, m, 1, opt);
  const double m1 = m.first[0];
  double prev_delta = 1e-3;
  for (std::uint64_t t = 2; t <= 3; ++t) {
    const double before = p[0];
    adam_step(p, std::vector<double>{0.0}, m, t, opt);
    const double delta = std::abs(p[0] - before);
    EXPECT_GT(delta, 0.0);
    EXPECT_LT(delta, prev_delta);
    prev_delta = delta;
  }
  EXPECT_NEAR(m.first[0], m1 * 0.9 * 0.9, 1e-16);
  // Recurrence: step t moves by lr * (m_t / (1 - b1^t)) / (sqrt(v_t / (1 - b2^t)) + eps).
  const double v3 = 1e-3 * 0.999 * 0.999;
  const double expected = 1e-3 * (0.081 / (1 - std::pow(0.9, 3))) / (std::sqrt(v3 / (1 - std::pow(0.999, 3))) + 1e-8);
  EXPECT_NEAR(prev_delta, expected, 1e-15);
}

TEST(Adam, StepCounterAndShapeChecks) {
  ParameterRegistry reg;
  auto w = reg.create("w", Tensor({2, 2}));
  Adam opt(reg.all(), {});
  EXPECT_EQ(opt.steps(), 0u);
  EXPECT_EQ(opt.moments("w").first, Tensor({2, 2}));
  ad::GradientMap g;
  g.accumulate(*w, Tensor({2, 2}, 1.0));
  opt.step(g);
  opt.step(g);
  EXPECT_EQ(opt.steps(), 2u);

  std::vector<double> p{0.0, 0.0};
  AdamMoments m{Tensor({2}), Tensor({2})};
  EXPECT_THROW(adam_step(p, std::vector<double>{1.0}, m, 1, {}), ContractError);
  EXPECT_THROW(opt.moments("missing"), ContractError);
}

TEST(Adam, SignFlipWithNegatedParametersMirrors) {
  Rng rng(8);
  std::vector<double> p(6), q(6);
  for (std::size_t i = 0; i < 6; ++i) {
    p[i] = rng.uniform(-1, 1);
    q[i] = -p[i];
  }
  AdamMoments mp{Tensor({6}), Tensor({6})}, mq{Tensor({6}), Tensor({6})};
  for (std::uint64_t t = 1; t <= 20; ++t) {
    std::vector<double> g(6), ng(6);
    for (std::size_t i = 0; i < 6; ++i) {
      g[i] = 2.0 * p[i] + std::sin(static_cast<double>(t + i));
      ng[i] = -g[i];
    }
    adam_step(p, g, mp, t, {});
    adam_step(q, ng, mq, t, {});
  }
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(q[i], -p[i]);
}

TEST(Adam, SnapshotRestoreRoundTrip) {
  ParameterRegistry reg;
  auto w = reg.create("w", Tensor({3}, 0.2));
  Adam a(reg.all(), {});
  ad::GradientMap g;
  g.accumulate(*w, Tensor({3}, std::vector<double>{1, -2, 3}));
  a.step(g);
  Adam b(reg.all(), {});
  b.restore(a.steps(), a.snapshot());
  const Tensor saved = w->value();
  a.step(g);
  const Tensor after_a = w->value();
  w->value() = saved;
  b.step(g);
  EXPECT_EQ(w->value(), after_a);
}

}  // namespace
}  // namespace madgan::nn
