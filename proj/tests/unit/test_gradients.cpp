#include <gtest/gtest.h>

#include <cmath>

#include "catalogue.hpp"
#include "gradcheck.hpp"
#include "madgan/nn.hpp"

namespace madgan::testing {
namespace {

void expect_all_pass(const std::vector<CaseResult>& cases) {
  std::size_t checked = 0, skipped = 0;
  for (const auto& c : cases) {
    EXPECT_TRUE(c.result.ok()) << c.name << " seed " << c.seed << ": " << c.result.failures << " failures, worst "
                               << c.result.worst << " (rel " << c.result.max_rel_err << ")";
    checked += c.result.checked;
    skipped += c.result.skipped;
  }
  EXPECT_GT(checked, 0u);
  EXPECT_LT(skipped * 20, checked) << "too many coordinates skipped as kinks";
}

TEST(GradientCatalogue, EveryOpMatchesFiniteDifferences) {
  const auto cases = run_op_catalogue(4, 42, GradCheckOptions{});
  EXPECT_GE(cases.size(), 100u);
  expect_all_pass(cases);
}

TEST(GradientCatalogue, ModelLossesMatchFiniteDifferences) {
  expect_all_pass(run_model_loss_catalogue(3, 7, GradCheckOptions{}));
}

TEST(GradientCatalogue, TwoLayerMlp) {
  Rng rng(9);
  nn::ParameterRegistry reg;
  const auto l1 = nn::LinearLayer::create(reg, "l1", 3, 6, {}, rng);
  const auto l2 = nn::LinearLayer::create(reg, "l2", 6, 2, {}, rng);
  for (const auto& p : reg.all()) {
    for (double& v : p->value().data()) v = rng.uniform(-1.0, 1.0);
  }
  const Tensor x = random_tensor({5, 3}, rng);
  auto build = [&](ad::Tape& t) {
    const ad::Var h = ad::tanh(l1.forward(t, t.constant(x)));
    return ad::mean(ad::mul(l2.forward(t, h), l2.forward(t, h)));
  };
  GradCheckOptions opt;
  opt.max_coords = 100;
  const auto r = check_params("mlp", build, reg.all(), opt, rng);
  EXPECT_TRUE(r.ok()) << r.worst;
  EXPECT_EQ(r.checked, 3u * 6 + 6 + 6 * 2 + 2);
}

TEST(GradCheck, DetectsAWrongGradient) {
  Rng rng(1);
  std::vector<double> x{0.3, -0.7};
  std::vector<Probe> probes{{"x", x, {2 * 0.3, 2 * -0.7 + 0.01}}};
  const auto r = finite_difference_check([&] { return x[0] * x[0] + x[1] * x[1]; }, probes, {}, rng);
  EXPECT_EQ(r.checked, 2u);
  EXPECT_EQ(r.failures, 1u);
}

TEST(GradCheck, SkipsCoordinatesAtAKink) {
  Rng rng(1);
  std::vector<double> x{1e-9};
  std::vector<Probe> probes{{"x", x, {1.0}}};
  const auto r = finite_difference_check([&] { return std::max(x[0], 0.0); }, probes, {}, rng);
  EXPECT_EQ(r.skipped, 1u);
  EXPECT_EQ(r.checked, 0u);
  EXPECT_EQ(r.failures, 0u);
}

TEST(GradCheck, KinkInsideTheFirstStepIsResolvedAtAFinerOne) {
  Rng rng(1);
  std::vector<double> x{1e-6};
  std::vector<Probe> probes{{"x", x, {1.0}}};
  const auto r = finite_difference_check([&] { return std::max(x[0], 0.0); }, probes, {}, rng);
  EXPECT_EQ(r.skipped, 0u);
  EXPECT_EQ(r.checked, 1u);
  EXPECT_EQ(r.failures, 0u);
}

TEST(GradCheck, ExtrapolationHandlesStrongCurvature) {
  Rng rng(1);
  std::vector<double> x{0.3};
  // A plain central difference at h=1e-5 is off by w^2 h^2 / 6 = 1.5e-4 relative.
  const double w = 3000.0;
  std::vector<Probe> probes{{"x", x, {w * std::cos(w * 0.3)}}};
  const auto r = finite_difference_check([&] { return std::sin(w * x[0]); }, probes, {}, rng);
  EXPECT_EQ(r.checked, 1u);
  EXPECT_EQ(r.failures, 0u);
  EXPECT_LT(r.max_rel_err, 1e-7);
}

}  // namespace
}  // namespace madgan::testing
