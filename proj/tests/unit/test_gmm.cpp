#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "madgan/errors.hpp"
#include "madgan/gmm.hpp"
#include "madgan/theory.hpp"

namespace madgan::data {
namespace {

TEST(GmmSpec, PaperPreset) {
  const GmmSpec s = GmmSpec::five_mode_preset();
  EXPECT_EQ(s.means, (std::vector<double>{10, 20, 60, 80, 110}));
  EXPECT_EQ(s.stds, (std::vector<double>{3, 3, 2, 2, 1}));
  for (double w : s.weights) EXPECT_DOUBLE_EQ(w, 0.2);
  EXPECT_NO_THROW(s.validate());
}

TEST(GmmSpec, Validation) {
  EXPECT_THROW((GmmSpec{{0}, {0}, {1}}.validate()), ContractError);
  EXPECT_THROW((GmmSpec{{0, 1}, {1, 1}, {0.5, 0.6}}.validate()), ContractError);
  EXPECT_THROW((GmmSpec{{0, 1}, {1}, {0.5, 0.5}}.validate()), ContractError);
  EXPECT_THROW((GmmSpec{{0, 1}, {1, 1}, {1.5, -0.5}}.validate()), ContractError);
  EXPECT_THROW((GmmSpec{{}, {}, {}}.validate()), ContractError);
}

TEST(GmmSpec, MixtureMoments) {
  const auto m = mixture_moments(GmmSpec::five_mode_preset());
  EXPECT_NEAR(m.mean, 56.0, 1e-12);
  // E[x^2] = 0.2 * sum(s^2 + mu^2) = 4525.4
  EXPECT_NEAR(m.stddev, std::sqrt(4525.4 - 56.0 * 56.0), 1e-9);
}

TEST(Density, PeakOfIsolatedMode) {
  const GmmSpec s = GmmSpec::five_mode_preset();
  EXPECT_NEAR(gmm_density(s, 110.0), 0.2 / std::sqrt(2.0 * std::numbers::pi), 1e-10);
  EXPECT_NEAR(gmm_density(s, 110.0), 0.079788, 1e-6);
}

TEST(Density, SymmetricAroundIsolatedMode) {
  const GmmSpec s = GmmSpec::five_mode_preset();
  EXPECT_NEAR(gmm_density(s, 111.0), gmm_density(s, 109.0), 1e-10);
}

TEST(Density, IntegratesToOne) {
  const GmmSpec s = GmmSpec::five_mode_preset();
  EXPECT_NEAR(theory::trapezoid([&](double x) { return gmm_density(s, x); }, theory::Grid{}), 1.0, 1e-6);
}

TEST(Sample, DeterministicPerSeedAndThreadCount) {
  const GmmSpec s = GmmSpec::five_mode_preset();
  const auto a = sample(s, 200000, 9);
  EXPECT_EQ(a.values, sample(s, 200000, 9).values);
  EXPECT_EQ(a.values, sample(s, 200000, 9, 4).values);
  EXPECT_NE(a.values, sample(s, 200000, 10).values);
  EXPECT_EQ(a.seed, 9u);
  EXPECT_EQ(a.source.tag(), "real");
  EXPECT_THROW(sample(s, 0, 1), ContractError);
}

TEST(Sample, ComponentMeansAndFractions) {
  // Same stds and weights as the benchmark, modes far enough apart that
  // nearest-mode assignment recovers the component.
  GmmSpec s = GmmSpec::five_mode_preset();
  s.means = {0, 1000, 2000, 3000, 4000};
  const std::size_t n = 1000000;
  const auto set = sample(s, n, 21);
  std::vector<double> sum(5, 0.0);
  std::vector<std::size_t> count(5, 0);
  for (double v : set.values) {
    const auto m = static_cast<std::size_t>(std::clamp(std::lround(v / 1000.0), 0L, 4L));
    sum[m] += v;
    ++count[m];
  }
  for (std::size_t m = 0; m < 5; ++m) {
    const double frac = static_cast<double>(count[m]) / static_cast<double>(n);
    EXPECT_NEAR(frac, 0.2, 0.005);
    const double mean = sum[m] / static_cast<double>(count[m]);
    EXPECT_NEAR(mean, s.means[m], 4.0 * s.stds[m] / std::sqrt(n * 0.2));
  }
}

TEST(Sample, KolmogorovSmirnovSelfConsistency) {
  const GmmSpec s = GmmSpec::five_mode_preset();
  const std::size_t n = 100000;
  auto a = sample(s, n, 1).values;
  auto b = sample(s, n, 2).values;
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < n && j < n) {
    if (a[i] <= b[j]) ++i; else ++j;
    d = std::max(d, std::abs(static_cast<double>(i) - static_cast<double>(j)) / static_cast<double>(n));
  }
  // Two-sample critical value at the 1% level: 1.628 * sqrt(2 / n).
  EXPECT_LT(d, 1.628 * std::sqrt(2.0 / static_cast<double>(n)));
}

TEST(SampleSource, Tags) {
  EXPECT_EQ((SampleSource{SourceKind::kGenerator, 0}.tag()), "generator-1");
  EXPECT_EQ((SampleSource{SourceKind::kGenerator, 3}.tag()), "generator-4");
}

TEST(SampleSet, FromGenerator) {
  SampleSet s;
  s.values = {1, 2, 3, 4};
  s.generator_ids = {0, 0, 1, 1};
  EXPECT_EQ(s.from_generator(1), (std::vector<double>{3, 4}));
  s.generator_ids.clear();
  EXPECT_THROW((void)s.from_generator(0), ContractError);
}

}  // namespace
}  // namespace madgan::data
