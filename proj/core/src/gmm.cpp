#include "madgan/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <sstream>
#include <thread>

#include "madgan/errors.hpp"
#include "madgan/rng.hpp"

namespace madgan::data {
namespace {

std::string join(const std::vector<double>& v) {
  std::ostringstream os;
  os.precision(17);
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  return os.str();
}

void fill_shard(const GmmSpec& spec, const std::vector<double>& cdf, std::uint64_t seed, std::size_t shard,
                std::span<double> out) {
  Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(Stream::kShard), shard}));
  for (double& v : out) {
    const double u = rng.uniform();
    std::size_t m = 0;
    while (m + 1 < cdf.size() && u >= cdf[m]) ++m;
    v = rng.normal(spec.means[m], spec.stds[m]);
  }
}

}  // namespace

void GmmSpec::validate() const {
  if (means.empty()) throw ContractError("GMM needs at least one component");
  if (stds.size() != means.size() || weights.size() != means.size()) {
    throw ContractError("GMM means, stds and weights must have equal length");
  }
  double total = 0.0;
  for (std::size_t m = 0; m < means.size(); ++m) {
    if (!std::isfinite(means[m])) throw ContractError("GMM mean must be finite");
    if (!(stds[m] > 0.0) || !std::isfinite(stds[m])) throw ContractError("GMM stds must be positive");
    if (!(weights[m] >= 0.0)) throw ContractError("GMM weights must be nonnegative");
    total += weights[m];
  }
  if (std::abs(total - 1.0) > 1e-12) throw ContractError("GMM weights must sum to 1 (got " + std::to_string(total) + ")");
}

std::string GmmSpec::describe() const {
  return "means=" + join(means) + ";stds=" + join(stds) + ";weights=" + join(weights);
}

GmmSpec GmmSpec::five_mode_preset() {
  return GmmSpec{{10.0, 20.0, 60.0, 80.0, 110.0}, {3.0, 3.0, 2.0, 2.0, 1.0}, std::vector<double>(5, 0.2)};
}

Moments mixture_moments(const GmmSpec& spec) {
  double mean = 0.0;
  double second = 0.0;
  for (std::size_t m = 0; m < spec.components(); ++m) {
    mean += spec.weights[m] * spec.means[m];
    second += spec.weights[m] * (spec.stds[m] * spec.stds[m] + spec.means[m] * spec.means[m]);
  }
  return Moments{mean, std::sqrt(std::max(second - mean * mean, 0.0))};
}

double gaussian_pdf(double x, double mean, double stddev) {
  const double u = (x - mean) / stddev;
  return std::exp(-0.5 * u * u) / (stddev * std::sqrt(2.0 * std::numbers::pi));
}

double gmm_density(const GmmSpec& spec, double x) {
  double p = 0.0;
  for (std::size_t m = 0; m < spec.components(); ++m) p += spec.weights[m] * gaussian_pdf(x, spec.means[m], spec.stds[m]);
  return p;
}

std::string SampleSource::tag() const {
  return kind == SourceKind::kReal ? std::string("real") : "generator-" + std::to_string(index + 1);
}

std::vector<double> SampleSet::from_generator(std::size_t i) const {
  if (generator_ids.size() != values.size()) throw ContractError("sample set carries no generator tags");
  std::vector<double> out;
  for (std::size_t n = 0; n < values.size(); ++n) {
    if (generator_ids[n] == i) out.push_back(values[n]);
  }
  return out;
}

SampleSet sample(const GmmSpec& spec, std::size_t n, std::uint64_t seed, unsigned threads) {
  spec.validate();
  if (n == 0) throw ContractError("sample: n must be >= 1");
  std::vector<double> cdf(spec.components());
  double acc = 0.0;
  for (std::size_t m = 0; m < spec.components(); ++m) cdf[m] = (acc += spec.weights[m]);

  SampleSet out;
  out.values.resize(n);
  out.seed = seed;
  const std::size_t shards = (n + kShardSize - 1) / kShardSize;
  auto run = [&](std::size_t first, std::size_t stride) {
    for (std::size_t s = first; s < shards; s += stride) {
      const std::size_t begin = s * kShardSize;
      const std::size_t len = std::min(kShardSize, n - begin);
      fill_shard(spec, cdf, seed, s, std::span<double>(out.values).subspan(begin, len));
    }
  };
  const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(threads, shards));
  if (workers == 1) {
    run(0, 1);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run, w, workers);
  }
  return out;
}

}  // namespace madgan::data
