#pragma once

// The 1D Gaussian-mixture ground truth of the density-estimation benchmark.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace madgan::data {

/// Mixture of 1D Gaussians. Weights are nonnegative and sum to one.
struct GmmSpec {
  std::vector<double> means;
  std::vector<double> stds;
  std::vector<double> weights;

  std::size_t components() const noexcept { return means.size(); }

  // Throws ContractError describing the first violated invariant.
  void validate() const;
  // "means=10,20;stds=3,3;weights=0.5,0.5" with round-trip precision.
  std::string describe() const;

  // Modes at 10, 20, 60, 80, 110 with stds 3, 3, 2, 2, 1 and equal weights.
  static GmmSpec five_mode_preset();

  friend bool operator==(const GmmSpec&, const GmmSpec&) = default;
};

struct Moments {
  double mean = 0.0;
  double stddev = 1.0;
};
Moments mixture_moments(const GmmSpec& spec);

double gaussian_pdf(double x, double mean, double stddev);
double gmm_density(const GmmSpec& spec, double x);

enum class SourceKind { kReal, kGenerator };

/// Source of a block of samples: real data, or generator `index` (0-based).
struct SampleSource {
  SourceKind kind = SourceKind::kReal;
  std::size_t index = 0;

  std::string tag() const;  // "real" or "generator-<index+1>"
  friend bool operator==(const SampleSource&, const SampleSource&) = default;
};

struct SampleSet {
  std::vector<double> values;
  // Per-value provenance; empty means every value comes from `source`.
  std::vector<std::uint32_t> generator_ids;
  std::uint64_t seed = 0;
  SampleSource source;

  std::size_t size() const noexcept { return values.size(); }
  // Values tagged with generator `i` (requires generator_ids).
  std::vector<double> from_generator(std::size_t i) const;
};

inline constexpr std::size_t kShardSize = 1u << 16;

/// n draws from `spec`: pick a component by weight, then a Gaussian draw.
///
/// Samples are produced in shards of kShardSize; shard s uses
/// Rng(derive_seed(seed, {Stream::kShard, s})), so the output is identical
/// for any `threads` value.
SampleSet sample(const GmmSpec& spec, std::size_t n, std::uint64_t seed, unsigned threads = 1);

}  // namespace madgan::data
