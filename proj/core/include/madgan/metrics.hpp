#pragma once

// Histogram comparison of generated and real samples: chi-square distance,
// KL divergence, and per-mode coverage of a Gaussian mixture.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "madgan/gmm.hpp"

namespace madgan::metrics {

inline constexpr double kDefaultBinWidth = 0.1;
inline constexpr double kKlSmoothing = 1e-10;

/// Half-open bins [lo + i*w, lo + (i+1)*w) for i in [0, bins()).
struct Histogram {
  double lo = 0.0;
  double bin_width = kDefaultBinWidth;
  std::vector<std::uint64_t> counts;
  std::uint64_t below = 0;  // samples < lo
  std::uint64_t above = 0;  // samples >= upper edge

  std::size_t bins() const noexcept { return counts.size(); }
  double edge(std::size_t i) const noexcept { return lo + static_cast<double>(i) * bin_width; }
  double hi() const noexcept { return edge(bins()); }
  std::uint64_t in_range() const noexcept;
  // Counts divided by in_range(); all zeros for an empty histogram.
  std::vector<double> frequencies() const;
  bool same_binning(const Histogram& other) const noexcept;
};

// Wider ranges throw NumericError (samples far outside any sane support).
inline constexpr std::size_t kMaxBins = std::size_t{1} << 26;

Histogram build_histogram(std::span<const double> samples, double lo, double hi, double bin_width = kDefaultBinWidth);

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

/// [min - 1, max + 1] over both sample sets, widened outward to multiples of bin_width.
Range default_range(std::span<const double> a, std::span<const double> b, double bin_width = kDefaultBinWidth);

/// sum_b (r_b - g_b)^2 / (r_b + g_b) over bins with r_b + g_b > 0, on raw counts.
double chi_square(const Histogram& real, const Histogram& gen);

/// KL(P_real || P_gen) in nats on frequencies smoothed by `eps` and renormalized.
double kl_divergence(const Histogram& real, const Histogram& gen, double eps = kKlSmoothing);

struct Coverage {
  std::size_t modes_covered = 0;
  std::vector<double> per_mode_mass;  // fraction of samples within mean +- c*std
};

/// Mode m is covered iff at least a `threshold` fraction of all samples fall
/// inside [mean_m - c*std_m, mean_m + c*std_m].
Coverage mode_coverage(std::span<const double> samples, const data::GmmSpec& spec, double c = 3.0,
                       double threshold = 0.01);

struct EvalOptions {
  double bin_width = kDefaultBinWidth;
  double coverage_sigma = 3.0;
  double coverage_threshold = 0.01;
};

struct MetricsReport {
  static constexpr int kFormatVersion = 1;

  double chi_square = 0.0;
  double kl_divergence = 0.0;
  std::size_t modes_covered = 0;
  std::vector<double> per_mode_mass;
  std::size_t n_real = 0;
  std::size_t n_gen = 0;
  std::uint64_t seed_real = 0;
  std::uint64_t seed_gen = 0;
  double bin_width = kDefaultBinWidth;
  double lo = 0.0;
  double hi = 0.0;

  std::string to_json() const;
};

struct Evaluation {
  MetricsReport report;
  Histogram real;
  Histogram gen;
};

Evaluation evaluate(std::span<const double> real, std::span<const double> gen, const data::GmmSpec& spec,
                    const EvalOptions& options = {});

}  // namespace madgan::metrics
