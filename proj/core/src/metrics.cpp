#include "madgan/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <json.hpp>

#include "madgan/errors.hpp"

namespace madgan::metrics {

std::uint64_t Histogram::in_range() const noexcept {
  std::uint64_t total = 0;
  for (auto c : counts) total += c;
  return total;
}

std::vector<double> Histogram::frequencies() const {
  std::vector<double> f(counts.size(), 0.0);
  const auto total = in_range();
  if (total == 0) return f;
  for (std::size_t i = 0; i < counts.size(); ++i) f[i] = static_cast<double>(counts[i]) / static_cast<double>(total);
  return f;
}

bool Histogram::same_binning(const Histogram& other) const noexcept {
  return lo == other.lo && bin_width == other.bin_width && counts.size() == other.counts.size();
}

Histogram build_histogram(std::span<const double> samples, double lo, double hi, double bin_width) {
  if (!(lo < hi)) throw ContractError("histogram range requires lo < hi");
  if (!(bin_width > 0.0)) throw ContractError("histogram bin width must be positive");
  Histogram h;
  h.lo = lo;
  h.bin_width = bin_width;
  const double span_bins = (hi - lo) / bin_width;
  if (!std::isfinite(span_bins) || span_bins > static_cast<double>(kMaxBins)) {
    throw NumericError("histogram over [" + std::to_string(lo) + ", " + std::to_string(hi) + ") at width " +
                       std::to_string(bin_width) + " needs more than " + std::to_string(kMaxBins) + " bins");
  }
  const auto bins = static_cast<std::size_t>(std::llround(span_bins));
  h.counts.assign(std::max<std::size_t>(bins, 1), 0);
  const std::size_t n = h.counts.size();
  for (double x : samples) {
    if (x < h.edge(0)) {
      ++h.below;
      continue;
    }
    if (x >= h.edge(n)) {
      ++h.above;
      continue;
    }
    auto i = static_cast<std::size_t>(std::floor((x - lo) / bin_width));
    i = std::min(i, n - 1);
    // Resolve rounding against the computed edges so the half-open convention is exact.
    while (i > 0 && x < h.edge(i)) --i;
    while (i + 1 < n && x >= h.edge(i + 1)) ++i;
    ++h.counts[i];
  }
  return h;
}

Range default_range(std::span<const double> a, std::span<const double> b, double bin_width) {
  if (a.empty() && b.empty()) throw ContractError("default_range of two empty sample sets");
  double mn = std::numeric_limits<double>::infinity();
  double mx = -std::numeric_limits<double>::infinity();
  for (auto s : {a, b}) {
    for (double v : s) {
      mn = std::min(mn, v);
      mx = std::max(mx, v);
    }
  }
  return Range{std::floor((mn - 1.0) / bin_width) * bin_width, std::ceil((mx + 1.0) / bin_width) * bin_width};
}

namespace {
void require_same(const Histogram& a, const Histogram& b) {
  if (!a.same_binning(b)) throw ContractError("histograms use different binning");
}
}  // namespace

double chi_square(const Histogram& real, const Histogram& gen) {
  require_same(real, gen);
  double chi = 0.0;
  for (std::size_t i = 0; i < real.bins(); ++i) {
    const double r = static_cast<double>(real.counts[i]);
    const double g = static_cast<double>(gen.counts[i]);
    if (r + g > 0.0) chi += (r - g) * (r - g) / (r + g);
  }
  return chi;
}

double kl_divergence(const Histogram& real, const Histogram& gen, double eps) {
  require_same(real, gen);
  auto smooth = [eps](std::vector<double> f) {
    double total = 0.0;
    for (double& v : f) total += (v += eps);
    for (double& v : f) v /= total;
    return f;
  };
  const auto p = smooth(real.frequencies());
  const auto q = smooth(gen.frequencies());
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) kl += p[i] * std::log(p[i] / q[i]);
  return std::max(kl, 0.0);
}

Coverage mode_coverage(std::span<const double> samples, const data::GmmSpec& spec, double c, double threshold) {
  if (!(c > 0.0)) throw ContractError("coverage radius must be positive");
  if (threshold < 0.0 || threshold > 1.0) throw ContractError("coverage threshold must lie in [0, 1]");
  Coverage out;
  out.per_mode_mass.assign(spec.components(), 0.0);
  if (samples.empty()) return out;
  for (std::size_t m = 0; m < spec.components(); ++m) {
    const double lo = spec.means[m] - c * spec.stds[m];
    const double hi = spec.means[m] + c * spec.stds[m];
    std::size_t inside = 0;
    for (double x : samples) inside += (x >= lo && x <= hi) ? 1 : 0;
    out.per_mode_mass[m] = static_cast<double>(inside) / static_cast<double>(samples.size());
    if (out.per_mode_mass[m] >= threshold) ++out.modes_covered;
  }
  return out;
}

std::string MetricsReport::to_json() const {
  nlohmann::json j{{"format_version", kFormatVersion},
                   {"chi_square", chi_square},
                   {"kl_divergence", kl_divergence},
                   {"modes_covered", modes_covered},
                   {"per_mode_mass", per_mode_mass},
                   {"n_real", n_real},
                   {"n_gen", n_gen},
                   {"seed_real", seed_real},
                   {"seed_gen", seed_gen},
                   {"bin_width", bin_width},
                   {"range", {lo, hi}}};
  return j.dump(2);
}

Evaluation evaluate(std::span<const double> real, std::span<const double> gen, const data::GmmSpec& spec,
                    const EvalOptions& options) {
  const Range range = default_range(real, gen, options.bin_width);
  Evaluation e;
  e.real = build_histogram(real, range.lo, range.hi, options.bin_width);
  e.gen = build_histogram(gen, range.lo, range.hi, options.bin_width);
  const Coverage cov = mode_coverage(gen, spec, options.coverage_sigma, options.coverage_threshold);
  MetricsReport& r = e.report;
  r.chi_square = chi_square(e.real, e.gen);
  r.kl_divergence = kl_divergence(e.real, e.gen);
  r.modes_covered = cov.modes_covered;
  r.per_mode_mass = cov.per_mode_mass;
  r.n_real = real.size();
  r.n_gen = gen.size();
  r.bin_width = options.bin_width;
  r.lo = e.real.lo;
  r.hi = e.real.hi();
  return e;
}

}  // namespace madgan::metrics
