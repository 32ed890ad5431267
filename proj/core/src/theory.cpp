#include "madgan/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "madgan/errors.hpp"
#include "madgan/nn.hpp"
#include "madgan/objectives.hpp"
#include "madgan/rng.hpp"

namespace madgan::theory {
namespace {

// p log(p / q), with 0 log 0 = 0.
double plogq(double p, double q) {
  if (p <= 0.0) return 0.0;
  return p * std::log(p / std::max(q, 1e-300));
}

}  // namespace

std::size_t Grid::points() const {
  if (!(hi > lo) || !(step > 0.0)) throw ContractError("grid requires lo < hi and step > 0");
  return static_cast<std::size_t>(std::llround((hi - lo) / step)) + 1;
}

double trapezoid(const std::function<double(double)>& f, const Grid& grid) {
  const std::size_t n = grid.points();
  double total = 0.5 * (f(grid.at(0)) + f(grid.at(n - 1)));
  for (std::size_t i = 1; i + 1 < n; ++i) total += f(grid.at(i));
  return total * grid.step;
}

double AnalyticDensitySet::p_g_sum(double x) const {
  double s = 0.0;
  for (const auto& g : generators) s += data::gmm_density(g, x);
  return s;
}

void AnalyticDensitySet::validate() const {
  if (generators.empty()) throw ContractError("density set needs k >= 1 generators");
  real.validate();
  auto check = [this](const data::GmmSpec& spec, const std::string& what) {
    spec.validate();
    const double mass = trapezoid([&](double x) { return data::gmm_density(spec, x); }, grid);
    if (std::abs(mass - 1.0) > 1e-6) {
      throw ContractError(what + " integrates to " + std::to_string(mass) + " on the grid");
    }
  };
  check(real, "p_d");
  for (std::size_t i = 0; i < generators.size(); ++i) check(generators[i], "p_g" + std::to_string(i + 1));
}

AnalyticDensitySet matched_set(const data::GmmSpec& real, std::size_t k, Grid grid) {
  return AnalyticDensitySet{real, std::vector<data::GmmSpec>(k, real), grid};
}

std::vector<double> optimal_discriminator(const AnalyticDensitySet& set, double x) {
  std::vector<double> d(set.k() + 1);
  double total = set.p_d(x);
  for (std::size_t i = 0; i < set.k(); ++i) total += (d[i] = set.p_g(i, x));
  if (!(total > 0.0)) throw DomainError("optimal discriminator undefined at x=" + std::to_string(x));
  for (std::size_t i = 0; i < set.k(); ++i) d[i] /= total;
  d[set.k()] = set.p_d(x) / total;
  return d;
}

double optimum_value(std::size_t k) {
  const double kk = static_cast<double>(k);
  return -(kk + 1.0) * std::log(kk + 1.0) + kk * std::log(kk);
}

GeneratorObjective generator_objective_at_optimum(const AnalyticDensitySet& set) {
  const double k = static_cast<double>(set.k());
  GeneratorObjective out;
  out.direct = trapezoid(
      [&](double x) {
        const double pd = set.p_d(x);
        const double pg = set.p_g_sum(x);
        const double total = pd + pg;
        if (total <= 0.0) return 0.0;
        // p_d log D*_{k+1} + (sum p_g) log(1 - D*_{k+1})
        return plogq(pd, total) + plogq(pg, total);
      },
      set.grid);
  out.kl_real = trapezoid([&](double x) { return plogq(set.p_d(x), set.p_avg(x)); }, set.grid);
  out.kl_gen = trapezoid([&](double x) { return plogq(set.p_g_mean(x), set.p_avg(x)); }, set.grid);
  out.kl_form = out.kl_real + k * out.kl_gen + optimum_value(set.k());
  return out;
}

std::vector<double> simplex_maximizer(std::span<const double> a) {
  if (a.empty()) throw ContractError("simplex_maximizer of an empty vector");
  double total = 0.0;
  for (double v : a) {
    if (v < 0.0) throw ContractError("simplex_maximizer requires a_i >= 0");
    total += v;
  }
  if (!(total > 0.0)) throw ContractError("simplex_maximizer requires sum a > 0");
  std::vector<double> y(a.begin(), a.end());
  for (double& v : y) v /= total;
  return y;
}

std::vector<double> project_to_simplex(std::span<const double> v) {
  // Sort-based projection (Held, Wolfe and Crowder).
  std::vector<double> u(v.begin(), v.end());
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumulative = 0.0;
  double theta = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) {
    cumulative += u[j];
    const double t = (cumulative - 1.0) / static_cast<double>(j + 1);
    if (u[j] - t > 0.0) theta = t;
  }
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::max(v[i] - theta, 0.0);
  return out;
}

ProjectedGradientResult simplex_maximizer_projected_gradient(std::span<const double> a, double tolerance,
                                                             std::size_t max_iterations) {
  if (a.empty()) throw ContractError("simplex_maximizer of an empty vector");
  for (double v : a) {
    if (!(v > 0.0)) throw ContractError("projected-gradient verifier requires a_i > 0");
  }
  const std::size_t n = a.size();
  auto objective = [&](const std::vector<double>& y) {
    double f = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (y[i] <= 0.0) return -std::numeric_limits<double>::infinity();
      f += a[i] * std::log(y[i]);
    }
    return f;
  };

  ProjectedGradientResult r;
  r.y.assign(n, 1.0 / static_cast<double>(n));
  double f = objective(r.y);
  double step = 1e-2;
  std::vector<double> grad(n), trial(n), moved(n);
  for (r.iterations = 0; r.iterations < max_iterations; ++r.iterations) {
    for (std::size_t i = 0; i < n; ++i) grad[i] = a[i] / r.y[i];
    step *= 2.0;
    double f_trial;
    for (;;) {
      for (std::size_t i = 0; i < n; ++i) moved[i] = r.y[i] + step * grad[i];
      trial = project_to_simplex(moved);
      f_trial = objective(trial);
      double ascent = 0.0;
      for (std::size_t i = 0; i < n; ++i) ascent += grad[i] * (trial[i] - r.y[i]);
      if (f_trial >= f + 1e-4 * ascent) break;
      step *= 0.5;
      if (step < 1e-300) break;
    }
    double change = 0.0;
    for (std::size_t i = 0; i < n; ++i) change = std::max(change, std::abs(trial[i] - r.y[i]));
    r.y = trial;
    f = f_trial;
    if (change < tolerance) {
      r.converged = true;
      ++r.iterations;
      break;
    }
  }
  return r;
}

models::Discriminator fit_discriminator(const AnalyticDensitySet& set, const DiscriminatorFitOptions& options) {
  set.validate();
  models::DiscriminatorSpec spec;
  spec.mode = models::DiscMode::kSoftmax;
  spec.k = set.k();
  spec.hidden = options.hidden;
  models::Discriminator d(spec, options.seed);
  nn::Adam adam(d.parameters(), nn::AdamOptions{.learning_rate = options.learning_rate});
  for (std::size_t step = 0; step < options.steps; ++step) {
    const double progress = options.steps > 1 ? static_cast<double>(step) / static_cast<double>(options.steps - 1) : 0.0;
    adam.set_learning_rate(options.final_learning_rate + 0.5 * (options.learning_rate - options.final_learning_rate) *
                                                             (1.0 + std::cos(std::numbers::pi * progress)));
    auto draw = [&](const data::GmmSpec& g, std::uint64_t cls) {
      const std::uint64_t s = derive_seed(options.seed, {static_cast<std::uint64_t>(Stream::kRealBatch), step, cls});
      return Tensor::column(data::sample(g, options.batch, s).values);
    };
    ad::Tape tape;
    ad::Var real = tape.constant(draw(set.real, set.k()));
    std::vector<ad::Var> fakes;
    for (std::size_t i = 0; i < set.k(); ++i) fakes.push_back(tape.constant(draw(set.generators[i], i)));
    ad::Var loss = objectives::disc_loss_madgan(tape, d, real, fakes);
    adam.step(tape.backward(loss));
  }
  return d;
}

DiscriminatorGap empirical_vs_optimal_discriminator(const AnalyticDensitySet& set, const models::Discriminator& d,
                                                    double density_floor) {
  if (d.mode() != models::DiscMode::kSoftmax || d.k() != set.k()) {
    throw ContractError("discriminator does not match the density set");
  }
  const std::size_t n = set.grid.points();
  std::vector<double> xs;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = set.grid.at(i);
    if (set.p_d(x) + set.p_g_sum(x) > density_floor) xs.push_back(x);
  }
  DiscriminatorGap gap;
  gap.points = xs.size();
  if (xs.empty()) return gap;
  const Tensor scores = d.discriminate(Tensor::column(xs));
  for (std::size_t r = 0; r < xs.size(); ++r) {
    const auto opt = optimal_discriminator(set, xs[r]);
    for (std::size_t j = 0; j < opt.size(); ++j) {
      const double diff = std::abs(scores.at(r, j) - opt[j]);
      if (diff > gap.sup_norm) {
        gap.sup_norm = diff;
        gap.worst_x = xs[r];
      }
    }
  }
  return gap;
}

}  // namespace madgan::theory
