#pragma once

// Closed-form optimality results for the k+1-class discriminator game,
// checked numerically against analytic densities.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "madgan/gmm.hpp"
#include "madgan/models.hpp"

namespace madgan::theory {

struct Grid {
  double lo = -20.0;
  double hi = 160.0;
  double step = 0.01;

  std::size_t points() const;  // number of nodes, both ends included
  double at(std::size_t i) const { return lo + static_cast<double>(i) * step; }
};

// Trapezoid rule over the grid nodes.
double trapezoid(const std::function<double(double)>& f, const Grid& grid);

/// Fixed data density p_d and k generator densities p_{g_i}.
struct AnalyticDensitySet {
  data::GmmSpec real;
  std::vector<data::GmmSpec> generators;
  Grid grid;

  std::size_t k() const noexcept { return generators.size(); }
  double p_d(double x) const { return data::gmm_density(real, x); }
  double p_g(std::size_t i, double x) const { return data::gmm_density(generators.at(i), x); }
  double p_g_sum(double x) const;
  // (1/k) sum_i p_{g_i}
  double p_g_mean(double x) const { return p_g_sum(x) / static_cast<double>(k()); }
  // (p_d + sum_i p_{g_i}) / (k + 1)
  double p_avg(double x) const { return (p_d(x) + p_g_sum(x)) / static_cast<double>(k() + 1); }

  // Throws ContractError unless k >= 1 and every density integrates to 1 +- 1e-6 on the grid.
  void validate() const;
};

// A set whose k generators all equal the data distribution.
AnalyticDensitySet matched_set(const data::GmmSpec& real, std::size_t k, Grid grid = {});

/// Optimal discriminator at x: entry i < k is p_{g_i}/(p_d + sum p_g),
/// entry k is p_d/(p_d + sum p_g). Throws DomainError where all densities vanish.
std::vector<double> optimal_discriminator(const AnalyticDensitySet& set, double x);

// -(k+1) log(k+1) + k log k, the generators' optimum value.
double optimum_value(std::size_t k);

struct GeneratorObjective {
  // E_{p_d} log D*_{k+1} + sum_i E_{p_{g_i}} log(1 - D*_{k+1}), integrated directly.
  double direct = 0.0;
  // KL(p_d || p_avg) + k KL(p_g || p_avg) + optimum_value(k).
  double kl_form = 0.0;
  double kl_real = 0.0;
  double kl_gen = 0.0;
};

/// Generators' objective with the discriminator at its optimum, by two
/// independent routes. Logs are natural; zero-density terms contribute 0.
GeneratorObjective generator_objective_at_optimum(const AnalyticDensitySet& set);

/// argmax_y sum_i a_i log y_i subject to sum_i y_i = 1: y_i = a_i / sum a.
/// Throws ContractError on a negative entry or an all-zero input.
std::vector<double> simplex_maximizer(std::span<const double> a);

// Euclidean projection onto the probability simplex.
std::vector<double> project_to_simplex(std::span<const double> v);

struct ProjectedGradientResult {
  std::vector<double> y;
  std::size_t iterations = 0;
  bool converged = false;
};

/// Projected gradient ascent with Armijo backtracking on the same problem,
/// started from the uniform point. Requires every a_i > 0.
ProjectedGradientResult simplex_maximizer_projected_gradient(std::span<const double> a, double tolerance = 1e-13,
                                                             std::size_t max_iterations = 1'000'000);

struct DiscriminatorFitOptions {
  std::size_t steps = 20000;
  std::size_t batch = 128;
  double learning_rate = 1e-3;
  double final_learning_rate = 1e-5;  // cosine decay target at the last step
  std::size_t hidden = 128;
  std::uint64_t seed = 1;
};

/// Trains a softmax-mode discriminator on samples from the fixed set
/// (generator i labeled i, data labeled k) with no generator updates.
models::Discriminator fit_discriminator(const AnalyticDensitySet& set, const DiscriminatorFitOptions& options);

struct DiscriminatorGap {
  double sup_norm = 0.0;
  std::size_t points = 0;  // grid points compared
  double worst_x = 0.0;
};

/// Largest absolute difference between d's softmax outputs and the optimal
/// discriminator over grid points where p_d + sum p_g > density_floor.
DiscriminatorGap empirical_vs_optimal_discriminator(const AnalyticDensitySet& set, const models::Discriminator& d,
                                                    double density_floor = 1e-4);

}  // namespace madgan::theory
