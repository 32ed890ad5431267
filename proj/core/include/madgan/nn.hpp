#pragma once

// Fully-connected layers, a parameter registry supporting cross-network
// sharing, weight initialization, and the Adam optimizer.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "madgan/autodiff.hpp"
#include "madgan/rng.hpp"
#include "madgan/tensor.hpp"

namespace madgan::nn {

enum class InitScheme {
  kUniformFanIn,  // U(-1/sqrt(fan_in), 1/sqrt(fan_in)), fan_in = shape[0]
  kGaussian,      // N(0, stddev^2)
};

struct InitSpec {
  InitScheme scheme = InitScheme::kUniformFanIn;
  double stddev = 0.02;
};

// Weight tensor of `shape` drawn i.i.d. from `spec`. Biases are zero-initialized by the layer.
Tensor init_params(const Shape& shape, const InitSpec& spec, Rng& rng);

/// Owns named parameters. Names are unique; insertion order is preserved.
class ParameterRegistry {
 public:
  ad::ParameterPtr create(const std::string& name, Tensor value);
  ad::ParameterPtr find(const std::string& name) const;
  bool contains(const std::string& name) const { return by_name_.count(name) != 0; }

  const std::vector<ad::ParameterPtr>& all() const noexcept { return ordered_; }

 private:
  std::map<std::string, ad::ParameterPtr> by_name_;
  std::vector<ad::ParameterPtr> ordered_;
};

/// y = x W + b with W [in x out], b [out].
class LinearLayer {
 public:
  LinearLayer(ad::ParameterPtr weight, ad::ParameterPtr bias, std::optional<std::string> shared_id = std::nullopt);

  /// Creates `<prefix>.weight` and `<prefix>.bias` in the registry.
  static LinearLayer create(ParameterRegistry& registry, const std::string& prefix, std::size_t in, std::size_t out,
                            const InitSpec& init, Rng& rng);

  /// Returns a layer bound to the parameters stored under `shared_id`,
  /// creating them on first use. Every layer obtained with the same id
  /// references the same Parameter objects.
  static LinearLayer shared(ParameterRegistry& registry, const std::string& shared_id, std::size_t in,
                            std::size_t out, const InitSpec& init, Rng& rng);

  ad::Var forward(ad::Tape& tape, const ad::Var& x) const;

  std::size_t in() const { return weight_->shape()[0]; }
  std::size_t out() const { return weight_->shape()[1]; }
  const ad::ParameterPtr& weight() const noexcept { return weight_; }
  const ad::ParameterPtr& bias() const noexcept { return bias_; }
  const std::optional<std::string>& shared_id() const noexcept { return shared_id_; }

 private:
  ad::ParameterPtr weight_;
  ad::ParameterPtr bias_;
  std::optional<std::string> shared_id_;
};

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamMoments {
  Tensor first;
  Tensor second;
};

/// One Adam update, in place, with bias correction for step `t` (1-based).
void adam_step(std::span<double> param, std::span<const double> grad, AdamMoments& moments, std::uint64_t t,
               const AdamOptions& options);

/// Adam over a fixed parameter list. Moments start at zero; the step
/// counter increases by one per call to step().
class Adam {
 public:
  Adam(std::vector<ad::ParameterPtr> params, AdamOptions options);

  // Throws DimensionError if a gradient's shape differs from its parameter.
  void step(const ad::GradientMap& grads);

  std::uint64_t steps() const noexcept { return t_; }
  const AdamOptions& options() const noexcept { return options_; }
  void set_learning_rate(double lr) noexcept { options_.learning_rate = lr; }
  const std::vector<ad::ParameterPtr>& parameters() const noexcept { return params_; }

  const AdamMoments& moments(const std::string& name) const;
  // Restores optimizer state, e.g. from a checkpoint.
  void restore(std::uint64_t t, const std::map<std::string, AdamMoments>& moments);
  std::map<std::string, AdamMoments> snapshot() const;

 private:
  std::vector<ad::ParameterPtr> params_;
  std::vector<AdamMoments> moments_;
  AdamOptions options_;
  std::uint64_t t_ = 0;
};

}  // namespace madgan::nn
