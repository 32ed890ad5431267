#pragma once

// Generator bank (shared trunk, per-generator heads) and the discriminator
// used by the 1D density-estimation benchmark.
//
// Generator indices are 0-based in this API; parameter names are 1-based
// (`gen1.layer3.weight`) to match the log and checkpoint schema.

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "madgan/autodiff.hpp"
#include "madgan/nn.hpp"
#include "madgan/rng.hpp"

namespace madgan::models {

struct GeneratorSpec {
  std::size_t k = 4;
  std::size_t noise_dim = 64;
  std::size_t hidden = 128;
  double elu_alpha = 1.0;
  nn::InitSpec init;
};

/// k generators G_i(z) = head_i(elu(L2(elu(L1(z))))) where L1, L2 form the
/// trunk shared by every generator and head_i is a linear map to R.
class GeneratorBank {
 public:
  GeneratorBank(const GeneratorSpec& spec, std::uint64_t seed);

  std::size_t k() const noexcept { return heads_.size(); }
  std::size_t noise_dim() const noexcept { return spec_.noise_dim; }
  const GeneratorSpec& spec() const noexcept { return spec_; }

  // Trunk activations [B x hidden].
  ad::Var trunk(ad::Tape& tape, const ad::Var& z) const;
  // G_i(z) as [B x 1]; throws ContractError if i >= k.
  ad::Var generate(ad::Tape& tape, std::size_t i, const ad::Var& z) const;
  ad::Var head(ad::Tape& tape, std::size_t i, const ad::Var& trunk_out) const;
  // Forward pass without gradient bookkeeping.
  Tensor generate(std::size_t i, const Tensor& z) const;

  // z ~ U(-1, 1)^noise_dim, [batch x noise_dim], strictly inside the interval.
  Tensor sample_noise(std::size_t batch, Rng& rng) const;

  const std::vector<ad::ParameterPtr>& parameters() const noexcept { return registry_.all(); }
  std::vector<ad::ParameterPtr> trunk_parameters() const;
  std::vector<ad::ParameterPtr> head_parameters(std::size_t i) const;
  const nn::ParameterRegistry& registry() const noexcept { return registry_; }

  GeneratorBank clone() const;

 private:
  GeneratorBank() = default;
  void check_index(std::size_t i) const;

  GeneratorSpec spec_;
  nn::ParameterRegistry registry_;
  std::vector<nn::LinearLayer> trunk_;
  std::vector<nn::LinearLayer> heads_;
};

enum class DiscMode {
  kSoftmax,  // k+1 class scores; index k is "real"
  kSigmoid,  // one real/fake score
};

struct DiscriminatorSpec {
  DiscMode mode = DiscMode::kSoftmax;
  std::size_t k = 4;
  std::size_t input_dim = 1;
  std::size_t hidden = 128;
  double leaky_slope = 0.2;
  nn::InitSpec init;
};

/// Two leaky-relu hidden layers followed by a softmax or sigmoid head.
class Discriminator {
 public:
  Discriminator(const DiscriminatorSpec& spec, std::uint64_t seed);

  DiscMode mode() const noexcept { return spec_.mode; }
  const DiscriminatorSpec& spec() const noexcept { return spec_; }
  std::size_t k() const noexcept { return spec_.k; }
  std::size_t outputs() const noexcept { return spec_.mode == DiscMode::kSoftmax ? spec_.k + 1 : 1; }
  // Column of the "real" class in softmax mode.
  std::size_t real_index() const noexcept { return spec_.k; }

  // Penultimate activations [B x hidden], the feature map phi(x).
  ad::Var features(ad::Tape& tape, const ad::Var& x) const;
  ad::Var logits_from_features(ad::Tape& tape, const ad::Var& features) const;
  ad::Var logits(ad::Tape& tape, const ad::Var& x) const;
  // Softmax rows or sigmoid outputs, per mode.
  ad::Var scores(ad::Tape& tape, const ad::Var& x) const;
  // Probability that x is real: D_{k+1}(x) or sigmoid output, [B x 1].
  ad::Var real_score(ad::Tape& tape, const ad::Var& x) const;

  Tensor discriminate(const Tensor& x) const;
  Tensor features(const Tensor& x) const;

  const std::vector<ad::ParameterPtr>& parameters() const noexcept { return registry_.all(); }
  const nn::ParameterRegistry& registry() const noexcept { return registry_; }

  Discriminator clone() const;

 private:
  Discriminator() = default;

  DiscriminatorSpec spec_;
  nn::ParameterRegistry registry_;
  std::vector<nn::LinearLayer> hidden_;
  std::vector<nn::LinearLayer> head_;
};

// Copies values by parameter name into `registry`; throws ParseError on a
// missing name or a shape mismatch.
void assign_parameters(const nn::ParameterRegistry& registry, const std::map<std::string, Tensor>& values);
std::map<std::string, Tensor> parameter_values(const nn::ParameterRegistry& registry);

}  // namespace madgan::models
