#pragma once

// Training configuration, its JSON form, presets and content hash.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "madgan/gmm.hpp"
#include "madgan/models.hpp"
#include "madgan/objectives.hpp"

namespace madgan::config {

enum class Variant { kMadgan, kMagan, kMadganSim };

const char* variant_name(Variant v) noexcept;  // "madgan", "magan", "madgan-sim"
// Throws ConfigError("variant", ...) listing the accepted names.
Variant parse_variant(std::string_view name);

const char* gen_loss_name(objectives::GenLossKind kind) noexcept;  // "saturating", "nonsat"
objectives::GenLossKind parse_gen_loss(std::string_view name);

// Which discriminator the generators are updated against within a step.
enum class DiscSnapshot { kPostUpdate, kPreUpdate };
// How per-generator gradients combine on the shared trunk.
enum class TrunkReduction { kSum, kMean };

struct EvalConfig {
  std::size_t every = 2000;               // periodic metrics cadence (0 disables)
  std::size_t periodic_samples = 16384;   // pool size for periodic metrics
  std::size_t final_samples = 65536;      // pool size for the final report
  double bin_width = 0.1;
  double coverage_sigma = 3.0;
  double coverage_tau = 0.01;
};

struct TrainConfig {
  Variant variant = Variant::kMadgan;
  std::size_t k = 4;
  std::size_t batch_size = 128;
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t iterations = 198000;
  std::uint64_t seed = 1;
  std::size_t disc_steps_per_gen_step = 1;
  objectives::GenLossKind gen_loss = objectives::GenLossKind::kSaturating;
  objectives::SimConfig sim;
  data::GmmSpec data = data::GmmSpec::five_mode_preset();
  std::size_t dataset_size = 200000;
  // Train in standardized coordinates (x - mean) / std of the mixture;
  // samples are mapped back before evaluation.
  bool standardize = true;
  std::size_t checkpoint_every = 0;  // 0: final checkpoint only
  std::size_t log_every = 1;
  DiscSnapshot disc_snapshot = DiscSnapshot::kPostUpdate;
  TrunkReduction trunk_reduction = TrunkReduction::kSum;
  std::size_t noise_dim = 64;
  std::size_t gen_hidden = 128;
  std::size_t disc_hidden = 128;
  double leaky_slope = 0.2;
  EvalConfig eval;

  models::DiscMode disc_mode() const noexcept {
    return variant == Variant::kMadgan ? models::DiscMode::kSoftmax : models::DiscMode::kSigmoid;
  }
  models::GeneratorSpec generator_spec() const;
  models::DiscriminatorSpec discriminator_spec() const;
};

/// Throws ConfigError naming the first invalid field.
void validate(const TrainConfig& cfg);

/// Parses a JSON document. Keys are optional (defaults apply) but unknown
/// keys, wrong types and invalid values are ConfigErrors whose message
/// carries the field path and its line in `text`.
TrainConfig parse_config(std::string_view text);
TrainConfig load_config(const std::filesystem::path& path);

// Every field, keys sorted, fixed formatting: the hashed representation.
std::string canonical_json(const TrainConfig& cfg);
std::string pretty_json(const TrainConfig& cfg);

// Git blob SHA-1 of canonical_json, 40 lowercase hex digits.
std::string config_hash(const TrainConfig& cfg);
std::string git_blob_sha1(std::string_view content);

/// table1-madgan, table1-magan, table1-madgan-sim, smoke, gencount-k1 ... gencount-k8.
TrainConfig preset(std::string_view name);
std::vector<std::string> preset_names();

}  // namespace madgan::config
