#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "madgan/nn.hpp"
#include "madgan/tensor.hpp"

namespace madgan {

struct OptimizerState {
  std::uint64_t step = 0;
  nn::AdamOptions options;
  std::map<std::string, nn::AdamMoments> moments;
};

/// On-disk training state, stored as one JSON document:
///
///   {
///     "format_version": 1,
///     "step": <completed iterations>,
///     "rng": {"seed": <u64>, "derivation": "splitmix64-chain", "step": <u64>},
///     "parameters": {"<name>": {"shape": [...], "data": [...]}, ...},
///     "optimizers": {"<name>": {"step": t, "beta1": .., "beta2": .., "epsilon": ..,
///                               "learning_rate": .., "moments": {"<param>": {"first": [...], "second": [...]}}}},
///     "config": {...}
///   }
///
/// Doubles are written with round-trip precision.
struct Checkpoint {
  static constexpr int kFormatVersion = 1;

  std::uint64_t step = 0;
  std::uint64_t seed = 0;
  std::map<std::string, Tensor> parameters;
  std::map<std::string, OptimizerState> optimizers;
  std::string config_json = "{}";
};

// Throws IoError naming the path on failure.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
// Throws IoError if unreadable, ParseError on schema violations or a version mismatch.
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::string checkpoint_to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(const std::string& text);

}  // namespace madgan
