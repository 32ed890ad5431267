#pragma once

// Randomized gradient-check cases covering every differentiable tape op and
// the full training losses of each variant.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "gradcheck.hpp"

namespace madgan::testing {

struct CaseResult {
  std::string name;
  std::uint64_t seed = 0;
  GradCheckResult result;
};

// `seeds` random configurations per op.
std::vector<CaseResult> run_op_catalogue(std::size_t seeds, std::uint64_t base_seed, const GradCheckOptions& options);

// Discriminator and generator losses of MAD-GAN, MA-GAN and MAD-GAN-Sim on
// small networks (noise 4, hidden 8), `seeds` configurations each.
std::vector<CaseResult> run_model_loss_catalogue(std::size_t seeds, std::uint64_t base_seed,
                                                 const GradCheckOptions& options);

}  // namespace madgan::testing
