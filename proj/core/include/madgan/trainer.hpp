#pragma once

// Alternating discriminator / generator training for MAD-GAN, MA-GAN and
// MAD-GAN-Sim, with checkpointing and deterministic replay.
//
// Every random draw is keyed by (seed, purpose, step, ...) through
// derive_seed, so a run is fully determined by its config and a resumed run
// needs nothing beyond the checkpointed parameters and optimizer moments.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "madgan/checkpoint.hpp"
#include "madgan/config.hpp"
#include "madgan/metrics.hpp"
#include "madgan/models.hpp"
#include "madgan/nn.hpp"

namespace madgan::train {

/// Map between data coordinates and the coordinates the networks see.
struct Affine {
  double shift = 0.0;
  double scale = 1.0;

  double to_model(double x) const noexcept { return (x - shift) / scale; }
  double to_data(double y) const noexcept { return shift + scale * y; }
};

// Identity unless cfg.standardize, then the mixture's mean and std.
Affine data_transform(const config::TrainConfig& cfg);

struct PeriodicMetrics {
  double kl = 0.0;
  double chi2 = 0.0;
  std::size_t modes = 0;
};

struct LogRow {
  std::uint64_t step = 0;  // iterations completed
  double d_loss = 0.0;
  std::vector<double> g_loss;
  std::optional<PeriodicMetrics> metrics;
};

/// CSV columns: step,d_loss,g1_loss..gk_loss,kl,chi2,modes. The metric
/// columns are empty on rows without a periodic snapshot.
struct TrainLog {
  std::size_t k = 0;
  std::vector<LogRow> rows;

  std::string header() const;
  std::string format_row(const LogRow& row) const;
  std::string to_csv() const;
  // Throws ParseError on a malformed file.
  static TrainLog from_csv(std::string_view text);
};

class TrainState {
 public:
  explicit TrainState(const config::TrainConfig& cfg);
  TrainState(TrainState&&) noexcept = default;
  TrainState& operator=(TrainState&&) noexcept = default;
  TrainState(const TrainState&) = delete;
  TrainState& operator=(const TrainState&) = delete;

  const config::TrainConfig& config() const noexcept { return cfg_; }
  std::uint64_t step() const noexcept { return step_; }

  models::GeneratorBank& generators() noexcept { return bank_; }
  const models::GeneratorBank& generators() const noexcept { return bank_; }
  models::Discriminator& discriminator() noexcept { return disc_; }
  const models::Discriminator& discriminator() const noexcept { return disc_; }
  nn::Adam& generator_optimizer() noexcept { return gen_opt_; }
  nn::Adam& discriminator_optimizer() noexcept { return disc_opt_; }
  // Training set in model coordinates.
  const std::vector<double>& dataset() const noexcept { return *dataset_; }
  const Affine& transform() const noexcept { return transform_; }

  Checkpoint to_checkpoint() const;
  // Rebuilds a state from a checkpoint; throws ParseError if it does not fit its config.
  static TrainState from_checkpoint(const Checkpoint& ckpt);

 private:
  friend struct StepAccess;
  config::TrainConfig cfg_;
  std::uint64_t step_ = 0;
  models::GeneratorBank bank_;
  models::Discriminator disc_;
  nn::Adam gen_opt_;
  nn::Adam disc_opt_;
  Affine transform_;
  std::shared_ptr<const std::vector<double>> dataset_;
};

struct StepOptions {
  // Order in which generator losses are evaluated; empty means 0..k-1.
  // Gradients are combined in index order, so the result does not depend on it.
  std::vector<std::size_t> generator_order;
};

/// One iteration: disc_steps_per_gen_step discriminator updates, then one
/// Adam step on all generator parameters using the sum of every generator's
/// gradient. Throws NumericError, leaving the generators untouched, if a loss
/// is not finite.
LogRow train_step(TrainState& state, const StepOptions& options = {});

/// n_total samples, generator i contributing n_total/k plus one more if
/// i < n_total % k, stored in contiguous blocks tagged with generator ids.
/// Values are mapped to data coordinates through `transform`.
data::SampleSet generate_pool(const models::GeneratorBank& bank, std::size_t n_total, std::uint64_t seed,
                              const Affine& transform = {});
data::SampleSet generate_pool(const Checkpoint& ckpt, std::size_t n_total, std::uint64_t seed);

/// Compares a fresh pool with fresh real samples, both of size n.
metrics::Evaluation evaluate_state(const TrainState& state, std::size_t n);

struct TrainOptions {
  // Directory receiving log.csv, ckpt-<step>.json, ckpt-final.json and
  // report.json. Empty: keep everything in memory.
  std::filesystem::path run_dir;
  // Stop once this many iterations are complete (0: cfg.iterations).
  std::uint64_t stop_at = 0;
  std::function<void(const LogRow&)> on_row;
};

struct TrainResult {
  TrainState state;
  TrainLog log;
  std::optional<metrics::Evaluation> final_eval;  // set when the run reached cfg.iterations
};

/// Runs from initialization. On a non-finite loss writes ckpt-nan.json
/// (when run_dir is set) and rethrows the NumericError.
TrainResult train(const config::TrainConfig& cfg, const TrainOptions& options = {});

/// Continues from a checkpoint. `prior` holds the rows already logged; rows
/// beyond the checkpoint's step are dropped.
TrainResult resume(const Checkpoint& ckpt, TrainLog prior, const TrainOptions& options = {});

}  // namespace madgan::train
