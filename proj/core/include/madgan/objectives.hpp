#pragma once

// Loss functions for the three training variants:
//
//  * MAD-GAN: the discriminator classifies a sample as "generator j" or
//    "real" (k+1 classes) and minimizes cross-entropy against the one-hot
//    label; each generator minimizes log(1 - D_{k+1}(G_i(z))).
//  * MA-GAN: k generators against a binary real/fake discriminator.
//  * MAD-GAN-Sim: MA-GAN plus a margin penalty asking each generator's
//    score to exceed the others' by their feature similarity.
//
// Every loss here is minimized. Logs of probabilities are clamped at
// kLogFloor.

#include <cstddef>
#include <span>
#include <vector>

#include "madgan/autodiff.hpp"
#include "madgan/models.hpp"

namespace madgan::objectives {

inline constexpr double kLogFloor = 1e-12;

enum class GenLossKind {
  kSaturating,     // mean log(1 - D)
  kNonSaturating,  // mean -log D
};

enum class Similarity {
  kClampedCosine,  // max(0, cos) so the margin lies in [0, 1]
  kCosine,         // raw cosine in [-1, 1]
};

enum class Aggregation {
  kAverage,      // mean over the other generators
  kMaxViolator,  // the single generator with the largest score + margin
};

struct SimConfig {
  double lambda = 1e-3;
  Similarity similarity = Similarity::kClampedCosine;
  Aggregation aggregation = Aggregation::kAverage;
};

/// Dirac delta over `classes` entries with its one at `index` (0-based;
/// index k is the "real" class for a k-generator discriminator).
struct OneHotTarget {
  std::size_t index = 0;
  std::size_t classes = 0;

  Tensor row() const;
};

// One-hot matrix with one row per target.
Tensor one_hot_matrix(std::span<const OneHotTarget> targets);

/// Mean cross-entropy of the k+1-way discriminator over the stacked batch
/// [real; fake_0; ...; fake_{k-1}], with real rows labeled k and rows of
/// fake_i labeled i. Throws ContractError on an empty batch or a mode mismatch.
ad::Var disc_loss_madgan(ad::Tape& tape, const models::Discriminator& d, const ad::Var& real,
                         std::span<const ad::Var> fakes);

// Generator loss from the discriminator's probability of "real", per `kind`.
ad::Var gen_loss_from_real_score(const ad::Var& real_score, GenLossKind kind);

/// Generator loss against a softmax-mode discriminator using D_{k+1}.
ad::Var gen_loss_madgan(ad::Tape& tape, const models::Discriminator& d, const ad::Var& fake, GenLossKind kind);

/// Binary GAN discriminator loss: -mean log D(real) - mean log(1 - D(fake)),
/// evaluated from logits with softplus. All fakes are pooled.
ad::Var disc_loss_magan(ad::Tape& tape, const models::Discriminator& d, const ad::Var& real,
                        std::span<const ad::Var> fakes);
ad::Var gen_loss_magan(ad::Tape& tape, const models::Discriminator& d, const ad::Var& fake, GenLossKind kind);

struct MaganLosses {
  ad::Var disc;
  std::vector<ad::Var> gen;
};
MaganLosses losses_magan(ad::Tape& tape, const models::Discriminator& d, const ad::Var& real,
                         std::span<const ad::Var> fakes, GenLossKind kind);

/// Slack of the diversity constraint for generator i on one sample:
///
///   nu = D(G_i) - 1/(k-1) * sum_{j != i} (D(G_j) + sim(psi_i, psi_j))
///
/// `other_scores` and `similarities` hold the k-1 terms for j != i.
/// Throws ContractError if there are no other generators.
double sim_slack(double score_i, std::span<const double> other_scores, std::span<const double> similarities);

/// Row-wise slack for a batch. With kMaxViolator the average is replaced
/// by the j maximizing D(G_j) + sim(psi_i, psi_j).
ad::Var sim_slack(const ad::Var& score_i, std::span<const ad::Var> other_scores, std::span<const ad::Var> similarities,
                  Aggregation aggregation);

/// mean log(1 - s_i) - lambda * mean min(0, nu). Rows with nu >= 0 fall back
/// to the plain saturating loss; lambda == 0 gives exactly that loss.
ad::Var sim_generator_loss(const ad::Var& score_i, std::span<const ad::Var> other_scores,
                           std::span<const ad::Var> similarities, const SimConfig& cfg);

/// Full MAD-GAN-Sim loss of generator i on noise z. The same z is passed
/// through every generator; only the path through G_i is differentiated,
/// the other generators' samples enter as constants.
ad::Var gen_loss_madgan_sim(ad::Tape& tape, const models::Discriminator& d, const models::GeneratorBank& bank,
                            std::size_t i, const Tensor& z, const SimConfig& cfg);

/// a.b / (|a||b|). A zero vector gives 0 and logs a warning.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

// Maps a raw cosine to the margin used in the constraint.
ad::Var similarity_margin(const ad::Var& psi_i, const ad::Var& psi_j, Similarity similarity);

}  // namespace madgan::objectives
