#include "madgan/objectives.hpp"

#include <cmath>

#include <spdlog/spdlog.h>

#include "madgan/errors.hpp"

namespace madgan::objectives {
namespace {

using models::DiscMode;

void require_mode(const models::Discriminator& d, DiscMode mode, const char* what) {
  if (d.mode() != mode) {
    throw ContractError(std::string(what) + " requires a " + (mode == DiscMode::kSoftmax ? "softmax" : "sigmoid") +
                        "-mode discriminator");
  }
}

ad::Var constant_like(const ad::Var& v, double fill) { return v.tape()->constant(Tensor(Shape{}, fill)); }

}  // namespace

Tensor OneHotTarget::row() const {
  if (index >= classes) throw ContractError("one-hot index out of range");
  Tensor r({1, classes});
  r[index] = 1.0;
  return r;
}

Tensor one_hot_matrix(std::span<const OneHotTarget> targets) {
  if (targets.empty()) return Tensor({0, 0});
  const std::size_t c = targets.front().classes;
  Tensor out({targets.size(), c});
  for (std::size_t r = 0; r < targets.size(); ++r) {
    if (targets[r].classes != c || targets[r].index >= c) throw ContractError("inconsistent one-hot targets");
    out.at(r, targets[r].index) = 1.0;
  }
  return out;
}

ad::Var disc_loss_madgan(ad::Tape& tape, const models::Discriminator& d, const ad::Var& real,
                         std::span<const ad::Var> fakes) {
  require_mode(d, DiscMode::kSoftmax, "disc_loss_madgan");
  if (fakes.size() != d.k()) {
    throw ContractError("disc_loss_madgan: expected " + std::to_string(d.k()) + " fake batches, got " +
                        std::to_string(fakes.size()));
  }
  std::vector<ad::Var> parts{real};
  std::vector<std::size_t> labels(real.value().rows(), d.real_index());
  for (std::size_t i = 0; i < fakes.size(); ++i) {
    parts.push_back(fakes[i]);
    labels.insert(labels.end(), fakes[i].value().rows(), i);
  }
  if (real.value().rows() == 0 || labels.size() == real.value().rows()) {
    throw ContractError("disc_loss_madgan: empty real or fake batch");
  }
  for (const auto& f : fakes) {
    if (f.value().rows() == 0) throw ContractError("disc_loss_madgan: empty fake batch");
  }
  ad::Var logits = d.logits(tape, ad::concat_rows(parts));
  return ad::softmax_cross_entropy(logits, labels);
}

ad::Var gen_loss_from_real_score(const ad::Var& real_score, GenLossKind kind) {
  if (kind == GenLossKind::kSaturating) {
    ad::Var one = constant_like(real_score, 1.0);
    return ad::mean(ad::log_clamped(ad::sub(one, real_score), kLogFloor));
  }
  return ad::neg(ad::mean(ad::log_clamped(real_score, kLogFloor)));
}

ad::Var gen_loss_madgan(ad::Tape& tape, const models::Discriminator& d, const ad::Var& fake, GenLossKind kind) {
  require_mode(d, DiscMode::kSoftmax, "gen_loss_madgan");
  return gen_loss_from_real_score(d.real_score(tape, fake), kind);
}

ad::Var disc_loss_magan(ad::Tape& tape, const models::Discriminator& d, const ad::Var& real,
                        std::span<const ad::Var> fakes) {
  require_mode(d, DiscMode::kSigmoid, "disc_loss_magan");
  if (fakes.empty() || real.value().rows() == 0) throw ContractError("disc_loss_magan: empty batch");
  std::vector<ad::Var> nonempty;
  for (const auto& f : fakes) {
    if (f.value().rows() > 0) nonempty.push_back(f);
  }
  if (nonempty.empty()) throw ContractError("disc_loss_magan: empty fake batch");
  ad::Var pooled = nonempty.size() == 1 ? nonempty.front() : ad::concat_rows(nonempty);
  // -log sigmoid(l) = softplus(-l), -log(1 - sigmoid(l)) = softplus(l)
  ad::Var real_term = ad::mean(ad::softplus(ad::neg(d.logits(tape, real))));
  ad::Var fake_term = ad::mean(ad::softplus(d.logits(tape, pooled)));
  return ad::add(real_term, fake_term);
}

ad::Var gen_loss_magan(ad::Tape& tape, const models::Discriminator& d, const ad::Var& fake, GenLossKind kind) {
  require_mode(d, DiscMode::kSigmoid, "gen_loss_magan");
  return gen_loss_from_real_score(d.real_score(tape, fake), kind);
}

MaganLosses losses_magan(ad::Tape& tape, const models::Discriminator& d, const ad::Var& real,
                         std::span<const ad::Var> fakes, GenLossKind kind) {
  MaganLosses out{disc_loss_magan(tape, d, real, fakes), {}};
  for (const auto& f : fakes) out.gen.push_back(gen_loss_magan(tape, d, f, kind));
  return out;
}

double sim_slack(double score_i, std::span<const double> other_scores, std::span<const double> similarities) {
  if (other_scores.empty()) throw ContractError("sim_slack needs at least two generators");
  if (other_scores.size() != similarities.size()) throw ContractError("sim_slack: score/similarity count mismatch");
  double nu = 0.0;
  for (std::size_t j = 0; j < other_scores.size(); ++j) nu += other_scores[j] + similarities[j];
  return score_i - nu / static_cast<double>(other_scores.size());
}

ad::Var sim_slack(const ad::Var& score_i, std::span<const ad::Var> other_scores, std::span<const ad::Var> similarities,
                  Aggregation aggregation) {
  if (other_scores.empty()) throw ContractError("sim_slack needs at least two generators");
  if (other_scores.size() != similarities.size()) throw ContractError("sim_slack: score/similarity count mismatch");
  std::vector<ad::Var> terms;
  terms.reserve(other_scores.size());
  for (std::size_t j = 0; j < other_scores.size(); ++j) terms.push_back(ad::add(other_scores[j], similarities[j]));

  if (aggregation == Aggregation::kAverage) {
    ad::Var acc = terms.front();
    for (std::size_t j = 1; j < terms.size(); ++j) acc = ad::add(acc, terms[j]);
    return ad::sub(score_i, ad::scale(acc, 1.0 / static_cast<double>(terms.size())));
  }

  // Per row, select the term with the largest value through a constant mask.
  const std::size_t rows = score_i.value().rows();
  std::vector<std::size_t> best(rows, 0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 1; j < terms.size(); ++j) {
      if (terms[j].value()[r] > terms[best[r]].value()[r]) best[r] = j;
    }
  }
  ad::Tape& tape = *score_i.tape();
  ad::Var selected;
  for (std::size_t j = 0; j < terms.size(); ++j) {
    Tensor mask(terms[j].value().shape());
    for (std::size_t r = 0; r < rows; ++r) mask[r] = best[r] == j ? 1.0 : 0.0;
    ad::Var part = ad::mul(terms[j], tape.constant(std::move(mask)));
    selected = j == 0 ? part : ad::add(selected, part);
  }
  return ad::sub(score_i, selected);
}

ad::Var sim_generator_loss(const ad::Var& score_i, std::span<const ad::Var> other_scores,
                           std::span<const ad::Var> similarities, const SimConfig& cfg) {
  if (cfg.lambda < 0.0) throw ContractError("sim lambda must be nonnegative");
  ad::Var base = gen_loss_from_real_score(score_i, GenLossKind::kSaturating);
  ad::Var nu = sim_slack(score_i, other_scores, similarities, cfg.aggregation);
  ad::Var penalty = ad::mean(ad::min_zero(nu));
  return ad::sub(base, ad::scale(penalty, cfg.lambda));
}

ad::Var similarity_margin(const ad::Var& psi_i, const ad::Var& psi_j, Similarity similarity) {
  ad::Var cos = ad::row_cosine(psi_i, psi_j);
  return similarity == Similarity::kClampedCosine ? ad::max_zero(cos) : cos;
}

ad::Var gen_loss_madgan_sim(ad::Tape& tape, const models::Discriminator& d, const models::GeneratorBank& bank,
                            std::size_t i, const Tensor& z, const SimConfig& cfg) {
  const std::size_t k = bank.k();
  if (k < 2) throw ContractError("MAD-GAN-Sim needs k >= 2 generators");
  if (i >= k) throw ContractError("generator index " + std::to_string(i) + " out of range");

  auto score_of = [&](const ad::Var& feats) {
    ad::Var l = d.logits_from_features(tape, feats);
    return d.mode() == DiscMode::kSoftmax ? ad::column(ad::softmax(l), d.real_index()) : ad::sigmoid(l);
  };

  ad::Var x_i = bank.generate(tape, i, tape.constant(z));
  ad::Var psi_i = d.features(tape, x_i);
  ad::Var s_i = score_of(psi_i);

  std::vector<ad::Var> scores;
  std::vector<ad::Var> sims;
  for (std::size_t j = 0; j < k; ++j) {
    if (j == i) continue;
    ad::Var x_j = tape.constant(bank.generate(j, z));
    ad::Var psi_j = d.features(tape, x_j);
    scores.push_back(score_of(psi_j));
    sims.push_back(similarity_margin(psi_i, psi_j, cfg.similarity));
  }
  return sim_generator_loss(s_i, scores, sims, cfg);
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("cosine_similarity: vector lengths differ");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) {
    spdlog::warn("cosine_similarity: zero vector, returning 0");
    return 0.0;
  }
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace madgan::objectives
