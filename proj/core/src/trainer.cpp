#include "madgan/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>

#include <spdlog/spdlog.h>

#include "madgan/errors.hpp"
#include "madgan/objectives.hpp"
#include "madgan/rng.hpp"
#include "madgan/sample_io.hpp"

namespace madgan::train {
namespace {

using config::Variant;

nn::AdamOptions adam_options(const config::TrainConfig& c) {
  return nn::AdamOptions{.learning_rate = c.learning_rate, .beta1 = c.beta1, .beta2 = c.beta2, .epsilon = c.epsilon};
}

std::uint64_t key(Stream s) { return static_cast<std::uint64_t>(s); }

std::shared_ptr<const std::vector<double>> make_dataset(const config::TrainConfig& c, const Affine& t) {
  auto set = data::sample(c.data, c.dataset_size, derive_seed(c.seed, {key(Stream::kDataset)}));
  for (double& x : set.values) x = t.to_model(x);
  return std::make_shared<const std::vector<double>>(std::move(set.values));
}

// Number of samples generator i contributes to a pool of n.
std::size_t share(std::size_t n, std::size_t k, std::size_t i) { return n / k + (i < n % k ? 1 : 0); }

void require_finite(double v, const std::string& what, std::uint64_t step) {
  if (!std::isfinite(v)) {
    throw NumericError("non-finite " + what + " at step " + std::to_string(step + 1));
  }
}

}  // namespace

Affine data_transform(const config::TrainConfig& cfg) {
  if (!cfg.standardize) return {};
  const auto m = data::mixture_moments(cfg.data);
  return Affine{m.mean, m.stddev > 0.0 ? m.stddev : 1.0};
}

// ---- TrainLog ---------------------------------------------------------------

std::string TrainLog::header() const {
  std::string h = "step,d_loss";
  for (std::size_t i = 0; i < k; ++i) h += ",g" + std::to_string(i + 1) + "_loss";
  return h + ",kl,chi2,modes";
}

std::string TrainLog::format_row(const LogRow& row) const {
  std::string s = std::to_string(row.step) + "," + io::format_double(row.d_loss);
  for (double g : row.g_loss) s += "," + io::format_double(g);
  if (row.metrics) {
    s += "," + io::format_double(row.metrics->kl) + "," + io::format_double(row.metrics->chi2) + "," +
         std::to_string(row.metrics->modes);
  } else {
    s += ",,,";
  }
  return s;
}

std::string TrainLog::to_csv() const {
  std::string out = header() + "\n";
  for (const auto& r : rows) out += format_row(r) + "\n";
  return out;
}

TrainLog TrainLog::from_csv(std::string_view text) {
  auto split = [](std::string_view line) {
    std::vector<std::string_view> cells;
    for (;;) {
      const auto c = line.find(',');
      cells.push_back(line.substr(0, c));
      if (c == std::string_view::npos) break;
      line.remove_prefix(c + 1);
    }
    return cells;
  };
  auto number = [](std::string_view s, auto& out, std::size_t line) {
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
      throw ParseError("log line " + std::to_string(line) + ": bad number '" + std::string(s) + "'");
    }
  };

  TrainLog log;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (line.empty()) continue;
    const auto cells = split(line);
    if (line_no == 1) {
      if (cells.size() < 5 || cells[0] != "step") throw ParseError("log line 1: missing header");
      log.k = cells.size() - 5;
      continue;
    }
    if (cells.size() != log.k + 5) throw ParseError("log line " + std::to_string(line_no) + ": wrong column count");
    LogRow row;
    number(cells[0], row.step, line_no);
    number(cells[1], row.d_loss, line_no);
    row.g_loss.resize(log.k);
    for (std::size_t i = 0; i < log.k; ++i) number(cells[2 + i], row.g_loss[i], line_no);
    if (!cells[2 + log.k].empty()) {
      PeriodicMetrics m;
      number(cells[2 + log.k], m.kl, line_no);
      number(cells[3 + log.k], m.chi2, line_no);
      number(cells[4 + log.k], m.modes, line_no);
      row.metrics = m;
    }
    log.rows.push_back(std::move(row));
  }
  return log;
}

// ---- TrainState -------------------------------------------------------------

TrainState::TrainState(const config::TrainConfig& cfg)
    : cfg_((config::validate(cfg), cfg)),
      bank_(cfg.generator_spec(), cfg.seed),
      disc_(cfg.discriminator_spec(), cfg.seed),
      gen_opt_(bank_.parameters(), adam_options(cfg)),
      disc_opt_(disc_.parameters(), adam_options(cfg)),
      transform_(data_transform(cfg)),
      dataset_(make_dataset(cfg, transform_)) {}

Checkpoint TrainState::to_checkpoint() const {
  Checkpoint c;
  c.step = step_;
  c.seed = cfg_.seed;
  c.config_json = config::canonical_json(cfg_);
  for (const auto& [name, t] : models::parameter_values(bank_.registry())) c.parameters[name] = t;
  for (const auto& [name, t] : models::parameter_values(disc_.registry())) c.parameters[name] = t;
  c.optimizers["generator"] = OptimizerState{gen_opt_.steps(), gen_opt_.options(), gen_opt_.snapshot()};
  c.optimizers["discriminator"] = OptimizerState{disc_opt_.steps(), disc_opt_.options(), disc_opt_.snapshot()};
  return c;
}

TrainState TrainState::from_checkpoint(const Checkpoint& ckpt) {
  config::TrainConfig cfg;
  try {
    cfg = config::parse_config(ckpt.config_json);
  } catch (const ConfigError& e) {
    throw ParseError(std::string("checkpoint config: ") + e.what());
  }
  if (cfg.seed != ckpt.seed) throw ParseError("checkpoint seed does not match its config");
  TrainState s(cfg);
  s.step_ = ckpt.step;
  std::map<std::string, Tensor> gen_values;
  std::map<std::string, Tensor> disc_values;
  for (const auto& [name, t] : ckpt.parameters) {
    (s.bank_.registry().contains(name) ? gen_values : disc_values)[name] = t;
  }
  models::assign_parameters(s.bank_.registry(), gen_values);
  models::assign_parameters(s.disc_.registry(), disc_values);
  for (const char* name : {"generator", "discriminator"}) {
    if (!ckpt.optimizers.count(name)) throw ParseError(std::string("checkpoint lacks optimizer '") + name + "'");
  }
  const auto& g = ckpt.optimizers.at("generator");
  const auto& d = ckpt.optimizers.at("discriminator");
  s.gen_opt_.restore(g.step, g.moments);
  s.disc_opt_.restore(d.step, d.moments);
  return s;
}

// ---- one iteration ----------------------------------------------------------

struct StepAccess {
  static void advance(TrainState& s) { ++s.step_; }
};

LogRow train_step(TrainState& state, const StepOptions& options) {
  const config::TrainConfig& cfg = state.config();
  const std::uint64_t t = state.step();
  const std::size_t k = cfg.k;
  const std::size_t batch = cfg.batch_size;
  models::GeneratorBank& bank = state.generators();
  const bool pooled = cfg.variant != Variant::kMadgan;

  std::optional<models::Discriminator> before;
  if (cfg.disc_snapshot == config::DiscSnapshot::kPreUpdate) before = state.discriminator().clone();

  LogRow row;
  row.step = t + 1;
  for (std::size_t sub = 0; sub < cfg.disc_steps_per_gen_step; ++sub) {
    models::Discriminator& d = state.discriminator();
    const auto& data = state.dataset();
    Rng pick(derive_seed(cfg.seed, {key(Stream::kRealBatch), t, sub}));
    std::vector<double> real(batch);
    for (double& x : real) x = data[pick.below(data.size())];

    ad::Tape tape;
    ad::Var real_var = tape.constant(Tensor::column(real));
    std::vector<ad::Var> fakes;
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t m = pooled ? share(batch, k, i) : batch;
      if (m == 0) continue;
      Rng noise(derive_seed(cfg.seed, {key(Stream::kDiscNoise), t, sub, i}));
      fakes.push_back(tape.constant(bank.generate(i, bank.sample_noise(m, noise))));
    }
    ad::Var loss = pooled ? objectives::disc_loss_magan(tape, d, real_var, fakes)
                          : objectives::disc_loss_madgan(tape, d, real_var, fakes);
    row.d_loss = loss.value().item();
    require_finite(row.d_loss, "discriminator loss", t);
    state.discriminator_optimizer().step(tape.backward(loss));
  }

  const models::Discriminator& d = before ? *before : state.discriminator();
  std::vector<std::size_t> order = options.generator_order;
  if (order.empty()) {
    order.resize(k);
    for (std::size_t i = 0; i < k; ++i) order[i] = i;
  }
  {
    auto sorted = order;
    std::sort(sorted.begin(), sorted.end());
    bool ok = sorted.size() == k;
    for (std::size_t i = 0; ok && i < k; ++i) ok = sorted[i] == i;
    if (!ok) throw ContractError("generator_order must permute 0..k-1");
  }

  std::vector<ad::GradientMap> grads(k);
  row.g_loss.assign(k, 0.0);
  for (std::size_t i : order) {
    ad::Tape tape;
    for (const auto& p : d.parameters()) tape.freeze(*p);
    Rng noise(derive_seed(cfg.seed, {key(Stream::kGenNoise), t, i}));
    const Tensor z = bank.sample_noise(batch, noise);
    ad::Var loss;
    switch (cfg.variant) {
      case Variant::kMadgan:
        loss = objectives::gen_loss_madgan(tape, d, bank.generate(tape, i, tape.constant(z)), cfg.gen_loss);
        break;
      case Variant::kMagan:
        loss = objectives::gen_loss_magan(tape, d, bank.generate(tape, i, tape.constant(z)), cfg.gen_loss);
        break;
      case Variant::kMadganSim:
        loss = objectives::gen_loss_madgan_sim(tape, d, bank, i, z, cfg.sim);
        break;
    }
    row.g_loss[i] = loss.value().item();
    require_finite(row.g_loss[i], "generator " + std::to_string(i + 1) + " loss", t);
    grads[i] = tape.backward(loss);
  }

  ad::GradientMap total;
  for (std::size_t i = 0; i < k; ++i) {
    for (const auto& p : bank.parameters()) {
      if (grads[i].contains(*p)) total.accumulate(*p, grads[i].get(*p));
    }
  }
  if (cfg.trunk_reduction == config::TrunkReduction::kMean) {
    for (const auto& p : bank.trunk_parameters()) total.scale(*p, 1.0 / static_cast<double>(k));
  }
  state.generator_optimizer().step(total);
  StepAccess::advance(state);
  return row;
}

// ---- sampling and evaluation ------------------------------------------------

data::SampleSet generate_pool(const models::GeneratorBank& bank, std::size_t n_total, std::uint64_t seed,
                              const Affine& transform) {
  constexpr std::size_t kChunk = 16384;
  data::SampleSet out;
  out.seed = seed;
  out.source = data::SampleSource{data::SourceKind::kGenerator, 0};
  out.values.reserve(n_total);
  out.generator_ids.reserve(n_total);
  for (std::size_t i = 0; i < bank.k(); ++i) {
    Rng rng(derive_seed(seed, {key(Stream::kPool), i}));
    for (std::size_t left = share(n_total, bank.k(), i); left > 0;) {
      const std::size_t m = std::min(left, kChunk);
      const Tensor x = bank.generate(i, bank.sample_noise(m, rng));
      for (double v : x.values()) out.values.push_back(transform.to_data(v));
      out.generator_ids.insert(out.generator_ids.end(), m, static_cast<std::uint32_t>(i));
      left -= m;
    }
  }
  return out;
}

data::SampleSet generate_pool(const Checkpoint& ckpt, std::size_t n_total, std::uint64_t seed) {
  const TrainState state = TrainState::from_checkpoint(ckpt);
  return generate_pool(state.generators(), n_total, seed, state.transform());
}

metrics::Evaluation evaluate_state(const TrainState& state, std::size_t n) {
  const auto& cfg = state.config();
  const std::uint64_t real_seed = derive_seed(cfg.seed, {key(Stream::kEvalReal), state.step()});
  const std::uint64_t gen_seed = derive_seed(cfg.seed, {key(Stream::kEvalGen), state.step()});
  const auto real = data::sample(cfg.data, n, real_seed);
  const auto gen = generate_pool(state.generators(), n, gen_seed, state.transform());
  metrics::EvalOptions opts{cfg.eval.bin_width, cfg.eval.coverage_sigma, cfg.eval.coverage_tau};
  auto e = metrics::evaluate(real.values, gen.values, cfg.data, opts);
  e.report.seed_real = real_seed;
  e.report.seed_gen = gen_seed;
  return e;
}

// ---- driver -----------------------------------------------------------------

namespace {

class RunWriter {
 public:
  RunWriter(const std::filesystem::path& dir, const TrainLog& prior) : dir_(dir) {
    if (dir_.empty()) return;
    if (!std::filesystem::is_directory(dir_)) throw IoError("run directory does not exist: " + dir_.string());
    io::write_text(dir_ / "log.csv", prior.to_csv());
    log_.open(dir_ / "log.csv", std::ios::app | std::ios::binary);
    if (!log_) throw IoError("cannot append to " + (dir_ / "log.csv").string());
  }

  void row(const TrainLog& log, const LogRow& r) {
    if (!log_.is_open()) return;
    log_ << log.format_row(r) << '\n';
    if (r.metrics) log_.flush();
  }

  void checkpoint(const TrainState& s, const std::string& name) {
    if (dir_.empty()) return;
    log_.flush();
    save_checkpoint(s.to_checkpoint(), dir_ / name);
  }

  void report(const metrics::Evaluation& e) {
    if (dir_.empty()) return;
    io::write_text(dir_ / "report.json", e.report.to_json() + "\n");
  }

  bool enabled() const { return !dir_.empty(); }

 private:
  std::filesystem::path dir_;
  std::ofstream log_;
};

TrainResult run(TrainState state, TrainLog log, const TrainOptions& options) {
  const config::TrainConfig cfg = state.config();
  const std::uint64_t stop = options.stop_at == 0 ? cfg.iterations : std::min<std::uint64_t>(options.stop_at, cfg.iterations);
  RunWriter writer(options.run_dir, log);
  while (state.step() < stop) {
    LogRow row;
    try {
      row = train_step(state);
    } catch (const NumericError& e) {
      spdlog::error("{}", e.what());
      if (writer.enabled()) {
        writer.checkpoint(state, "ckpt-nan.json");
        spdlog::error("diagnostic state written to {}", (options.run_dir / "ckpt-nan.json").string());
      }
      throw;
    }
    if (cfg.eval.every != 0 && state.step() % cfg.eval.every == 0) {
      const auto e = evaluate_state(state, cfg.eval.periodic_samples);
      row.metrics = PeriodicMetrics{e.report.kl_divergence, e.report.chi_square, e.report.modes_covered};
    }
    const bool logged = state.step() % cfg.log_every == 0 || row.metrics || state.step() == cfg.iterations;
    if (logged) {
      writer.row(log, row);
      if (options.on_row) options.on_row(row);
      log.rows.push_back(std::move(row));
    }
    if (cfg.checkpoint_every != 0 && state.step() % cfg.checkpoint_every == 0) {
      writer.checkpoint(state, "ckpt-" + std::to_string(state.step()) + ".json");
    }
  }
  TrainResult result{std::move(state), std::move(log), std::nullopt};
  if (result.state.step() == cfg.iterations) {
    writer.checkpoint(result.state, "ckpt-final.json");
    result.final_eval = evaluate_state(result.state, cfg.eval.final_samples);
    writer.report(*result.final_eval);
  }
  return result;
}

}  // namespace

TrainResult train(const config::TrainConfig& cfg, const TrainOptions& options) {
  TrainState state(cfg);
  TrainLog log;
  log.k = cfg.k;
  return run(std::move(state), std::move(log), options);
}

TrainResult resume(const Checkpoint& ckpt, TrainLog prior, const TrainOptions& options) {
  TrainState state = TrainState::from_checkpoint(ckpt);
  if (prior.k == 0) prior.k = state.config().k;
  if (prior.k != state.config().k) throw ParseError("log has a different generator count than the checkpoint");
  std::erase_if(prior.rows, [&](const LogRow& r) { return r.step > ckpt.step; });
  return run(std::move(state), std::move(prior), options);
}

}  // namespace madgan::train
