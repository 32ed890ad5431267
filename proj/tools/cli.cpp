#include "cli.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <regex>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "madgan/checkpoint.hpp"
#include "madgan/config.hpp"
#include "madgan/errors.hpp"
#include "madgan/gmm.hpp"
#include "madgan/metrics.hpp"
#include "madgan/rng.hpp"
#include "madgan/sample_io.hpp"
#include "madgan/theory.hpp"
#include "madgan/trainer.hpp"
#include "madgan/version.hpp"

namespace madgan::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct TrainFlags {
  std::string config_path;
  std::string preset;
  std::string manifest;
  std::string resume_dir;
  std::string run_dir;
  std::string runs_root = "runs";
  std::optional<std::string> variant;
  std::optional<std::size_t> k;
  std::optional<std::size_t> iterations;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> gen_loss;
  std::optional<double> lambda;
  std::optional<std::size_t> checkpoint_every;
  std::uint64_t stop_at = 0;
  bool dry_run = false;
  bool quiet = false;
};

std::string utc_stamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y%m%dT%H%M%SZ");
  return s.str();
}

config::TrainConfig config_from_manifest(const fs::path& path) {
  const std::string text = io::read_text(path);
  json m;
  try {
    m = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": not valid JSON: " + e.what());
  }
  if (!m.is_object() || !m.contains("config")) throw ParseError(path.string() + ": manifest lacks a config");
  auto cfg = config::parse_config(m.at("config").dump());
  if (m.contains("config_hash") && m.at("config_hash") != config::config_hash(cfg)) {
    throw ParseError(path.string() + ": config_hash does not match the stored config");
  }
  return cfg;
}

config::TrainConfig resolve_config(const TrainFlags& f) {
  const int sources = !f.config_path.empty() + !f.preset.empty() + !f.manifest.empty();
  if (sources > 1) throw ConfigError("config", "give at most one of --config, --preset, --manifest");
  config::TrainConfig cfg;
  if (!f.config_path.empty()) cfg = config::load_config(f.config_path);
  if (!f.preset.empty()) cfg = config::preset(f.preset);
  if (!f.manifest.empty()) cfg = config_from_manifest(f.manifest);
  if (f.variant) cfg.variant = config::parse_variant(*f.variant);
  if (f.k) cfg.k = *f.k;
  if (f.iterations) cfg.iterations = *f.iterations;
  if (f.seed) cfg.seed = *f.seed;
  if (f.gen_loss) cfg.gen_loss = config::parse_gen_loss(*f.gen_loss);
  if (f.lambda) cfg.sim.lambda = *f.lambda;
  if (f.checkpoint_every) cfg.checkpoint_every = *f.checkpoint_every;
  config::validate(cfg);
  return cfg;
}

json manifest_json(const config::TrainConfig& cfg) {
  json m;
  m["format_version"] = 1;
  m["tool"] = "madgan";
  m["tool_version"] = kVersion;
  m["config"] = json::parse(config::canonical_json(cfg));
  m["config_hash"] = config::config_hash(cfg);
  m["seeds"] = {{"train", cfg.seed},
                {"eval_real", derive_seed(cfg.seed, {static_cast<std::uint64_t>(Stream::kEvalReal), cfg.iterations})},
                {"eval_gen", derive_seed(cfg.seed, {static_cast<std::uint64_t>(Stream::kEvalGen), cfg.iterations})}};
  json ckpts = json::array();
  if (cfg.checkpoint_every != 0) {
    for (std::size_t s = cfg.checkpoint_every; s <= cfg.iterations; s += cfg.checkpoint_every) {
      ckpts.push_back("ckpt-" + std::to_string(s) + ".json");
    }
  }
  m["artifacts"] = {{"log", "log.csv"},
                    {"report", "report.json"},
                    {"checkpoints", ckpts},
                    {"final_checkpoint", "ckpt-final.json"}};
  return m;
}

void print_report(const metrics::MetricsReport& r, std::ostream& out) {
  out << "kl " << io::format_double(r.kl_divergence) << "  chi2 " << io::format_double(r.chi_square) << "  modes "
      << r.modes_covered << "\n";
}

int cmd_train(const TrainFlags& f, std::ostream& out) {
  if (!f.resume_dir.empty()) {
    const fs::path dir = f.resume_dir;
    const auto cfg = config_from_manifest(dir / "manifest.json");
    if (fs::exists(dir / "ckpt-final.json")) {
      out << "run already complete: " << dir.string() << "\n";
      return kExitOk;
    }
    std::uint64_t best = 0;
    const std::regex pattern(R"(ckpt-(\d+)\.json)");
    for (const auto& entry : fs::directory_iterator(dir)) {
      std::smatch m;
      const std::string name = entry.path().filename().string();
      if (std::regex_match(name, m, pattern)) best = std::max<std::uint64_t>(best, std::stoull(m[1]));
    }
    train::TrainLog prior;
    prior.k = cfg.k;
    std::optional<Checkpoint> ckpt;
    if (best != 0) {
      ckpt = load_checkpoint(dir / ("ckpt-" + std::to_string(best) + ".json"));
      prior = train::TrainLog::from_csv(io::read_text(dir / "log.csv"));
    }
    train::TrainOptions opts{dir, f.stop_at, nullptr};
    if (!f.quiet) {
      opts.on_row = [&](const train::LogRow& r) {
        if (r.metrics) out << "step " << r.step << "  kl " << r.metrics->kl << "  modes " << r.metrics->modes << "\n";
      };
    }
    auto result = ckpt ? train::resume(*ckpt, std::move(prior), opts) : train::train(cfg, opts);
    out << "resumed from step " << best << ", now at " << result.state.step() << "\n";
    if (result.final_eval) print_report(result.final_eval->report, out);
    return kExitOk;
  }

  const auto cfg = resolve_config(f);
  const std::string hash = config::config_hash(cfg);
  if (f.dry_run) {
    out << config::pretty_json(cfg) << "\n";
    out << "config_hash " << hash << "\n";
    return kExitOk;
  }
  const fs::path dir = f.run_dir.empty() ? fs::path(f.runs_root) / (utc_stamp() + "-" + hash.substr(0, 12)) : fs::path(f.run_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create run directory " + dir.string());
  io::write_text(dir / "manifest.json", manifest_json(cfg).dump(2) + "\n");
  out << "run directory " << dir.string() << "\n";

  train::TrainOptions opts{dir, f.stop_at, nullptr};
  if (!f.quiet) {
    opts.on_row = [&](const train::LogRow& r) {
      if (!r.metrics) return;
      out << "step " << r.step << "  d_loss " << io::format_double(r.d_loss) << "  kl "
          << io::format_double(r.metrics->kl) << "  modes " << r.metrics->modes << std::endl;
    };
  }
  const auto result = train::train(cfg, opts);
  if (result.final_eval) print_report(result.final_eval->report, out);
  return kExitOk;
}

data::GmmSpec spec_from(const std::string& config_path) {
  return config_path.empty() ? data::GmmSpec::five_mode_preset() : config::load_config(config_path).data;
}

int cmd_gen_data(std::size_t n, std::uint64_t seed, const std::string& out_path, const std::string& config_path,
                 unsigned threads, std::ostream& out) {
  if (n == 0) throw ConfigError("n", "--n must be positive");
  const auto spec = spec_from(config_path);
  const auto samples = data::sample(spec, n, seed, threads);
  io::write_samples(out_path, samples, spec.describe());
  out << "wrote " << n << " samples to " << out_path << "\n";
  return kExitOk;
}

struct EvalFlags {
  std::string real;
  std::string gen;
  std::string out;
  std::string bins;
  std::string config_path;
  double bin_width = metrics::kDefaultBinWidth;
  double sigma = 3.0;
  double tau = 0.01;
};

int cmd_eval(const EvalFlags& f, std::ostream& out) {
  if (!(f.bin_width > 0.0)) throw ConfigError("bin-width", "--bin-width must be positive");
  const auto real = io::read_samples(f.real);
  const auto gen = io::read_samples(f.gen);
  if (real.values.empty() || gen.values.empty()) throw ParseError("sample files must not be empty");
  const auto spec = spec_from(f.config_path);
  auto e = metrics::evaluate(real.values, gen.values, spec, metrics::EvalOptions{f.bin_width, f.sigma, f.tau});
  e.report.seed_real = real.seed;
  e.report.seed_gen = gen.seed;
  const std::string report = e.report.to_json() + "\n";
  if (f.out.empty()) {
    out << report;
  } else {
    io::write_text(f.out, report);
  }
  if (!f.bins.empty()) {
    io::write_bins(f.bins + "-real.csv", e.real);
    io::write_bins(f.bins + "-gen.csv", e.gen);
  }
  return kExitOk;
}

std::string fixed(double v, int digits) {
  std::ostringstream s;
  s << std::setprecision(digits) << v;
  return s.str();
}

int cmd_oracle(const OracleOptions& o, std::ostream& out) {
  const auto rows = oracle_checks(o);
  out << std::left << std::setw(52) << "check" << std::setw(16) << "expected" << std::setw(16) << "actual"
      << std::setw(10) << "tol" << "result\n";
  bool all = true;
  for (const auto& r : rows) {
    out << std::left << std::setw(52) << r.check << std::setw(16) << fixed(r.expected, 10) << std::setw(16)
        << fixed(r.actual, 10) << std::setw(10) << fixed(r.tolerance, 3) << (r.pass ? "PASS" : "FAIL") << "\n";
    all = all && r.pass;
  }
  return all ? kExitOk : kExitCheckFailed;
}

}  // namespace

std::vector<OracleRow> oracle_checks(const OracleOptions& o) {
  if (o.k == 0) throw ConfigError("k", "--k must be at least 1");
  std::vector<OracleRow> rows;
  const auto gmm = data::GmmSpec::five_mode_preset();
  const std::string ks = " k=" + std::to_string(o.k);

  const auto matched = theory::matched_set(gmm, o.k);
  matched.validate();
  const auto at_opt = theory::generator_objective_at_optimum(matched);
  const double target = theory::optimum_value(o.k);
  rows.push_back({"generator optimum, direct integral" + ks, target, at_opt.direct, 1e-4,
                  std::abs(at_opt.direct - target) < 1e-4});
  rows.push_back({"generator optimum, KL decomposition" + ks, target, at_opt.kl_form, 1e-4,
                  std::abs(at_opt.kl_form - target) < 1e-4});
  if (o.k == 1) {
    rows.push_back({"generator optimum equals -log 4", -std::log(4.0), at_opt.direct, 1e-4,
                    std::abs(at_opt.direct + std::log(4.0)) < 1e-4});
  }
  auto shifted = matched;
  for (auto& g : shifted.generators) {
    for (double& m : g.means) m += 2.0;
  }
  const double off = theory::generator_objective_at_optimum(shifted).direct;
  rows.push_back({"shifted generators exceed optimum" + ks, target, off, 0.0, off > target + 1e-6});

  double worst_sum = 0.0;
  double worst_uniform = 0.0;
  for (std::size_t i = 0; i < matched.grid.points(); i += 10) {
    const double x = matched.grid.at(i);
    if (matched.p_d(x) + matched.p_g_sum(x) <= 0.0) continue;
    const auto d = theory::optimal_discriminator(matched, x);
    double s = 0.0;
    for (double v : d) {
      s += v;
      worst_uniform = std::max(worst_uniform, std::abs(v - 1.0 / static_cast<double>(o.k + 1)));
    }
    worst_sum = std::max(worst_sum, std::abs(s - 1.0));
  }
  rows.push_back({"optimal discriminator sums to one", 0.0, worst_sum, 1e-12, worst_sum < 1e-12});
  rows.push_back({"matched set gives D = 1/(k+1)" + ks, 0.0, worst_uniform, 1e-12, worst_uniform < 1e-12});

  if (o.fit_discriminator) {
    theory::AnalyticDensitySet set{data::GmmSpec{{0.0}, {1.0}, {1.0}},
                                   {data::GmmSpec{{-4.0}, {1.0}, {1.0}}, data::GmmSpec{{4.0}, {1.0}, {1.0}}},
                                   theory::Grid{-12.0, 12.0, 0.01}};
    theory::DiscriminatorFitOptions fit;
    fit.steps = o.fit_steps;
    fit.seed = o.seed;
    const auto d = theory::fit_discriminator(set, fit);
    const auto gap = theory::empirical_vs_optimal_discriminator(set, d);
    rows.push_back({"fitted discriminator sup gap k=2", 0.0, gap.sup_norm, 0.05, gap.sup_norm < 0.05});
  }

  Rng rng(derive_seed(o.seed, {static_cast<std::uint64_t>(Stream::kInit), 99}));
  double worst = 0.0;
  bool converged = true;
  for (std::size_t t = 0; t < o.instances; ++t) {
    const std::size_t n = 2 + rng.below(9);
    std::vector<double> a(n);
    for (double& v : a) v = rng.uniform(0.1, 10.0);
    const auto closed = theory::simplex_maximizer(a);
    const auto pg = theory::simplex_maximizer_projected_gradient(a);
    converged = converged && pg.converged;
    for (std::size_t i = 0; i < n; ++i) worst = std::max(worst, std::abs(closed[i] - pg.y[i]));
  }
  rows.push_back({"simplex projected gradient vs a/sum(a), " + std::to_string(o.instances) + " cases", 0.0,
                  worst, 1e-6, converged && worst < 1e-6});
  return rows;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"madgan: multi-generator GAN experiments on a 1D Gaussian mixture"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  std::size_t gd_n = 200000;
  std::uint64_t gd_seed = 1;
  std::string gd_out;
  std::string gd_config;
  unsigned gd_threads = 1;
  auto* gen = app.add_subcommand("gen-data", "sample the Gaussian mixture to a CSV file");
  gen->add_option("--n", gd_n, "number of samples")->capture_default_str();
  gen->add_option("--seed", gd_seed, "rng seed")->capture_default_str();
  gen->add_option("--out,-o", gd_out, "output CSV path")->required();
  gen->add_option("--config", gd_config, "take the mixture from this training config");
  gen->add_option("--threads", gd_threads, "sampling threads (output is identical for any value)")
      ->capture_default_str();

  TrainFlags tf;
  auto* tr = app.add_subcommand("train", "train a model and populate a run directory");
  tr->add_option("--config", tf.config_path, "JSON config file");
  tr->add_option("--preset", tf.preset, "named preset")
      ->check(CLI::IsMember(config::preset_names()));
  tr->add_option("--manifest", tf.manifest, "replay the config stored in a run manifest");
  tr->add_option("--resume", tf.resume_dir, "continue a run from its latest checkpoint");
  tr->add_option("--run-dir", tf.run_dir, "run directory (default runs/<timestamp>-<hash>)");
  tr->add_option("--runs-root", tf.runs_root, "parent of generated run directories")->capture_default_str();
  tr->add_option("--variant", tf.variant, "madgan, magan or madgan-sim");
  tr->add_option("--k", tf.k, "number of generators");
  tr->add_option("--iterations", tf.iterations, "training iterations");
  tr->add_option("--seed", tf.seed, "rng seed");
  tr->add_option("--gen-loss", tf.gen_loss, "saturating or nonsat");
  tr->add_option("--lambda", tf.lambda, "MAD-GAN-Sim diversity weight");
  tr->add_option("--checkpoint-every", tf.checkpoint_every, "checkpoint cadence in iterations (0: final only)");
  tr->add_option("--stop-at", tf.stop_at, "stop after this many iterations (for interrupted runs)");
  tr->add_flag("--dry-run", tf.dry_run, "print the resolved config and exit");
  tr->add_flag("--quiet,-q", tf.quiet, "no progress lines");

  EvalFlags ef;
  auto* ev = app.add_subcommand("eval", "compare two sample files");
  ev->add_option("--real", ef.real, "real samples CSV")->required();
  ev->add_option("--gen", ef.gen, "generated samples CSV")->required();
  ev->add_option("--out,-o", ef.out, "report JSON path (default stdout)");
  ev->add_option("--bins", ef.bins, "write <prefix>-real.csv and <prefix>-gen.csv");
  ev->add_option("--config", ef.config_path, "take the mixture from this training config");
  ev->add_option("--bin-width", ef.bin_width, "histogram bin width")->capture_default_str();
  ev->add_option("--sigma", ef.sigma, "mode window half-width in standard deviations")->capture_default_str();
  ev->add_option("--tau", ef.tau, "mass a mode needs to count as covered")->capture_default_str();

  OracleOptions oo;
  auto* oc = app.add_subcommand("oracle-check", "verify the closed-form optimality results numerically");
  oc->add_option("--k", oo.k, "number of generators")->capture_default_str();
  oc->add_option("--instances", oo.instances, "random simplex instances")->capture_default_str();
  oc->add_option("--seed", oo.seed, "rng seed")->capture_default_str();
  oc->add_flag("--fit-discriminator", oo.fit_discriminator, "also fit a discriminator to k=2 Gaussians (slow)");
  oc->add_option("--fit-steps", oo.fit_steps, "discriminator training steps")->capture_default_str();

  std::vector<const char*> argv;
  argv.push_back("madgan");
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*gen) return cmd_gen_data(gd_n, gd_seed, gd_out, gd_config, gd_threads, out);
    if (*tr) return cmd_train(tf, out);
    if (*ev) return cmd_eval(ef, out);
    if (*oc) return cmd_oracle(oo, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "i/o error: " << e.what() << "\n";
    return kExitIo;
  }
  return kExitConfig;
}

int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, out, err);
}

}  // namespace madgan::cli
