#include "madgan/config.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "madgan/errors.hpp"

namespace madgan::config {
namespace {

using nlohmann::json;

const char* similarity_name(objectives::Similarity s) {
  return s == objectives::Similarity::kCosine ? "cosine" : "clamped-cosine";
}
const char* aggregation_name(objectives::Aggregation a) {
  return a == objectives::Aggregation::kMaxViolator ? "max-violator" : "average";
}

json to_json(const TrainConfig& c) {
  json j;
  j["variant"] = variant_name(c.variant);
  j["k"] = c.k;
  j["batch_size"] = c.batch_size;
  j["learning_rate"] = c.learning_rate;
  j["adam"] = {{"beta1", c.beta1}, {"beta2", c.beta2}, {"epsilon", c.epsilon}};
  j["iterations"] = c.iterations;
  j["seed"] = c.seed;
  j["disc_steps_per_gen_step"] = c.disc_steps_per_gen_step;
  j["gen_loss"] = gen_loss_name(c.gen_loss);
  j["sim"] = {{"lambda", c.sim.lambda},
              {"similarity", similarity_name(c.sim.similarity)},
              {"aggregation", aggregation_name(c.sim.aggregation)}};
  j["data"] = {{"means", c.data.means}, {"stds", c.data.stds}, {"weights", c.data.weights}};
  j["dataset_size"] = c.dataset_size;
  j["standardize"] = c.standardize;
  j["checkpoint_every"] = c.checkpoint_every;
  j["log_every"] = c.log_every;
  j["disc_snapshot"] = c.disc_snapshot == DiscSnapshot::kPreUpdate ? "pre-update" : "post-update";
  j["trunk_reduction"] = c.trunk_reduction == TrunkReduction::kMean ? "mean" : "sum";
  j["network"] = {{"noise_dim", c.noise_dim},
                  {"gen_hidden", c.gen_hidden},
                  {"disc_hidden", c.disc_hidden},
                  {"leaky_slope", c.leaky_slope}};
  j["eval"] = {{"every", c.eval.every},
               {"periodic_samples", c.eval.periodic_samples},
               {"final_samples", c.eval.final_samples},
               {"bin_width", c.eval.bin_width},
               {"coverage_sigma", c.eval.coverage_sigma},
               {"coverage_tau", c.eval.coverage_tau}};
  return j;
}

// Line (1-based) of the first occurrence of "key" in text, 0 if absent.
std::size_t line_of_key(std::string_view text, std::string_view key) {
  const std::string quoted = "\"" + std::string(key) + "\"";
  const auto pos = text.find(quoted);
  if (pos == std::string_view::npos) return 0;
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(pos), '\n'));
}

class Reader {
 public:
  explicit Reader(std::string_view text) : text_(text) {}

  [[noreturn]] void fail(const std::string& path, const std::string& what) const {
    const auto leaf = path.substr(path.rfind('.') == std::string::npos ? 0 : path.rfind('.') + 1);
    const std::size_t line = line_of_key(text_, leaf);
    throw ConfigError(path, line != 0 ? what + " (line " + std::to_string(line) + ")" : what);
  }

  void check_keys(const json& obj, const std::string& prefix, const std::set<std::string>& allowed) const {
    if (!obj.is_object()) fail(prefix.empty() ? "<root>" : prefix, "expected an object");
    for (const auto& [key, _] : obj.items()) {
      if (!allowed.count(key)) fail(join(prefix, key), "unknown key");
    }
  }

  static std::string join(const std::string& prefix, const std::string& key) {
    return prefix.empty() ? key : prefix + "." + key;
  }

  void count(const json& obj, const std::string& prefix, const char* key, std::size_t& out) const {
    if (!obj.contains(key)) return;
    const auto& v = obj.at(key);
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
      fail(join(prefix, key), "expected a nonnegative integer");
    }
    out = v.get<std::size_t>();
  }
  void u64(const json& obj, const std::string& prefix, const char* key, std::uint64_t& out) const {
    std::size_t tmp = out;
    count(obj, prefix, key, tmp);
    out = tmp;
  }
  void real(const json& obj, const std::string& prefix, const char* key, double& out) const {
    if (!obj.contains(key)) return;
    const auto& v = obj.at(key);
    if (!v.is_number()) fail(join(prefix, key), "expected a number");
    out = v.get<double>();
  }
  std::string str(const json& obj, const std::string& prefix, const char* key) const {
    const auto& v = obj.at(key);
    if (!v.is_string()) fail(join(prefix, key), "expected a string");
    return v.get<std::string>();
  }
  std::vector<double> reals(const json& obj, const std::string& prefix, const char* key) const {
    const auto& v = obj.at(key);
    if (!v.is_array()) fail(join(prefix, key), "expected an array of numbers");
    std::vector<double> out;
    for (const auto& e : v) {
      if (!e.is_number()) fail(join(prefix, key), "expected an array of numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }

  template <typename F>
  auto choice(const std::string& path, F&& parse) const {
    try {
      return parse();
    } catch (const ConfigError& e) {
      fail(path, e.detail());
    }
  }

 private:
  std::string_view text_;
};

}  // namespace

const char* variant_name(Variant v) noexcept {
  switch (v) {
    case Variant::kMadgan: return "madgan";
    case Variant::kMagan: return "magan";
    case Variant::kMadganSim: return "madgan-sim";
  }
  return "?";
}

Variant parse_variant(std::string_view name) {
  if (name == "madgan") return Variant::kMadgan;
  if (name == "magan") return Variant::kMagan;
  if (name == "madgan-sim") return Variant::kMadganSim;
  throw ConfigError("variant", "unknown variant '" + std::string(name) + "' (expected one of: madgan, magan, madgan-sim)");
}

const char* gen_loss_name(objectives::GenLossKind kind) noexcept {
  return kind == objectives::GenLossKind::kNonSaturating ? "nonsat" : "saturating";
}

objectives::GenLossKind parse_gen_loss(std::string_view name) {
  if (name == "saturating") return objectives::GenLossKind::kSaturating;
  if (name == "nonsat") return objectives::GenLossKind::kNonSaturating;
  throw ConfigError("gen_loss", "unknown generator loss '" + std::string(name) + "' (expected one of: saturating, nonsat)");
}

models::GeneratorSpec TrainConfig::generator_spec() const {
  models::GeneratorSpec s;
  s.k = k;
  s.noise_dim = noise_dim;
  s.hidden = gen_hidden;
  return s;
}

models::DiscriminatorSpec TrainConfig::discriminator_spec() const {
  models::DiscriminatorSpec s;
  s.mode = disc_mode();
  s.k = k;
  s.hidden = disc_hidden;
  s.leaky_slope = leaky_slope;
  return s;
}

void validate(const TrainConfig& c) {
  auto positive = [](const char* field, std::size_t v) {
    if (v == 0) throw ConfigError(field, "must be positive");
  };
  auto positive_real = [](const char* field, double v) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw ConfigError(field, "must be a positive finite number");
    }
  };
  positive("k", c.k);
  positive("batch_size", c.batch_size);
  positive("disc_steps_per_gen_step", c.disc_steps_per_gen_step);
  positive("dataset_size", c.dataset_size);
  positive("log_every", c.log_every);
  positive("network.noise_dim", c.noise_dim);
  positive("network.gen_hidden", c.gen_hidden);
  positive("network.disc_hidden", c.disc_hidden);
  positive("eval.periodic_samples", c.eval.periodic_samples);
  positive("eval.final_samples", c.eval.final_samples);
  positive_real("learning_rate", c.learning_rate);
  positive_real("adam.epsilon", c.epsilon);
  positive_real("eval.bin_width", c.eval.bin_width);
  positive_real("eval.coverage_sigma", c.eval.coverage_sigma);
  if (!(c.beta1 >= 0.0 && c.beta1 < 1.0)) throw ConfigError("adam.beta1", "must lie in [0, 1)");
  if (!(c.beta2 >= 0.0 && c.beta2 < 1.0)) throw ConfigError("adam.beta2", "must lie in [0, 1)");
  if (!(c.leaky_slope >= 0.0 && c.leaky_slope < 1.0)) {
    throw ConfigError("network.leaky_slope", "must lie in [0, 1)");
  }
  if (!(c.eval.coverage_tau >= 0.0 && c.eval.coverage_tau <= 1.0)) {
    throw ConfigError("eval.coverage_tau", "must lie in [0, 1]");
  }
  if (!(c.sim.lambda >= 0.0) || !std::isfinite(c.sim.lambda)) {
    throw ConfigError("sim.lambda", "must be a nonnegative finite number");
  }
  if (c.variant == Variant::kMadganSim && c.k < 2) {
    throw ConfigError("k", "madgan-sim needs k >= 2 (got " + std::to_string(c.k) + ")");
  }
  try {
    c.data.validate();
  } catch (const ContractError& e) {
    throw ConfigError("data", e.what());
  }
}

TrainConfig parse_config(std::string_view text) {
  json j;
  try {
    j = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    const std::size_t upto = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    const std::size_t line = 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + upto, '\n'));
    throw ConfigError("<document>", "config is not valid JSON (line " + std::to_string(line) + "): " + e.what());
  }
  const Reader r(text);
  TrainConfig c;
  r.check_keys(j, "",
               {"variant", "k", "batch_size", "learning_rate", "adam", "iterations", "seed", "disc_steps_per_gen_step",
                "gen_loss", "sim", "data", "dataset_size", "standardize", "checkpoint_every", "log_every", "disc_snapshot",
                "trunk_reduction", "network", "eval"});
  if (j.contains("variant")) {
    const auto name = r.str(j, "", "variant");
    c.variant = r.choice("variant", [&] { return parse_variant(name); });
  }
  r.count(j, "", "k", c.k);
  r.count(j, "", "batch_size", c.batch_size);
  r.real(j, "", "learning_rate", c.learning_rate);
  if (j.contains("adam")) {
    const auto& a = j.at("adam");
    r.check_keys(a, "adam", {"beta1", "beta2", "epsilon"});
    r.real(a, "adam", "beta1", c.beta1);
    r.real(a, "adam", "beta2", c.beta2);
    r.real(a, "adam", "epsilon", c.epsilon);
  }
  r.count(j, "", "iterations", c.iterations);
  r.u64(j, "", "seed", c.seed);
  r.count(j, "", "disc_steps_per_gen_step", c.disc_steps_per_gen_step);
  if (j.contains("gen_loss")) {
    const auto name = r.str(j, "", "gen_loss");
    c.gen_loss = r.choice("gen_loss", [&] { return parse_gen_loss(name); });
  }
  if (j.contains("sim")) {
    const auto& s = j.at("sim");
    r.check_keys(s, "sim", {"lambda", "similarity", "aggregation"});
    r.real(s, "sim", "lambda", c.sim.lambda);
    if (s.contains("similarity")) {
      const auto v = r.str(s, "sim", "similarity");
      if (v == "clamped-cosine") c.sim.similarity = objectives::Similarity::kClampedCosine;
      else if (v == "cosine") c.sim.similarity = objectives::Similarity::kCosine;
      else r.fail("sim.similarity", "unknown value '" + v + "' (expected one of: clamped-cosine, cosine)");
    }
    if (s.contains("aggregation")) {
      const auto v = r.str(s, "sim", "aggregation");
      if (v == "average") c.sim.aggregation = objectives::Aggregation::kAverage;
      else if (v == "max-violator") c.sim.aggregation = objectives::Aggregation::kMaxViolator;
      else r.fail("sim.aggregation", "unknown value '" + v + "' (expected one of: average, max-violator)");
    }
  }
  if (j.contains("data")) {
    const auto& d = j.at("data");
    r.check_keys(d, "data", {"means", "stds", "weights"});
    for (const char* key : {"means", "stds", "weights"}) {
      if (!d.contains(key)) r.fail(std::string("data.") + key, "missing (data needs means, stds and weights)");
    }
    c.data.means = r.reals(d, "data", "means");
    c.data.stds = r.reals(d, "data", "stds");
    c.data.weights = r.reals(d, "data", "weights");
  }
  r.count(j, "", "dataset_size", c.dataset_size);
  if (j.contains("standardize")) {
    if (!j.at("standardize").is_boolean()) r.fail("standardize", "expected true or false");
    c.standardize = j.at("standardize").get<bool>();
  }
  r.count(j, "", "checkpoint_every", c.checkpoint_every);
  r.count(j, "", "log_every", c.log_every);
  if (j.contains("disc_snapshot")) {
    const auto v = r.str(j, "", "disc_snapshot");
    if (v == "post-update") c.disc_snapshot = DiscSnapshot::kPostUpdate;
    else if (v == "pre-update") c.disc_snapshot = DiscSnapshot::kPreUpdate;
    else r.fail("disc_snapshot", "unknown value '" + v + "' (expected one of: post-update, pre-update)");
  }
  if (j.contains("trunk_reduction")) {
    const auto v = r.str(j, "", "trunk_reduction");
    if (v == "sum") c.trunk_reduction = TrunkReduction::kSum;
    else if (v == "mean") c.trunk_reduction = TrunkReduction::kMean;
    else r.fail("trunk_reduction", "unknown value '" + v + "' (expected one of: sum, mean)");
  }
  if (j.contains("network")) {
    const auto& n = j.at("network");
    r.check_keys(n, "network", {"noise_dim", "gen_hidden", "disc_hidden", "leaky_slope"});
    r.count(n, "network", "noise_dim", c.noise_dim);
    r.count(n, "network", "gen_hidden", c.gen_hidden);
    r.count(n, "network", "disc_hidden", c.disc_hidden);
    r.real(n, "network", "leaky_slope", c.leaky_slope);
  }
  if (j.contains("eval")) {
    const auto& e = j.at("eval");
    r.check_keys(e, "eval",
                 {"every", "periodic_samples", "final_samples", "bin_width", "coverage_sigma", "coverage_tau"});
    r.count(e, "eval", "every", c.eval.every);
    r.count(e, "eval", "periodic_samples", c.eval.periodic_samples);
    r.count(e, "eval", "final_samples", c.eval.final_samples);
    r.real(e, "eval", "bin_width", c.eval.bin_width);
    r.real(e, "eval", "coverage_sigma", c.eval.coverage_sigma);
    r.real(e, "eval", "coverage_tau", c.eval.coverage_tau);
  }
  try {
    validate(c);
  } catch (const ConfigError& e) {
    const std::string field = e.field();
    const auto leaf = field.substr(field.rfind('.') == std::string::npos ? 0 : field.rfind('.') + 1);
    const std::size_t line = line_of_key(text, leaf);
    throw ConfigError(field, line ? e.detail() + " (line " + std::to_string(line) + ")" : e.detail());
  }
  return c;
}

TrainConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string canonical_json(const TrainConfig& cfg) { return to_json(cfg).dump(); }

std::string pretty_json(const TrainConfig& cfg) { return to_json(cfg).dump(2); }

std::string git_blob_sha1(std::string_view content) {
  const std::string header = "blob " + std::to_string(content.size()) + '\0';
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (ctx == nullptr || EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx, header.data(), header.size()) != 1 ||
      EVP_DigestUpdate(ctx, content.data(), content.size()) != 1 || EVP_DigestFinal_ex(ctx, digest, &len) != 1) {
    EVP_MD_CTX_free(ctx);
    throw std::runtime_error("SHA-1 digest failed");
  }
  EVP_MD_CTX_free(ctx);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 0xf];
  }
  return out;
}

std::string config_hash(const TrainConfig& cfg) { return git_blob_sha1(canonical_json(cfg)); }

std::vector<std::string> preset_names() {
  std::vector<std::string> names = {"table1-madgan", "table1-magan", "table1-madgan-sim", "smoke"};
  for (int k = 1; k <= 8; ++k) names.push_back("gencount-k" + std::to_string(k));
  return names;
}

TrainConfig preset(std::string_view name) {
  TrainConfig c;
  if (name == "table1-madgan") return c;
  if (name == "table1-magan") {
    c.variant = Variant::kMagan;
    return c;
  }
  if (name == "table1-madgan-sim") {
    c.variant = Variant::kMadganSim;
    return c;
  }
  if (name == "smoke") {
    c.iterations = 20000;
    return c;
  }
  if (name.starts_with("gencount-k")) {
    const std::string digits(name.substr(10));
    if (digits.size() == 1 && digits[0] >= '1' && digits[0] <= '8') {
      c.k = static_cast<std::size_t>(digits[0] - '0');
      c.eval.final_samples = 1'000'000;
      return c;
    }
  }
  std::string all;
  for (const auto& n : preset_names()) all += (all.empty() ? "" : ", ") + n;
  throw ConfigError("preset", "unknown preset '" + std::string(name) + "' (expected one of: " + all + ")");
}

}  // namespace madgan::config
