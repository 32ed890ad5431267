#include "madgan/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "madgan/errors.hpp"

namespace madgan {
namespace {

using nlohmann::json;

json tensor_json(const Tensor& t) { return json{{"shape", t.shape()}, {"data", t.values()}}; }

Tensor tensor_from(const json& j) {
  return Tensor(j.at("shape").get<Shape>(), j.at("data").get<std::vector<double>>());
}

}  // namespace

std::string checkpoint_to_json(const Checkpoint& ckpt) {
  json params = json::object();
  for (const auto& [name, t] : ckpt.parameters) params[name] = tensor_json(t);
  json opts = json::object();
  for (const auto& [name, o] : ckpt.optimizers) {
    json moments = json::object();
    for (const auto& [p, m] : o.moments) {
      moments[p] = json{{"first", m.first.values()}, {"second", m.second.values()}};
    }
    opts[name] = json{{"step", o.step},
                      {"learning_rate", o.options.learning_rate},
                      {"beta1", o.options.beta1},
                      {"beta2", o.options.beta2},
                      {"epsilon", o.options.epsilon},
                      {"moments", std::move(moments)}};
  }
  json doc{{"format_version", Checkpoint::kFormatVersion},
           {"step", ckpt.step},
           {"rng", {{"seed", ckpt.seed}, {"derivation", "splitmix64-chain"}, {"step", ckpt.step}}},
           {"parameters", std::move(params)},
           {"optimizers", std::move(opts)},
           {"config", json::parse(ckpt.config_json)}};
  return doc.dump();
}

Checkpoint checkpoint_from_json(const std::string& text) {
  try {
    const json doc = json::parse(text);
    const int version = doc.at("format_version").get<int>();
    if (version != Checkpoint::kFormatVersion) {
      throw ParseError("checkpoint format_version " + std::to_string(version) + " is not supported");
    }
    Checkpoint c;
    c.step = doc.at("step").get<std::uint64_t>();
    c.seed = doc.at("rng").at("seed").get<std::uint64_t>();
    for (const auto& [name, t] : doc.at("parameters").items()) c.parameters.emplace(name, tensor_from(t));
    for (const auto& [name, o] : doc.at("optimizers").items()) {
      OptimizerState s;
      s.step = o.at("step").get<std::uint64_t>();
      s.options.learning_rate = o.at("learning_rate").get<double>();
      s.options.beta1 = o.at("beta1").get<double>();
      s.options.beta2 = o.at("beta2").get<double>();
      s.options.epsilon = o.at("epsilon").get<double>();
      for (const auto& [p, m] : o.at("moments").items()) {
        const auto& shape = c.parameters.count(p) ? c.parameters.at(p).shape() : Shape{};
        s.moments.emplace(p, nn::AdamMoments{Tensor(shape, m.at("first").get<std::vector<double>>()),
                                             Tensor(shape, m.at("second").get<std::vector<double>>())});
      }
      c.optimizers.emplace(name, std::move(s));
    }
    c.config_json = doc.at("config").dump();
    return c;
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed checkpoint: ") + e.what());
  } catch (const DimensionError& e) {
    throw ParseError(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out << checkpoint_to_json(ckpt) << '\n';
  if (!out) throw IoError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return checkpoint_from_json(ss.str());
}

}  // namespace madgan
