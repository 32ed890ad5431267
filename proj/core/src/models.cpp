#include "madgan/models.hpp"

#include "madgan/errors.hpp"

namespace madgan::models {
namespace {

std::string gen_name(std::size_t i, std::size_t layer) {
  return "gen" + std::to_string(i + 1) + ".layer" + std::to_string(layer);
}

std::string shared_name(std::size_t layer) { return "gen_shared.layer" + std::to_string(layer); }

std::string disc_name(std::size_t layer) { return "disc.layer" + std::to_string(layer); }

// Rebuilds layers of `src` against the parameters of `dst` by name.
nn::LinearLayer rebind(const nn::LinearLayer& layer, const nn::ParameterRegistry& dst) {
  return nn::LinearLayer(dst.find(layer.weight()->name()), dst.find(layer.bias()->name()), layer.shared_id());
}

nn::ParameterRegistry deep_copy(const nn::ParameterRegistry& src) {
  nn::ParameterRegistry out;
  for (const auto& p : src.all()) out.create(p->name(), p->value());
  return out;
}

}  // namespace

GeneratorBank::GeneratorBank(const GeneratorSpec& spec, std::uint64_t seed) : spec_(spec) {
  if (spec.k == 0) throw ContractError("generator bank needs k >= 1");
  if (spec.noise_dim == 0 || spec.hidden == 0) throw ContractError("generator widths must be positive");
  Rng trunk_rng(derive_seed(seed, {static_cast<std::uint64_t>(Stream::kInit), 0}));
  trunk_.push_back(nn::LinearLayer::shared(registry_, shared_name(1), spec.noise_dim, spec.hidden, spec.init, trunk_rng));
  trunk_.push_back(nn::LinearLayer::shared(registry_, shared_name(2), spec.hidden, spec.hidden, spec.init, trunk_rng));
  for (std::size_t i = 0; i < spec.k; ++i) {
    Rng head_rng(derive_seed(seed, {static_cast<std::uint64_t>(Stream::kInit), 1, i}));
    heads_.push_back(nn::LinearLayer::create(registry_, gen_name(i, 3), spec.hidden, 1, spec.init, head_rng));
  }
}

void GeneratorBank::check_index(std::size_t i) const {
  if (i >= heads_.size()) {
    throw ContractError("generator index " + std::to_string(i) + " out of range for k=" + std::to_string(k()));
  }
}

ad::Var GeneratorBank::trunk(ad::Tape& tape, const ad::Var& z) const {
  if (z.value().rank() != 2 || z.value().cols() != spec_.noise_dim) {
    throw DimensionError("generator noise must be [B x " + std::to_string(spec_.noise_dim) + "], got " +
                         shape_string(z.shape()));
  }
  ad::Var h = z;
  for (const auto& layer : trunk_) h = ad::elu(layer.forward(tape, h), spec_.elu_alpha);
  return h;
}

ad::Var GeneratorBank::head(ad::Tape& tape, std::size_t i, const ad::Var& trunk_out) const {
  check_index(i);
  return heads_[i].forward(tape, trunk_out);
}

ad::Var GeneratorBank::generate(ad::Tape& tape, std::size_t i, const ad::Var& z) const {
  check_index(i);
  return head(tape, i, trunk(tape, z));
}

Tensor GeneratorBank::generate(std::size_t i, const Tensor& z) const {
  ad::Tape tape;
  for (const auto& p : parameters()) tape.freeze(*p);
  return generate(tape, i, tape.constant(z)).value();
}

Tensor GeneratorBank::sample_noise(std::size_t batch, Rng& rng) const {
  Tensor z({batch, spec_.noise_dim});
  for (double& v : z.data()) v = 2.0 * rng.uniform_open() - 1.0;
  return z;
}

std::vector<ad::ParameterPtr> GeneratorBank::trunk_parameters() const {
  std::vector<ad::ParameterPtr> out;
  for (const auto& l : trunk_) {
    out.push_back(l.weight());
    out.push_back(l.bias());
  }
  return out;
}

std::vector<ad::ParameterPtr> GeneratorBank::head_parameters(std::size_t i) const {
  check_index(i);
  return {heads_[i].weight(), heads_[i].bias()};
}

GeneratorBank GeneratorBank::clone() const {
  GeneratorBank out;
  out.spec_ = spec_;
  out.registry_ = deep_copy(registry_);
  for (const auto& l : trunk_) out.trunk_.push_back(rebind(l, out.registry_));
  for (const auto& l : heads_) out.heads_.push_back(rebind(l, out.registry_));
  return out;
}

Discriminator::Discriminator(const DiscriminatorSpec& spec, std::uint64_t seed) : spec_(spec) {
  if (spec.k == 0) throw ContractError("discriminator needs k >= 1");
  if (spec.hidden == 0 || spec.input_dim == 0) throw ContractError("discriminator widths must be positive");
  Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(Stream::kInit), 2}));
  hidden_.push_back(nn::LinearLayer::create(registry_, disc_name(1), spec.input_dim, spec.hidden, spec.init, rng));
  hidden_.push_back(nn::LinearLayer::create(registry_, disc_name(2), spec.hidden, spec.hidden, spec.init, rng));
  head_.push_back(nn::LinearLayer::create(registry_, disc_name(3), spec.hidden, outputs(), spec.init, rng));
}

ad::Var Discriminator::features(ad::Tape& tape, const ad::Var& x) const {
  if (x.value().rank() != 2 || x.value().cols() != spec_.input_dim) {
    throw DimensionError("discriminator input must be [B x " + std::to_string(spec_.input_dim) + "], got " +
                         shape_string(x.shape()));
  }
  ad::Var h = x;
  for (const auto& layer : hidden_) h = ad::leaky_relu(layer.forward(tape, h), spec_.leaky_slope);
  return h;
}

ad::Var Discriminator::logits_from_features(ad::Tape& tape, const ad::Var& features) const {
  return head_.front().forward(tape, features);
}

ad::Var Discriminator::logits(ad::Tape& tape, const ad::Var& x) const {
  return logits_from_features(tape, features(tape, x));
}

ad::Var Discriminator::scores(ad::Tape& tape, const ad::Var& x) const {
  ad::Var l = logits(tape, x);
  return spec_.mode == DiscMode::kSoftmax ? ad::softmax(l) : ad::sigmoid(l);
}

ad::Var Discriminator::real_score(ad::Tape& tape, const ad::Var& x) const {
  ad::Var s = scores(tape, x);
  return spec_.mode == DiscMode::kSoftmax ? ad::column(s, real_index()) : s;
}

Tensor Discriminator::discriminate(const Tensor& x) const {
  ad::Tape tape;
  for (const auto& p : parameters()) tape.freeze(*p);
  return scores(tape, tape.constant(x)).value();
}

Tensor Discriminator::features(const Tensor& x) const {
  ad::Tape tape;
  for (const auto& p : parameters()) tape.freeze(*p);
  return features(tape, tape.constant(x)).value();
}

Discriminator Discriminator::clone() const {
  Discriminator out;
  out.spec_ = spec_;
  out.registry_ = deep_copy(registry_);
  for (const auto& l : hidden_) out.hidden_.push_back(rebind(l, out.registry_));
  for (const auto& l : head_) out.head_.push_back(rebind(l, out.registry_));
  return out;
}

void assign_parameters(const nn::ParameterRegistry& registry, const std::map<std::string, Tensor>& values) {
  for (const auto& p : registry.all()) {
    auto it = values.find(p->name());
    if (it == values.end()) throw ParseError("missing parameter '" + p->name() + "'");
    if (!it->second.same_shape(p->value())) {
      throw ParseError("parameter '" + p->name() + "' has shape " + shape_string(it->second.shape()) + ", expected " +
                       shape_string(p->shape()));
    }
    p->value() = it->second;
  }
}

std::map<std::string, Tensor> parameter_values(const nn::ParameterRegistry& registry) {
  std::map<std::string, Tensor> out;
  for (const auto& p : registry.all()) out.emplace(p->name(), p->value());
  return out;
}

}  // namespace madgan::models
