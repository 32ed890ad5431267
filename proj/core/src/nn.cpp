#include "madgan/nn.hpp"

#include <cmath>

#include "madgan/errors.hpp"

namespace madgan::nn {

Tensor init_params(const Shape& shape, const InitSpec& spec, Rng& rng) {
  Tensor out(shape);
  switch (spec.scheme) {
    case InitScheme::kUniformFanIn: {
      const std::size_t fan_in = shape.empty() ? 1 : shape[0];
      const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
      for (double& v : out.data()) v = rng.uniform(-bound, bound);
      break;
    }
    case InitScheme::kGaussian:
      for (double& v : out.data()) v = rng.normal(0.0, spec.stddev);
      break;
  }
  return out;
}

ad::ParameterPtr ParameterRegistry::create(const std::string& name, Tensor value) {
  if (contains(name)) throw ContractError("parameter '" + name + "' already exists");
  auto p = std::make_shared<ad::Parameter>(name, std::move(value));
  by_name_.emplace(name, p);
  ordered_.push_back(p);
  return p;
}

ad::ParameterPtr ParameterRegistry::find(const std::string& name) const {
  auto it = by_name_.find(name);
  return it == by_name_.end() ? nullptr : it->second;
}

LinearLayer::LinearLayer(ad::ParameterPtr weight, ad::ParameterPtr bias, std::optional<std::string> shared_id)
    : weight_(std::move(weight)), bias_(std::move(bias)), shared_id_(std::move(shared_id)) {
  if (!weight_ || !bias_) throw ContractError("LinearLayer needs weight and bias");
  if (weight_->value().rank() != 2 || bias_->value().size() != weight_->shape()[1]) {
    throw DimensionError("LinearLayer: weight " + shape_string(weight_->shape()) + " and bias " +
                         shape_string(bias_->shape()) + " disagree");
  }
}

LinearLayer LinearLayer::create(ParameterRegistry& registry, const std::string& prefix, std::size_t in,
                                std::size_t out, const InitSpec& init, Rng& rng) {
  auto w = registry.create(prefix + ".weight", init_params({in, out}, init, rng));
  auto b = registry.create(prefix + ".bias", Tensor({out}));
  return LinearLayer(std::move(w), std::move(b));
}

LinearLayer LinearLayer::shared(ParameterRegistry& registry, const std::string& shared_id, std::size_t in,
                                std::size_t out, const InitSpec& init, Rng& rng) {
  auto w = registry.find(shared_id + ".weight");
  auto b = registry.find(shared_id + ".bias");
  if (!w || !b) {
    LinearLayer fresh = create(registry, shared_id, in, out, init, rng);
    return LinearLayer(fresh.weight(), fresh.bias(), shared_id);
  }
  if (w->shape() != Shape{in, out}) {
    throw DimensionError("shared layer '" + shared_id + "' has shape " + shape_string(w->shape()));
  }
  return LinearLayer(std::move(w), std::move(b), shared_id);
}

ad::Var LinearLayer::forward(ad::Tape& tape, const ad::Var& x) const {
  return ad::add_row(ad::matmul(x, tape.param(*weight_)), tape.param(*bias_));
}

void adam_step(std::span<double> param, std::span<const double> grad, AdamMoments& moments, std::uint64_t t,
               const AdamOptions& o) {
  if (grad.size() != param.size() || moments.first.size() != param.size() || moments.second.size() != param.size()) {
    throw ContractError("adam_step: parameter, gradient and moment sizes differ");
  }
  if (t == 0) throw ContractError("adam_step: step counter is 1-based");
  const double c1 = 1.0 - std::pow(o.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(o.beta2, static_cast<double>(t));
  auto m = moments.first.data();
  auto v = moments.second.data();
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i];
    m[i] = o.beta1 * m[i] + (1.0 - o.beta1) * g;
    v[i] = o.beta2 * v[i] + (1.0 - o.beta2) * g * g;
    const double m_hat = m[i] / c1;
    const double v_hat = v[i] / c2;
    param[i] -= o.learning_rate * m_hat / (std::sqrt(v_hat) + o.epsilon);
  }
}

Adam::Adam(std::vector<ad::ParameterPtr> params, AdamOptions options)
    : params_(std::move(params)), options_(options) {
  if (!(options_.learning_rate > 0.0)) throw ContractError("Adam learning rate must be positive");
  moments_.reserve(params_.size());
  for (const auto& p : params_) {
    moments_.push_back({Tensor(p->shape()), Tensor(p->shape())});
  }
}

void Adam::step(const ad::GradientMap& grads) {
  std::vector<Tensor> g;
  g.reserve(params_.size());
  for (const auto& p : params_) {
    g.push_back(grads.get(*p));
    if (!g.back().same_shape(p->value())) {
      throw DimensionError("gradient for " + p->name() + " has shape " + shape_string(g.back().shape()));
    }
  }
  ++t_;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    adam_step(params_[i]->value().data(), g[i].data(), moments_[i], t_, options_);
  }
}

const AdamMoments& Adam::moments(const std::string& name) const {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i]->name() == name) return moments_[i];
  }
  throw ContractError("Adam has no parameter named '" + name + "'");
}

std::map<std::string, AdamMoments> Adam::snapshot() const {
  std::map<std::string, AdamMoments> out;
  for (std::size_t i = 0; i < params_.size(); ++i) out.emplace(params_[i]->name(), moments_[i]);
  return out;
}

void Adam::restore(std::uint64_t t, const std::map<std::string, AdamMoments>& moments) {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto it = moments.find(params_[i]->name());
    if (it == moments.end()) throw ContractError("optimizer state missing for " + params_[i]->name());
    if (!it->second.first.same_shape(params_[i]->value()) || !it->second.second.same_shape(params_[i]->value())) {
      throw DimensionError("optimizer state shape mismatch for " + params_[i]->name());
    }
    moments_[i] = it->second;
  }
  t_ = t;
}

}  // namespace madgan::nn
