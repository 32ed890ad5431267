#include "gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace madgan::testing {

void GradCheckResult::merge(const GradCheckResult& o) {
  checked += o.checked;
  skipped += o.skipped;
  failures += o.failures;
  if (o.max_rel_err > max_rel_err) {
    max_rel_err = o.max_rel_err;
    worst = o.worst;
  }
}

GradCheckResult finite_difference_check(const std::function<double()>& loss, std::vector<Probe>& probes,
                                        const GradCheckOptions& opt, Rng& rng) {
  GradCheckResult r;
  struct Difference {
    double slope;   // central difference
    double second;  // f(x+h) - 2 f(x) + f(x-h)
  };
  auto central = [&](double& slot, double h, double f0) {
    const double saved = slot;
    slot = saved + h;
    const double up = loss();
    slot = saved - h;
    const double down = loss();
    slot = saved;
    return Difference{(up - down) / (2.0 * h), up - 2.0 * f0 + down};
  };
  for (auto& probe : probes) {
    std::vector<std::size_t> coords(probe.values.size());
    std::iota(coords.begin(), coords.end(), 0);
    for (std::size_t i = 0; i + 1 < coords.size(); ++i) {
      std::swap(coords[i], coords[i + rng.below(coords.size() - i)]);
    }
    coords.resize(std::min(coords.size(), opt.max_coords));
    for (std::size_t c : coords) {
      const double a = probe.analytic[c];
      // A wrong gradient mismatches at every step; one within h of a kink
      // stops mismatching once the step no longer straddles it.
      bool kink = true;
      double rel = 0.0, numeric = 0.0;
      const double f0 = loss();
      const double noise = 1e3 * std::numeric_limits<double>::epsilon() * (std::abs(f0) + 1.0);
      double h = opt.step;
      for (int tries = 0; tries < 3; ++tries, h /= 8.0) {
        const Difference d1 = central(probe.values[c], h, f0);
        const Difference d2 = central(probe.values[c], h / 2.0, f0);
        const double n1 = d1.slope, n2 = d2.slope;
        const double scale = std::max({std::abs(n1), std::abs(n2), opt.floor});
        if (std::abs(n1 - n2) / scale > opt.tolerance) continue;
        // The second difference shrinks 4x per halving when smooth, 2x across a kink at x.
        if (std::abs(d1.second) > noise && std::abs(d1.second) < 3.0 * std::abs(d2.second)) continue;
        kink = false;
        numeric = (4.0 * n2 - n1) / 3.0;  // Richardson: cancels the h^2 term
        rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), opt.floor});
        if (rel <= opt.tolerance) break;
      }
      if (kink) {
        ++r.skipped;
        continue;
      }
      ++r.checked;
      if (rel > opt.tolerance) ++r.failures;
      if (rel > r.max_rel_err) {
        r.max_rel_err = rel;
        std::ostringstream s;
        s << probe.name << "[" << c << "] analytic " << a << " numeric " << numeric;
        r.worst = s.str();
      }
    }
  }
  return r;
}

GradCheckResult check_op(const std::string& name, const Builder& build, std::vector<Tensor> inputs,
                         const GradCheckOptions& opt, Rng& rng) {
  std::vector<Probe> probes;
  {
    ad::Tape tape;
    std::vector<ad::Var> leaves;
    for (const auto& t : inputs) leaves.push_back(tape.leaf(t));
    const ad::Var out = build(tape, leaves);
    tape.backward(out);
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      const Tensor g = leaves[i].grad();
      probes.push_back({name + ".input" + std::to_string(i), inputs[i].data(), g.values()});
    }
  }
  auto loss = [&] {
    ad::Tape tape;
    std::vector<ad::Var> consts;
    for (const auto& t : inputs) consts.push_back(tape.constant(t));
    return build(tape, consts).value().item();
  };
  return finite_difference_check(loss, probes, opt, rng);
}

GradCheckResult check_params(const std::string& name, const std::function<ad::Var(ad::Tape&)>& build,
                             const std::vector<ad::ParameterPtr>& params, const GradCheckOptions& opt, Rng& rng) {
  std::vector<Probe> probes;
  {
    ad::Tape tape;
    const ad::Var out = build(tape);
    const ad::GradientMap grads = tape.backward(out);
    for (const auto& p : params) {
      probes.push_back({name + "." + p->name(), p->value().data(), grads.get(*p).values()});
    }
  }
  auto loss = [&] {
    ad::Tape tape;
    return build(tape).value().item();
  };
  return finite_difference_check(loss, probes, opt, rng);
}

Tensor random_tensor(const Shape& shape, Rng& rng, double lo, double hi) {
  Tensor t(shape);
  for (double& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

}  // namespace madgan::testing
