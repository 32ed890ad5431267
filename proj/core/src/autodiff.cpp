#include "madgan/autodiff.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>

#include "madgan/errors.hpp"

namespace madgan::ad {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using MutMap = Eigen::Map<RowMatrix>;

ConstMap as_matrix(const Tensor& t) {
  return ConstMap(t.data().data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}

MutMap as_matrix(Tensor& t) {
  return MutMap(t.data().data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}

Tape& tape_of(const Var& a) {
  if (!a.valid()) throw ContractError("operation on an uninitialized Var");
  return *a.tape();
}

Tape& tape_of(const Var& a, const Var& b) {
  Tape& t = tape_of(a);
  if (b.tape() != &t) throw ContractError("operands live on different tapes");
  return t;
}

void require_matrix(const Tensor& t, const char* op) {
  if (t.rank() != 2) {
    throw DimensionError(std::string(op) + " expects a matrix, got " + shape_string(t.shape()));
  }
}

template <typename F>
Tensor map_values(const Tensor& x, F&& f) {
  Tensor out(x.shape());
  auto in = x.data();
  auto o = out.data();
  for (std::size_t i = 0; i < in.size(); ++i) o[i] = f(in[i]);
  return out;
}

// Unary op whose derivative can be written in terms of the input (and the output).
template <typename Fwd, typename Deriv>
Var unary(const Var& x, OpKind kind, Fwd&& fwd, Deriv&& deriv) {
  Tape& t = tape_of(x);
  Tensor value = map_values(x.value(), fwd);
  const std::size_t xi = x.id();
  Tape::BackwardFn bw;
  if (x.requires_grad()) {
    bw = [xi, deriv](Tape& tp, const Tensor& g) {
      const Tensor& in = tp.value(xi);
      Tensor dx(in.shape());
      for (std::size_t i = 0; i < in.size(); ++i) dx[i] = g[i] * deriv(in[i]);
      tp.accumulate(xi, std::move(dx));
    };
  }
  return t.record(kind, std::move(value), {xi}, std::move(bw));
}

enum class Broadcast { kNone, kLeftScalar, kRightScalar };

Broadcast broadcast_kind(const Tensor& a, const Tensor& b, const char* op) {
  if (a.same_shape(b)) return Broadcast::kNone;
  if (b.size() == 1) return Broadcast::kRightScalar;
  if (a.size() == 1) return Broadcast::kLeftScalar;
  throw DimensionError(std::string(op) + ": shapes " + shape_string(a.shape()) + " and " +
                       shape_string(b.shape()) + " are not broadcast-compatible");
}

// Reduces a gradient of the broadcast output back to the operand's shape.
Tensor reduce_to(Tensor g, const Tensor& operand) {
  if (g.same_shape(operand)) return g;
  double total = 0.0;
  for (double v : g.data()) total += v;
  Tensor out(operand.shape());
  out[0] = total;
  return out;
}

// da, db are the local partials d(out)/da and d(out)/db evaluated elementwise.
template <typename Fwd, typename DA, typename DB>
Var binary(const Var& a, const Var& b, OpKind kind, const char* name, Fwd&& fwd, DA&& da, DB&& db) {
  Tape& t = tape_of(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const Broadcast bc = broadcast_kind(av, bv, name);
  const Tensor& shape_src = bc == Broadcast::kLeftScalar ? bv : av;
  Tensor value(shape_src.shape());
  const std::size_t n = value.size();
  auto lhs = [bc](const Tensor& x, std::size_t i) { return bc == Broadcast::kLeftScalar ? x[0] : x[i]; };
  auto rhs = [bc](const Tensor& x, std::size_t i) { return bc == Broadcast::kRightScalar ? x[0] : x[i]; };
  for (std::size_t i = 0; i < n; ++i) value[i] = fwd(lhs(av, i), rhs(bv, i));

  const std::size_t ai = a.id();
  const std::size_t bi = b.id();
  Tape::BackwardFn bw;
  if (a.requires_grad() || b.requires_grad()) {
    bw = [ai, bi, bc, lhs, rhs, da, db](Tape& tp, const Tensor& g) {
      const Tensor& x = tp.value(ai);
      const Tensor& y = tp.value(bi);
      if (tp.requires_grad(ai)) {
        Tensor ga(g.shape());
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] = g[i] * da(lhs(x, i), rhs(y, i));
        tp.accumulate(ai, reduce_to(std::move(ga), x));
      }
      if (tp.requires_grad(bi)) {
        Tensor gb(g.shape());
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] = g[i] * db(lhs(x, i), rhs(y, i));
        tp.accumulate(bi, reduce_to(std::move(gb), y));
      }
    };
  }
  return t.record(kind, std::move(value), {ai, bi}, std::move(bw));
}

}  // namespace

// ---- GradientMap ------------------------------------------------------------

Tensor GradientMap::get(const Parameter& p) const {
  auto it = grads_.find(&p);
  if (it == grads_.end()) return Tensor(p.shape());
  return it->second;
}

void GradientMap::accumulate(const Parameter& p, const Tensor& g) {
  if (!g.same_shape(p.value())) {
    throw DimensionError("gradient " + shape_string(g.shape()) + " for parameter " + p.name() + " of shape " +
                         shape_string(p.shape()));
  }
  auto [it, inserted] = grads_.try_emplace(&p, g);
  if (!inserted) it->second += g;
}

void GradientMap::scale(const Parameter& p, double factor) {
  auto it = grads_.find(&p);
  if (it != grads_.end()) it->second *= factor;
}

const char* op_name(OpKind kind) noexcept {
  switch (kind) {
    case OpKind::kConstant: return "constant";
    case OpKind::kLeaf: return "leaf";
    case OpKind::kParameter: return "parameter";
    case OpKind::kMatmul: return "matmul";
    case OpKind::kAdd: return "add";
    case OpKind::kSub: return "sub";
    case OpKind::kMul: return "mul";
    case OpKind::kDiv: return "div";
    case OpKind::kAddRow: return "add_row";
    case OpKind::kScale: return "scale";
    case OpKind::kNeg: return "neg";
    case OpKind::kLeakyRelu: return "leaky_relu";
    case OpKind::kElu: return "elu";
    case OpKind::kTanh: return "tanh";
    case OpKind::kSigmoid: return "sigmoid";
    case OpKind::kSoftplus: return "softplus";
    case OpKind::kLog: return "log";
    case OpKind::kExp: return "exp";
    case OpKind::kSqrt: return "sqrt";
    case OpKind::kMinZero: return "min_zero";
    case OpKind::kMaxZero: return "max_zero";
    case OpKind::kSum: return "sum";
    case OpKind::kMean: return "mean";
    case OpKind::kRowSum: return "row_sum";
    case OpKind::kColumn: return "column";
    case OpKind::kSliceRows: return "slice_rows";
    case OpKind::kConcatRows: return "concat_rows";
    case OpKind::kSoftmax: return "softmax";
    case OpKind::kSoftmaxCrossEntropy: return "softmax_cross_entropy";
    case OpKind::kRowCosine: return "row_cosine";
  }
  return "unknown";
}

// ---- Var / Tape -------------------------------------------------------------

const Tensor& Var::value() const { return tape_of(*this).value(id_); }
Tensor Var::grad() const { return tape_of(*this).grad(id_); }
bool Var::requires_grad() const { return tape_of(*this).requires_grad(id_); }
OpKind Var::kind() const { return tape_of(*this).kind(id_); }

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) {
  return push(Node{.kind = OpKind::kConstant, .value = std::move(value)});
}

Var Tape::leaf(Tensor value) {
  return push(Node{.kind = OpKind::kLeaf, .value = std::move(value), .requires_grad = true});
}

Var Tape::param(const Parameter& p) {
  if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return Var(this, it->second);
  const bool trainable = frozen_.count(&p) == 0;
  Var v = push(Node{.kind = trainable ? OpKind::kParameter : OpKind::kConstant,
                    .value = p.value(),
                    .requires_grad = trainable,
                    .param = trainable ? &p : nullptr});
  param_nodes_.emplace(&p, v.id());
  return v;
}

Var Tape::record(OpKind kind, Tensor value, std::vector<std::size_t> parents, BackwardFn backward) {
  const bool needs = static_cast<bool>(backward);
  return push(Node{.kind = kind,
                   .value = std::move(value),
                   .requires_grad = needs,
                   .parents = std::move(parents),
                   .backward = std::move(backward)});
}

Tensor Tape::grad(std::size_t id) const {
  const Node& n = nodes_.at(id);
  if (!n.has_grad) return Tensor(n.value.shape());
  return n.grad;
}

void Tape::accumulate(std::size_t id, Tensor g) {
  Node& n = nodes_.at(id);
  if (!n.requires_grad) return;
  if (n.has_grad) {
    n.grad += g;
  } else {
    n.grad = std::move(g);
    n.has_grad = true;
  }
}

GradientMap Tape::backward(const Var& loss) {
  if (loss.tape() != this) throw ContractError("backward: loss is not on this tape");
  if (loss.value().size() != 1) {
    throw ContractError("backward: loss must be scalar, got shape " + shape_string(loss.shape()));
  }
  for (Node& n : nodes_) {
    n.grad = Tensor();
    n.has_grad = false;
  }
  Node& root = nodes_[loss.id()];
  if (root.requires_grad) {
    root.grad = Tensor(root.value.shape(), 1.0);
    root.has_grad = true;
  }
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.has_grad || !n.backward) continue;
    // Closures only accumulate into parents (lower ids), so n.grad stays put.
    n.backward(*this, n.grad);
  }
  GradientMap out;
  for (const Node& n : nodes_) {
    if (n.param == nullptr) continue;
    out.accumulate(*n.param, n.has_grad ? n.grad : Tensor(n.value.shape()));
  }
  return out;
}

// ---- ops ----------------------------------------------------------------------

Var matmul(const Var& a, const Var& b) {
  Tape& t = tape_of(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_matrix(av, "matmul");
  require_matrix(bv, "matmul");
  if (av.cols() != bv.rows()) {
    throw DimensionError("matmul: inner dimensions differ for " + shape_string(av.shape()) + " x " +
                         shape_string(bv.shape()));
  }
  Tensor value({av.rows(), bv.cols()});
  as_matrix(value).noalias() = as_matrix(av) * as_matrix(bv);
  const std::size_t ai = a.id();
  const std::size_t bi = b.id();
  Tape::BackwardFn bw;
  if (a.requires_grad() || b.requires_grad()) {
    bw = [ai, bi](Tape& tp, const Tensor& g) {
      const Tensor& x = tp.value(ai);
      const Tensor& y = tp.value(bi);
      if (tp.requires_grad(ai)) {
        Tensor ga(x.shape());
        as_matrix(ga).noalias() = as_matrix(g) * as_matrix(y).transpose();
        tp.accumulate(ai, std::move(ga));
      }
      if (tp.requires_grad(bi)) {
        Tensor gb(y.shape());
        as_matrix(gb).noalias() = as_matrix(x).transpose() * as_matrix(g);
        tp.accumulate(bi, std::move(gb));
      }
    };
  }
  return t.record(OpKind::kMatmul, std::move(value), {ai, bi}, std::move(bw));
}

Var add(const Var& a, const Var& b) {
  return binary(
      a, b, OpKind::kAdd, "add", [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

Var sub(const Var& a, const Var& b) {
  return binary(
      a, b, OpKind::kSub, "sub", [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

Var mul(const Var& a, const Var& b) {
  return binary(
      a, b, OpKind::kMul, "mul", [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

Var div(const Var& a, const Var& b) {
  for (double v : b.value().data()) {
    if (v == 0.0) throw DomainError("div: division by zero");
  }
  return binary(
      a, b, OpKind::kDiv, "div", [](double x, double y) { return x / y; },
      [](double, double y) { return 1.0 / y; }, [](double x, double y) { return -x / (y * y); });
}

Var add_row(const Var& x, const Var& bias) {
  Tape& t = tape_of(x, bias);
  const Tensor& xv = x.value();
  const Tensor& bv = bias.value();
  require_matrix(xv, "add_row");
  if (bv.size() != xv.cols()) {
    throw DimensionError("add_row: bias " + shape_string(bv.shape()) + " does not match " + shape_string(xv.shape()));
  }
  Tensor value = xv;
  as_matrix(value).rowwise() += Eigen::Map<const Eigen::RowVectorXd>(bv.data().data(), bv.size());
  const std::size_t xi = x.id();
  const std::size_t bi = bias.id();
  Tape::BackwardFn bw;
  if (x.requires_grad() || bias.requires_grad()) {
    bw = [xi, bi](Tape& tp, const Tensor& g) {
      tp.accumulate(xi, g);
      if (tp.requires_grad(bi)) {
        // Plain loops: Eigen's vectorized reductions peel by address, which
        // would make the rounding depend on where the buffer was allocated.
        Tensor gb(tp.value(bi).shape());
        const std::size_t cols = g.cols();
        for (std::size_t r = 0; r < g.rows(); ++r) {
          for (std::size_t c = 0; c < cols; ++c) gb[c] += g.at(r, c);
        }
        tp.accumulate(bi, std::move(gb));
      }
    };
  }
  return t.record(OpKind::kAddRow, std::move(value), {xi, bi}, std::move(bw));
}

Var scale(const Var& x, double factor) {
  return unary(
      x, OpKind::kScale, [factor](double v) { return factor * v; }, [factor](double) { return factor; });
}

Var neg(const Var& x) {
  return unary(
      x, OpKind::kNeg, [](double v) { return -v; }, [](double) { return -1.0; });
}

Var leaky_relu(const Var& x, double slope) {
  // The kink at 0 takes the positive-branch derivative.
  return unary(
      x, OpKind::kLeakyRelu, [slope](double v) { return v >= 0.0 ? v : slope * v; },
      [slope](double v) { return v >= 0.0 ? 1.0 : slope; });
}

Var elu(const Var& x, double alpha) {
  return unary(
      x, OpKind::kElu, [alpha](double v) { return v >= 0.0 ? v : alpha * std::expm1(v); },
      [alpha](double v) { return v >= 0.0 ? 1.0 : alpha * std::exp(v); });
}

Var tanh(const Var& x) {
  return unary(
      x, OpKind::kTanh, [](double v) { return std::tanh(v); },
      [](double v) {
        const double th = std::tanh(v);
        return 1.0 - th * th;
      });
}

namespace {
double stable_sigmoid(double v) {
  if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}
}  // namespace

Var sigmoid(const Var& x) {
  return unary(x, OpKind::kSigmoid, stable_sigmoid, [](double v) {
    const double s = stable_sigmoid(v);
    return s * (1.0 - s);
  });
}

Var softplus(const Var& x) {
  return unary(
      x, OpKind::kSoftplus, [](double v) { return std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v))); },
      stable_sigmoid);
}

Var log(const Var& x) {
  for (double v : x.value().data()) {
    if (!(v > 0.0)) throw DomainError("log of nonpositive value " + std::to_string(v));
  }
  return unary(
      x, OpKind::kLog, [](double v) { return std::log(v); }, [](double v) { return 1.0 / v; });
}

Var log_clamped(const Var& x, double floor) {
  if (!(floor > 0.0)) throw ContractError("log_clamped: floor must be positive");
  return unary(
      x, OpKind::kLog, [floor](double v) { return std::log(std::max(v, floor)); },
      [floor](double v) { return v > floor ? 1.0 / v : 0.0; });
}

Var exp(const Var& x) {
  return unary(
      x, OpKind::kExp, [](double v) { return std::exp(v); }, [](double v) { return std::exp(v); });
}

Var sqrt(const Var& x) {
  for (double v : x.value().data()) {
    if (v < 0.0) throw DomainError("sqrt of negative value " + std::to_string(v));
  }
  return unary(
      x, OpKind::kSqrt, [](double v) { return std::sqrt(v); },
      [](double v) { return v > 0.0 ? 0.5 / std::sqrt(v) : 0.0; });
}

Var min_zero(const Var& x) {
  return unary(
      x, OpKind::kMinZero, [](double v) { return std::min(0.0, v); }, [](double v) { return v < 0.0 ? 1.0 : 0.0; });
}

Var max_zero(const Var& x) {
  return unary(
      x, OpKind::kMaxZero, [](double v) { return std::max(0.0, v); }, [](double v) { return v >= 0.0 ? 1.0 : 0.0; });
}

Var sum(const Var& x) {
  Tape& t = tape_of(x);
  double total = 0.0;
  for (double v : x.value().data()) total += v;
  const std::size_t xi = x.id();
  Tape::BackwardFn bw;
  if (x.requires_grad()) {
    bw = [xi](Tape& tp, const Tensor& g) { tp.accumulate(xi, Tensor(tp.value(xi).shape(), g[0])); };
  }
  return t.record(OpKind::kSum, Tensor::scalar(total), {xi}, std::move(bw));
}

Var mean(const Var& x) {
  Tape& t = tape_of(x);
  const std::size_t n = x.value().size();
  if (n == 0) throw ContractError("mean of an empty tensor");
  double total = 0.0;
  for (double v : x.value().data()) total += v;
  const std::size_t xi = x.id();
  Tape::BackwardFn bw;
  if (x.requires_grad()) {
    bw = [xi, n](Tape& tp, const Tensor& g) {
      tp.accumulate(xi, Tensor(tp.value(xi).shape(), g[0] / static_cast<double>(n)));
    };
  }
  return t.record(OpKind::kMean, Tensor::scalar(total / static_cast<double>(n)), {xi}, std::move(bw));
}

Var row_sum(const Var& x) {
  Tape& t = tape_of(x);
  const Tensor& xv = x.value();
  require_matrix(xv, "row_sum");
  Tensor value({xv.rows(), 1});
  for (std::size_t r = 0; r < xv.rows(); ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < xv.cols(); ++c) acc += xv.at(r, c);
    value[r] = acc;
  }
  const std::size_t xi = x.id();
  Tape::BackwardFn bw;
  if (x.requires_grad()) {
    bw = [xi](Tape& tp, const Tensor& g) {
      Tensor gx(tp.value(xi).shape());
      as_matrix(gx).colwise() = Eigen::Map<const Eigen::VectorXd>(g.data().data(), g.size());
      tp.accumulate(xi, std::move(gx));
    };
  }
  return t.record(OpKind::kRowSum, std::move(value), {xi}, std::move(bw));
}

Var column(const Var& x, std::size_t j) {
  Tape& t = tape_of(x);
  const Tensor& xv = x.value();
  require_matrix(xv, "column");
  if (j >= xv.cols()) {
    throw DimensionError("column " + std::to_string(j) + " out of range for " + shape_string(xv.shape()));
  }
  Tensor value({xv.rows(), 1});
  for (std::size_t r = 0; r < xv.rows(); ++r) value[r] = xv.at(r, j);
  const std::size_t xi = x.id();
  Tape::BackwardFn bw;
  if (x.requires_grad()) {
    bw = [xi, j](Tape& tp, const Tensor& g) {
      Tensor gx(tp.value(xi).shape());
      for (std::size_t r = 0; r < gx.rows(); ++r) gx.at(r, j) = g[r];
      tp.accumulate(xi, std::move(gx));
    };
  }
  return t.record(OpKind::kColumn, std::move(value), {xi}, std::move(bw));
}

Var slice_rows(const Var& x, std::size_t begin, std::size_t end) {
  Tape& t = tape_of(x);
  const Tensor& xv = x.value();
  require_matrix(xv, "slice_rows");
  if (begin > end || end > xv.rows()) {
    throw DimensionError("slice_rows [" + std::to_string(begin) + ", " + std::to_string(end) + ") out of range for " +
                         shape_string(xv.shape()));
  }
  const std::size_t c = xv.cols();
  Tensor value({end - begin, c});
  std::copy(xv.data().begin() + begin * c, xv.data().begin() + end * c, value.data().begin());
  const std::size_t xi = x.id();
  Tape::BackwardFn bw;
  if (x.requires_grad()) {
    bw = [xi, begin, c](Tape& tp, const Tensor& g) {
      Tensor gx(tp.value(xi).shape());
      std::copy(g.data().begin(), g.data().end(), gx.data().begin() + begin * c);
      tp.accumulate(xi, std::move(gx));
    };
  }
  return t.record(OpKind::kSliceRows, std::move(value), {xi}, std::move(bw));
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ContractError("concat_rows of no tensors");
  Tape& t = tape_of(parts[0]);
  const std::size_t c = parts[0].value().cols();
  std::size_t rows = 0;
  std::vector<std::size_t> ids;
  bool needs = false;
  for (const Var& p : parts) {
    if (p.tape() != &t) throw ContractError("operands live on different tapes");
    require_matrix(p.value(), "concat_rows");
    if (p.value().cols() != c) {
      throw DimensionError("concat_rows: column count mismatch " + shape_string(p.value().shape()));
    }
    rows += p.value().rows();
    ids.push_back(p.id());
    needs = needs || p.requires_grad();
  }
  Tensor value({rows, c});
  auto out = value.data().begin();
  for (const Var& p : parts) out = std::copy(p.value().data().begin(), p.value().data().end(), out);
  Tape::BackwardFn bw;
  if (needs) {
    bw = [ids](Tape& tp, const Tensor& g) {
      auto in = g.data().begin();
      for (std::size_t id : ids) {
        Tensor part(tp.value(id).shape());
        std::copy(in, in + static_cast<std::ptrdiff_t>(part.size()), part.data().begin());
        in += static_cast<std::ptrdiff_t>(part.size());
        tp.accumulate(id, std::move(part));
      }
    };
  }
  std::vector<std::size_t> parents = ids;
  return t.record(OpKind::kConcatRows, std::move(value), std::move(parents), std::move(bw));
}

Tensor softmax_rows(const Tensor& logits) {
  require_matrix(logits, "softmax");
  Tensor out(logits.shape());
  const std::size_t c = logits.cols();
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < c; ++j) mx = std::max(mx, logits.at(r, j));
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      const double e = std::exp(logits.at(r, j) - mx);
      out.at(r, j) = e;
      z += e;
    }
    for (std::size_t j = 0; j < c; ++j) out.at(r, j) /= z;
  }
  return out;
}

Var softmax(const Var& logits) {
  Tape& t = tape_of(logits);
  Tensor value = softmax_rows(logits.value());
  const std::size_t li = logits.id();
  Tape::BackwardFn bw;
  if (logits.requires_grad()) {
    // Recomputed from the parent so the closure does not hold a copy.
    bw = [li](Tape& tp, const Tensor& g) {
      const Tensor s = softmax_rows(tp.value(li));
      Tensor gx(s.shape());
      const std::size_t c = s.cols();
      for (std::size_t r = 0; r < s.rows(); ++r) {
        double dot = 0.0;
        for (std::size_t j = 0; j < c; ++j) dot += g.at(r, j) * s.at(r, j);
        for (std::size_t j = 0; j < c; ++j) gx.at(r, j) = s.at(r, j) * (g.at(r, j) - dot);
      }
      tp.accumulate(li, std::move(gx));
    };
  }
  return t.record(OpKind::kSoftmax, std::move(value), {li}, std::move(bw));
}

Var softmax_cross_entropy(const Var& logits, std::span<const std::size_t> targets) {
  Tape& t = tape_of(logits);
  const Tensor& lv = logits.value();
  require_matrix(lv, "softmax_cross_entropy");
  const std::size_t rows = lv.rows();
  const std::size_t c = lv.cols();
  if (targets.size() != rows) {
    throw DimensionError("softmax_cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                         std::to_string(rows) + " rows");
  }
  if (rows == 0) throw ContractError("softmax_cross_entropy on an empty batch");
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (targets[r] >= c) {
      throw ContractError("target index " + std::to_string(targets[r]) + " out of range for " + std::to_string(c) +
                          " classes");
    }
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < c; ++j) mx = std::max(mx, lv.at(r, j));
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) z += std::exp(lv.at(r, j) - mx);
    total += std::log(z) + mx - lv.at(r, targets[r]);
  }
  const std::size_t li = logits.id();
  Tape::BackwardFn bw;
  if (logits.requires_grad()) {
    std::vector<std::size_t> tgt(targets.begin(), targets.end());
    bw = [li, tgt = std::move(tgt)](Tape& tp, const Tensor& g) {
      Tensor gx = softmax_rows(tp.value(li));
      const double inv = g[0] / static_cast<double>(gx.rows());
      for (std::size_t r = 0; r < gx.rows(); ++r) gx.at(r, tgt[r]) -= 1.0;
      gx *= inv;
      tp.accumulate(li, std::move(gx));
    };
  }
  return t.record(OpKind::kSoftmaxCrossEntropy, Tensor::scalar(total / static_cast<double>(rows)), {li},
                  std::move(bw));
}

std::vector<std::size_t> one_hot_indices(const Tensor& one_hot) {
  require_matrix(one_hot, "one_hot_indices");
  std::vector<std::size_t> out(one_hot.rows());
  for (std::size_t r = 0; r < one_hot.rows(); ++r) {
    std::size_t ones = 0;
    for (std::size_t j = 0; j < one_hot.cols(); ++j) {
      const double v = one_hot.at(r, j);
      if (v == 1.0) {
        out[r] = j;
        ++ones;
      } else if (v != 0.0) {
        ones = 2;
        break;
      }
    }
    if (ones != 1) throw ContractError("target row " + std::to_string(r) + " is not one-hot");
  }
  return out;
}

Var softmax_cross_entropy(const Var& logits, const Tensor& one_hot) {
  if (!logits.value().same_shape(one_hot)) {
    throw DimensionError("softmax_cross_entropy: target " + shape_string(one_hot.shape()) + " vs logits " +
                         shape_string(logits.shape()));
  }
  const auto idx = one_hot_indices(one_hot);
  return softmax_cross_entropy(logits, idx);
}

Var row_cosine(const Var& a, const Var& b) {
  Tape& t = tape_of(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_matrix(av, "row_cosine");
  if (!av.same_shape(bv)) {
    throw DimensionError("row_cosine: " + shape_string(av.shape()) + " vs " + shape_string(bv.shape()));
  }
  const std::size_t rows = av.rows();
  Tensor value({rows, 1});
  const auto am = as_matrix(av);
  const auto bm = as_matrix(bv);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto ri = static_cast<Eigen::Index>(r);
    const double na = am.row(ri).norm();
    const double nb = bm.row(ri).norm();
    value[r] = (na == 0.0 || nb == 0.0) ? 0.0 : am.row(ri).dot(bm.row(ri)) / (na * nb);
  }
  const std::size_t ai = a.id();
  const std::size_t bi = b.id();
  Tape::BackwardFn bw;
  if (a.requires_grad() || b.requires_grad()) {
    bw = [ai, bi](Tape& tp, const Tensor& g) {
      const Tensor& x = tp.value(ai);
      const Tensor& y = tp.value(bi);
      const auto xm = as_matrix(x);
      const auto ym = as_matrix(y);
      Tensor gx(x.shape());
      Tensor gy(y.shape());
      auto gxm = as_matrix(gx);
      auto gym = as_matrix(gy);
      for (Eigen::Index r = 0; r < xm.rows(); ++r) {
        const double na = xm.row(r).norm();
        const double nb = ym.row(r).norm();
        if (na == 0.0 || nb == 0.0) continue;
        const double cos = xm.row(r).dot(ym.row(r)) / (na * nb);
        const double gr = g[static_cast<std::size_t>(r)];
        // d cos / d a = b / (|a||b|) - cos * a / |a|^2
        gxm.row(r) = gr * (ym.row(r) / (na * nb) - cos * xm.row(r) / (na * na));
        gym.row(r) = gr * (xm.row(r) / (na * nb) - cos * ym.row(r) / (nb * nb));
      }
      tp.accumulate(ai, std::move(gx));
      tp.accumulate(bi, std::move(gy));
    };
  }
  return t.record(OpKind::kRowCosine, std::move(value), {ai, bi}, std::move(bw));
}

}  // namespace madgan::ad
