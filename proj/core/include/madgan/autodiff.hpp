#pragma once

// Reverse-mode automatic differentiation over dense tensors.
//
// A Tape records every operation applied to Vars created on it. Vars are
// small handles (tape pointer + node index); the tape owns the node values.
// Parameters are persistent, named tensors that outlive tapes; a network
// forward pass registers its parameters on the current tape, and
// Tape::backward returns their gradients as a GradientMap.
//
// A tape and its Vars belong to one thread. Parameters may be read from
// several tapes concurrently as long as nobody mutates them.

#include <cstddef>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "madgan/tensor.hpp"

namespace madgan::ad {

class Tape;

/// A named trainable tensor that persists across tapes.
class Parameter {
 public:
  Parameter(std::string name, Tensor value) : name_(std::move(name)), value_(std::move(value)) {}

  const std::string& name() const noexcept { return name_; }
  const Tensor& value() const noexcept { return value_; }
  Tensor& value() noexcept { return value_; }
  const Shape& shape() const noexcept { return value_.shape(); }

 private:
  std::string name_;
  Tensor value_;
};

using ParameterPtr = std::shared_ptr<Parameter>;

/// Gradients of a scalar loss keyed by parameter.
class GradientMap {
 public:
  // Gradient for `p`; zeros of p's shape if p did not influence the loss.
  Tensor get(const Parameter& p) const;
  bool contains(const Parameter& p) const { return grads_.count(&p) != 0; }

  void accumulate(const Parameter& p, const Tensor& g);
  void scale(const Parameter& p, double factor);
  std::size_t size() const noexcept { return grads_.size(); }

 private:
  std::unordered_map<const Parameter*, Tensor> grads_;
};

enum class OpKind {
  kConstant,
  kLeaf,
  kParameter,
  kMatmul,
  kAdd,
  kSub,
  kMul,
  kDiv,
  kAddRow,
  kScale,
  kNeg,
  kLeakyRelu,
  kElu,
  kTanh,
  kSigmoid,
  kSoftplus,
  kLog,
  kExp,
  kSqrt,
  kMinZero,
  kMaxZero,
  kSum,
  kMean,
  kRowSum,
  kColumn,
  kSliceRows,
  kConcatRows,
  kSoftmax,
  kSoftmaxCrossEntropy,
  kRowCosine,
};

const char* op_name(OpKind kind) noexcept;

/// Handle to a node on a tape.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  // Gradient after Tape::backward; zeros if the node was not reached.
  Tensor grad() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;
  OpKind kind() const;

  Tape* tape() const noexcept { return tape_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Tensor& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  // An input that receives a gradient but is not a Parameter.
  Var leaf(Tensor value);
  // Registers `p` on this tape. Repeated calls return the same node.
  Var param(const Parameter& p);

  // Parameters marked frozen enter this tape as constants.
  void freeze(const Parameter& p) { frozen_.insert(&p); }

  // Records a derived node. `backward` may be empty when no parent requires a gradient.
  Var record(OpKind kind, Tensor value, std::vector<std::size_t> parents, BackwardFn backward);

  /// Reverse sweep from a scalar loss; returns the gradients of every
  /// registered, non-frozen parameter (zeros for unreachable ones).
  GradientMap backward(const Var& loss);

  const Tensor& value(std::size_t id) const { return nodes_.at(id).value; }
  Tensor grad(std::size_t id) const;
  bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }
  OpKind kind(std::size_t id) const { return nodes_.at(id).kind; }
  const std::vector<std::size_t>& parents(std::size_t id) const { return nodes_.at(id).parents; }
  std::size_t size() const noexcept { return nodes_.size(); }

  // Adds `g` into the gradient slot of node `id` (no-op if it needs no grad).
  void accumulate(std::size_t id, Tensor g);

 private:
  struct Node {
    OpKind kind;
    Tensor value;
    Tensor grad;
    bool has_grad = false;
    bool requires_grad = false;
    std::vector<std::size_t> parents;
    BackwardFn backward;
    const Parameter* param = nullptr;
  };

  Var push(Node node);

  std::deque<Node> nodes_;
  std::unordered_map<const Parameter*, std::size_t> param_nodes_;
  std::unordered_set<const Parameter*> frozen_;
};

// ---- operations -----------------------------------------------------------
// Every op requires all operands to live on the same tape.

Var matmul(const Var& a, const Var& b);

// Elementwise binary ops: exact-shape, or one side holding a single element.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);

// x [B x n] plus a bias row [n] (or [1 x n]) broadcast over rows.
Var add_row(const Var& x, const Var& bias);
Var scale(const Var& x, double factor);
Var neg(const Var& x);

Var leaky_relu(const Var& x, double slope = 0.2);
Var elu(const Var& x, double alpha = 1.0);
Var tanh(const Var& x);
Var sigmoid(const Var& x);
// log(1 + e^x), evaluated without overflow.
Var softplus(const Var& x);
// Natural log; throws DomainError on any nonpositive element.
Var log(const Var& x);
// log(max(x, floor)); the gradient is zero where the floor is active.
Var log_clamped(const Var& x, double floor);
Var exp(const Var& x);
Var sqrt(const Var& x);
Var min_zero(const Var& x);
Var max_zero(const Var& x);

Var sum(const Var& x);
Var mean(const Var& x);
Var row_sum(const Var& x);
Var column(const Var& x, std::size_t j);
Var slice_rows(const Var& x, std::size_t begin, std::size_t end);
Var concat_rows(std::span<const Var> parts);

// Row-wise softmax, stabilized by max subtraction.
Var softmax(const Var& logits);

/// Mean over rows of -log softmax(logits)[row, targets[row]].
/// Gradient w.r.t. logits is (softmax - onehot) / B.
Var softmax_cross_entropy(const Var& logits, std::span<const std::size_t> targets);
// Same, with the target supplied as a one-hot matrix; throws ContractError
// if a row is not a Dirac delta.
Var softmax_cross_entropy(const Var& logits, const Tensor& one_hot);

/// Row-wise cosine similarity of a [B x n] and b [B x n] -> [B x 1].
/// Rows with a zero norm on either side yield 0 with zero gradient.
Var row_cosine(const Var& a, const Var& b);

// Plain (non-differentiable) helpers.
Tensor softmax_rows(const Tensor& logits);
// Indices of rows in `one_hot` (exactly one entry equal to 1, others 0).
std::vector<std::size_t> one_hot_indices(const Tensor& one_hot);

}  // namespace madgan::ad
