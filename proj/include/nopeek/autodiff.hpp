#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "nopeek/matrix.hpp"

// Minimal reverse-mode differentiation over matrices.
//
// A Tape records nodes in evaluation order; that order is a topological
// order of the graph, so backward() walks it in reverse exactly once.
// Gradient accumulation into a parent always happens in that fixed order,
// which makes gradients bit-reproducible.
namespace nopeek::ad {

class Tape;

class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  /// Gradient after Tape::backward: zeros for a differentiable node the loss
  /// does not reach, empty for constants.
  const Matrix& grad() const;
  std::size_t id() const noexcept { return id_; }
  Tape* tape() const noexcept { return tape_; }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Extra upstream gradient injected at a node, e.g. the gradient that
/// arrives over the wire for the split-layer activations.
struct Seed {
  Var at;
  const Matrix* grad;
};

class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  Var variable(Matrix value);

  const Matrix& value(Var v) const;
  const Matrix& grad(Var v) const;
  bool requires_grad(Var v) const;
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Backpropagate from a 1x1 loss. Clears gradients from earlier calls.
  void backward(Var loss);
  /// Same, with additional upstream gradients added at `seeds`.
  void backward(Var loss, std::span<const Seed> seeds);
  /// Backpropagate from arbitrary seeds only (no scalar loss).
  void backward(std::span<const Seed> seeds);

  // For op implementations.
  Var record(Matrix value, std::span<const Var> parents, BackwardFn fn);
  bool needs_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  const Matrix& value_of(std::size_t id) const { return nodes_[id].value; }
  const Matrix& grad_of(std::size_t id) const { return nodes_[id].grad; }
  /// Accumulator for node `id`, allocated on first use.
  Matrix& grad_acc(std::size_t id);

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    BackwardFn backward;
  };

  void check_owned(Var v) const;
  void run_backward(std::size_t last);

  std::vector<Node> nodes_;
  Matrix empty_;
};

enum class Axis { kRows, kCols };

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
/// a + 1 * row, broadcasting a 1 x cols row vector over every row of a.
Var add_row(Var a, Var row);
Var mul(Var a, Var b);
/// Elementwise quotient; b must be non-zero.
Var div(Var a, Var b);
Var scale(Var a, double s);
Var relu(Var a);
Var exp(Var a);
/// Natural log; domain a > 0.
Var log(Var a);
Var sum(Var a);
Var mean(Var a);
/// kRows sums over rows (result 1 x cols); kCols sums over columns (rows x 1).
Var sum_axis(Var a, Axis axis);
Var mean_axis(Var a, Axis axis);
/// sqrt(max(a, floor)); the derivative is zero wherever the clamp is active.
Var sqrt_clamped(Var a, double floor);
/// Euclidean distances between rows, squared distances clamped below at eps.
Var pairwise_dist(Var x, double eps);
Var double_center(Var d);
/// Mean softmax cross-entropy of logits against one-hot rows.
Var softmax_cross_entropy(Var logits, const Matrix& onehot);
Var sum_squares(Var a);
Var l2_norm(Var a);

}  // namespace nopeek::ad
