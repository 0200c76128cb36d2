// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <unordered_map>
#include <vector>

#include "salatt/param_store.hpp"
#include "salatt/rng.hpp"
#include "salatt/tensor.hpp"

namespace salatt {

class Tape;

/// Handle to a value recorded on a Tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t index = 0;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
};

/// Reverse-mode autodiff record.
///
/// Nodes are appended in evaluation order, so every node's inputs precede
/// it and a single reverse sweep computes all gradients. A tape is meant
/// for one forward/backward pass and is not thread-safe.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf whose gradient is tracked.
  Var variable(Tensor value);
  /// Leaf excluded from differentiation.
  Var constant(Tensor value);
  /// Leaf bound to a trainable parameter. The value is referenced, not
  /// copied; backward() adds the leaf's gradient into `entry.grad`.
  Var parameter(ParamEntry& entry);

  /// Records an op result. `backward` is skipped when no input requires a
  /// gradient.
  Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward);
  Var record(Tensor value, std::span<const Var> inputs, BackwardFn backward);

  /// Seeds d(root)/d(root) with `seed` in every entry and sweeps backwards.
  void backward(Var root, double seed = 1.0);

  const Tensor& value(std::size_t i) const;
  /// Gradient of node i; a zero tensor if nothing flowed into it.
  Tensor grad(std::size_t i) const;
  Tensor grad(Var v) const { return grad(v.index); }
  bool requires_grad(std::size_t i) const { return nodes_[i].requires_grad; }

  /// Mutable gradient accumulator for node i, allocated on first use.
  Tensor& grad_ref(std::size_t i);

  std::size_t size() const { return nodes_.size(); }
  void clear();

 private:
  struct Node {
    Tensor value;
    const Tensor* external = nullptr;
    Tensor grad;
    BackwardFn backward;
    ParamEntry* param = nullptr;
    bool requires_grad = false;
  };

  Var push(Node node);

  // A deque keeps references from value() valid while the tape grows.
  std::deque<Node> nodes_;
  std::unordered_map<const ParamEntry*, std::size_t> param_index_;
};

enum class Mode { Train, Eval };

// Arithmetic. All ops check shapes and throw DimensionError on mismatch.
Var add(Var a, Var b);
Var scale(Var a, double factor);
Var ewmul(Var a, Var b);
Var matmul(Var a, Var b);
Var matvec(Var w, Var x);
Var affine(Var w, Var x, Var b);
/// w·x + u·h + b in a single node; the LSTM gate pre-activation.
Var affine_pair(Var w, Var x, Var u, Var h, Var b);
/// Applies the affine map to each row: x[N×d]·wᵀ + b, w is [out×d].
Var linear_rows(Var x, Var w, Var b);
Var transpose(Var a);
Var reshape(Var a, Shape shape);
Var sum(Var a);
Var dot(Var a, Var b);

// Nonlinearities.
Var sigmoid(Var x);
Var tanh_op(Var x);
Var softmax(Var x);

// Structural.
Var concat(std::span<const Var> parts);
Var row(Var matrix, std::size_t index);
Var broadcast_rows(Var v, std::size_t rows);
Var scale_rows(Var weights, Var matrix);
Var mean_rows(Var matrix);

struct MaxPoolResult {
  Var value;
  /// Winning row per column; ties go to the lowest row.
  std::vector<std::size_t> argmax;
};
MaxPoolResult max_pool_rows(Var x);

/// -log softmax(logits)[label] as a one-element tensor.
Var cross_entropy(Var logits, std::size_t label);

/// Inverted dropout. Eval mode and rate 0 return `x` unchanged.
Var dropout(Var x, double rate, Mode mode, Rng& rng);

namespace testing {
/// Skews the tanh backward pass so gradient checks can be shown to fail.
void set_backward_fault(bool enabled);
bool backward_fault();
}  // namespace testing

}  // namespace salatt
