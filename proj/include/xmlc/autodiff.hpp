/*
 * Copyright 2026 The xmlc-nar Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// Tape-based reverse-mode automatic differentiation over dense f64 tensors.
//
// A Graph records every operation as a node in creation order, which is
// already a topological order. backward() sweeps the tape once in reverse.
// Parameter leaves accumulate directly into Parameter::grad, so several
// graphs built against the same ParameterSet sum their gradients (one graph
// per example, one optimizer step per batch).
//
// Broadcasting is limited to a 1xn row operand against an mxn operand in the
// binary elementwise ops; everything else needs explicit shapes.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "xmlc/parameters.hpp"
#include "xmlc/sparse.hpp"
#include "xmlc/tensor.hpp"

namespace xmlc::ad {

enum class Op : std::uint8_t {
  kInput,
  kConstant,
  kParameter,
  kMatmul,
  kAdd,
  kSub,
  kMul,
  kDiv,
  kScale,
  kAddScalar,
  kRelu,
  kExp,
  kLog,
  kSigmoid,
  kTanh,
  kSoftplus,
  kSquare,
  kSum,
  kSumAxis,
  kMeanAxis,
  kConcat,
  kGatherRows,
  kLayerNorm,
  kSoftmaxRows,
  kLogSoftmaxRows,
  kCrossEntropy,
  kTranspose,
  kSliceRows,
  kSliceCols,
  kBroadcastRows,
  kSparseAffine,
};

const char* op_name(Op op);
std::optional<Op> op_from_name(std::string_view name);

/// Fault injection for negative-control tests: the backward rule of `op`
/// (if set) is scaled by 1.5, which any gradient check must catch.
void set_corrupted_op(std::optional<Op> op);
std::optional<Op> corrupted_op();

/// Enables NaN/Inf detection on every node output. On by default in builds
/// without NDEBUG.
void set_check_finite(bool enabled);
bool check_finite();

class Graph;

/// Handle to a node of a Graph. Cheap to copy; valid while the Graph lives.
struct Var {
  Graph* graph = nullptr;
  std::uint32_t id = 0;

  const Tensor& value() const;
  const Tensor::Shape& shape() const { return value().shape(); }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
};

class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, const Tensor& out_grad)>;

  /// With track_gradients == false every leaf is frozen and no backward
  /// closures are kept (inference mode).
  explicit Graph(bool track_gradients = true) : track_(track_gradients) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  /// Leaf holding its own gradient.
  Var input(Tensor value, bool requires_grad = true);
  /// Leaf that never receives a gradient.
  Var constant(Tensor value);
  /// Leaf aliasing `p.value`; its gradient accumulates into `p.grad`.
  /// With `frozen`, the value is read but no gradient flows.
  Var param(Parameter& p, bool frozen = false);

  /// Reverse sweep from a scalar node. Call at most once per graph.
  void backward(Var loss);

  const Tensor& value(Var v) const;
  bool requires_grad(Var v) const;
  /// Gradient of the last backward() w.r.t. `v`; zeros if nothing reached it.
  Tensor grad(Var v) const;
  Op op(Var v) const;
  std::size_t size() const { return nodes_.size(); }
  bool tracks_gradients() const { return track_; }

  /// One node per line: id, op name, parent ids, shape.
  void dump(std::ostream& os) const;

  // Used by operation implementations.
  Var emit(Op op, std::vector<std::uint32_t> parents, Tensor value, BackwardFn backward);
  /// Gradient accumulator of `v`, allocated on first use.
  Tensor& grad_buffer(Var v);

 private:
  struct Node {
    Op op;
    std::vector<std::uint32_t> parents;
    Tensor owned;
    const Tensor* alias = nullptr;
    Parameter* param = nullptr;
    bool requires_grad = false;
    Tensor grad;
    BackwardFn backward;

    const Tensor& value() const { return alias ? *alias : owned; }
  };

  Var push(Node node);

  std::vector<Node> nodes_;
  bool track_ = true;
  bool backward_done_ = false;
};

// Linear algebra.
Var matmul(Var a, Var b);
Var transpose(Var a);

// Elementwise. `b` may be a 1xn row broadcast against an mxn `a`.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);
Var scale(Var a, double factor);
Var add_scalar(Var a, double offset);
Var neg(Var a);
Var relu(Var a);
Var exp(Var a);
Var log(Var a);
Var sigmoid(Var a);
Var tanh(Var a);
Var softplus(Var a);
Var square(Var a);

// Reductions. axis 0 collapses rows (result 1xn), axis 1 collapses columns
// (result mx1).
Var sum(Var a);
Var sum_axis(Var a, int axis);
Var mean_axis(Var a, int axis);

// Structure.
Var concat(std::span<const Var> parts, int axis);
Var concat(std::initializer_list<Var> parts, int axis);
Var gather_rows(Var table, std::span<const std::uint32_t> rows);
Var slice_rows(Var a, std::size_t begin, std::size_t end);
Var slice_cols(Var a, std::size_t begin, std::size_t end);
Var broadcast_rows(Var row, std::size_t n);

// Normalization and probabilities.
Var layer_norm_rows(Var a, double eps = 1e-10);
Var softmax_rows(Var a);
Var log_softmax_rows(Var a);
/// Sum over rows of -log softmax(logits_i)[targets_i]; scalar result.
Var cross_entropy(Var logits, std::span<const std::uint32_t> targets);

/// x·W + b for a sparse row x. W is FxN, b is 1xN, result 1xN. Only the
/// rows of W touched by x receive gradient.
Var sparse_affine(const SparseRow& x, Var weight, Var bias);

}  // namespace xmlc::ad
