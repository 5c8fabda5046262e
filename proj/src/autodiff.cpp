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

#include "xmlc/autodiff.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <limits>
#include <ostream>

#include "xmlc/errors.hpp"

namespace xmlc::ad {
namespace {

constexpr std::array<const char*, 31> kOpNames = {
    "input",       "constant",      "parameter",     "matmul",      "add",
    "sub",         "mul",           "div",           "scale",       "add_scalar",
    "relu",        "exp",           "log",           "sigmoid",     "tanh",
    "softplus",    "square",        "sum",           "sum_axis",    "mean_axis",
    "concat",      "gather_rows",   "layer_norm",    "softmax_rows", "log_softmax_rows",
    "cross_entropy", "transpose",   "slice_rows",    "slice_cols",  "broadcast_rows",
    "sparse_affine",
};

std::atomic<int> g_corrupted{-1};
#ifdef NDEBUG
std::atomic<bool> g_check_finite{false};
#else
std::atomic<bool> g_check_finite{true};
#endif

Graph& graph_of(Var a) {
  if (a.graph == nullptr) throw ContractError("operation on a detached Var");
  return *a.graph;
}

Graph& same_graph(Var a, Var b) {
  Graph& g = graph_of(a);
  if (b.graph != &g) throw ContractError("operands belong to different graphs");
  return g;
}

std::string shapes(const Tensor& a, const Tensor& b) {
  return shape_string(a.shape()) + " and " + shape_string(b.shape());
}

void require_rank2(const Tensor& t, const char* op) {
  if (t.rank() != 2) {
    throw ShapeError(std::string(op) + " expects a rank-2 tensor, got " + shape_string(t.shape()));
  }
}

// True when b is broadcast as a row against a; throws if shapes are
// incompatible.
bool broadcast_check(const Tensor& a, const Tensor& b, const char* op) {
  if (a.same_shape(b)) return false;
  if (a.rank() == 2 && b.rank() == 2 && b.rows() == 1 && b.cols() == a.cols()) return true;
  throw ShapeError(std::string(op) + ": incompatible shapes " + shapes(a, b));
}

// C += A·B
void gemm_nn(const Tensor& a, const Tensor& b, Tensor& c) {
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  double* pc = c.data().data();
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = pc + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = pa[i * k + p];
      if (av == 0.0) continue;
      const double* brow = pb + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C += A·Bᵀ   (A: mxn, B: kxn, C: mxk)
void gemm_nt(const Tensor& a, const Tensor& b, Tensor& c) {
  const std::size_t m = a.rows(), n = a.cols(), k = b.rows();
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  double* pc = c.data().data();
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = pa + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double* brow = pb + p * n;
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += arow[j] * brow[j];
      pc[i * k + p] += acc;
    }
  }
}

// C += Aᵀ·B   (A: mxk, B: mxn, C: kxn)
void gemm_tn(const Tensor& a, const Tensor& b, Tensor& c) {
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  double* pc = c.data().data();
  for (std::size_t i = 0; i < m; ++i) {
    const double* brow = pb + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = pa[i * k + p];
      if (av == 0.0) continue;
      double* crow = pc + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// Adds g (mxn) into acc, summing rows when acc is 1xn.
void accumulate_maybe_broadcast(Tensor& acc, const Tensor& g) {
  if (acc.same_shape(g)) {
    acc += g;
    return;
  }
  const std::size_t m = g.rows(), n = g.cols();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) acc[j] += g[i * n + j];
  }
}

template <typename F, typename D>
Var unary(Var a, Op op, F forward, D derivative) {
  Graph& g = graph_of(a);
  const Tensor& x = a.value();
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = forward(x[i]);
  return g.emit(op, {a.id}, std::move(y), [a, derivative](Graph& graph, const Tensor& gout) {
    const Tensor& xv = graph.value(a);
    Tensor& ga = graph.grad_buffer(a);
    for (std::size_t i = 0; i < xv.size(); ++i) ga[i] += gout[i] * derivative(xv[i]);
  });
}

double stable_softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double logistic(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void softmax_row(std::span<const double> in, std::span<double> out) {
  const double mx = *std::max_element(in.begin(), in.end());
  double total = 0.0;
  for (std::size_t j = 0; j < in.size(); ++j) {
    out[j] = std::exp(in[j] - mx);
    total += out[j];
  }
  for (double& v : out) v /= total;
}

double log_sum_exp(std::span<const double> in) {
  const double mx = *std::max_element(in.begin(), in.end());
  double total = 0.0;
  for (double v : in) total += std::exp(v - mx);
  return mx + std::log(total);
}

}  // namespace

const char* op_name(Op op) { return kOpNames[static_cast<std::size_t>(op)]; }

std::optional<Op> op_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kOpNames.size(); ++i) {
    if (name == kOpNames[i]) return static_cast<Op>(i);
  }
  return std::nullopt;
}

void set_corrupted_op(std::optional<Op> op) {
  g_corrupted.store(op ? static_cast<int>(*op) : -1);
}

std::optional<Op> corrupted_op() {
  const int v = g_corrupted.load();
  if (v < 0) return std::nullopt;
  return static_cast<Op>(v);
}

void set_check_finite(bool enabled) { g_check_finite.store(enabled); }
bool check_finite() { return g_check_finite.load(); }

const Tensor& Var::value() const { return graph_of(*this).value(*this); }

// ---------------------------------------------------------------------------
// Graph

Var Graph::push(Node node) {
  if (nodes_.size() >= std::numeric_limits<std::uint32_t>::max()) {
    throw ContractError("graph node limit exceeded");
  }
  nodes_.push_back(std::move(node));
  return Var{this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Graph::input(Tensor value, bool requires_grad) {
  Node n;
  n.op = Op::kInput;
  n.owned = std::move(value);
  n.requires_grad = requires_grad && track_;
  return push(std::move(n));
}

Var Graph::constant(Tensor value) {
  Node n;
  n.op = Op::kConstant;
  n.owned = std::move(value);
  return push(std::move(n));
}

Var Graph::param(Parameter& p, bool frozen) {
  Node n;
  n.op = Op::kParameter;
  n.alias = &p.value;
  n.param = &p;
  n.requires_grad = !frozen && track_;
  return push(std::move(n));
}

Var Graph::emit(Op op, std::vector<std::uint32_t> parents, Tensor value, BackwardFn backward) {
  if (check_finite() && !value.all_finite()) {
    throw NumericError(std::string("non-finite value produced by ") + op_name(op));
  }
  bool needs = false;
  for (std::uint32_t p : parents) needs = needs || nodes_.at(p).requires_grad;
  Node n;
  n.op = op;
  n.parents = std::move(parents);
  n.owned = std::move(value);
  n.requires_grad = needs;
  if (needs) n.backward = std::move(backward);
  return push(std::move(n));
}

const Tensor& Graph::value(Var v) const { return nodes_.at(v.id).value(); }

bool Graph::requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }

Op Graph::op(Var v) const { return nodes_.at(v.id).op; }

Tensor& Graph::grad_buffer(Var v) {
  Node& n = nodes_.at(v.id);
  if (n.param) return n.param->grad;
  if (n.grad.empty()) n.grad = Tensor(n.value().shape(), 0.0);
  return n.grad;
}

Tensor Graph::grad(Var v) const {
  const Node& n = nodes_.at(v.id);
  if (n.param) return n.param->grad;
  if (n.grad.empty()) return Tensor(n.value().shape(), 0.0);
  return n.grad;
}

void Graph::backward(Var loss) {
  if (loss.graph != this) throw ContractError("loss node belongs to another graph");
  if (value(loss).size() != 1) {
    throw ContractError("backward requires a scalar loss, got shape " +
                        shape_string(value(loss).shape()));
  }
  if (backward_done_) throw ContractError("backward already ran on this graph");
  backward_done_ = true;
  if (!nodes_[loss.id].requires_grad) return;
  grad_buffer(loss)[0] += 1.0;

  const std::optional<Op> bad = corrupted_op();
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || !n.backward || n.grad.empty()) continue;
    if (bad && *bad == n.op) {
      Tensor scaled = n.grad;
      for (double& gv : scaled.data()) gv *= 1.5;
      n.backward(*this, scaled);
    } else {
      n.backward(*this, n.grad);
    }
  }
}

void Graph::dump(std::ostream& os) const {
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Node& n = nodes_[i];
    os << i << ' ' << op_name(n.op);
    if (n.param) os << '(' << n.param->name << ')';
    os << " [";
    for (std::size_t j = 0; j < n.parents.size(); ++j) os << (j ? "," : "") << n.parents[j];
    os << "] " << shape_string(n.value().shape()) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Linear algebra

Var matmul(Var a, Var b) {
  Graph& g = same_graph(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_rank2(av, "matmul");
  require_rank2(bv, "matmul");
  if (av.cols() != bv.rows()) throw ShapeError("matmul: inner dimensions differ for " + shapes(av, bv));
  Tensor c = Tensor::matrix(av.rows(), bv.cols());
  gemm_nn(av, bv, c);
  return g.emit(Op::kMatmul, {a.id, b.id}, std::move(c), [a, b](Graph& graph, const Tensor& gout) {
    if (graph.requires_grad(a)) gemm_nt(gout, graph.value(b), graph.grad_buffer(a));
    if (graph.requires_grad(b)) gemm_tn(graph.value(a), gout, graph.grad_buffer(b));
  });
}

Var transpose(Var a) {
  Graph& g = graph_of(a);
  const Tensor& x = a.value();
  require_rank2(x, "transpose");
  const std::size_t m = x.rows(), n = x.cols();
  Tensor y = Tensor::matrix(n, m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) y.at(j, i) = x.at(i, j);
  return g.emit(Op::kTranspose, {a.id}, std::move(y), [a, m, n](Graph& graph, const Tensor& gout) {
    Tensor& ga = graph.grad_buffer(a);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) ga.at(i, j) += gout.at(j, i);
  });
}

// ---------------------------------------------------------------------------
// Elementwise binary

Var add(Var a, Var b) {
  Graph& g = same_graph(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const bool bc = broadcast_check(av, bv, "add");
  Tensor y = av;
  const std::size_t n = bv.size();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += bv[bc ? i % n : i];
  return g.emit(Op::kAdd, {a.id, b.id}, std::move(y), [a, b](Graph& graph, const Tensor& gout) {
    if (graph.requires_grad(a)) graph.grad_buffer(a) += gout;
    if (graph.requires_grad(b)) accumulate_maybe_broadcast(graph.grad_buffer(b), gout);
  });
}

Var sub(Var a, Var b) {
  Graph& g = same_graph(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const bool bc = broadcast_check(av, bv, "sub");
  Tensor y = av;
  const std::size_t n = bv.size();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] -= bv[bc ? i % n : i];
  return g.emit(Op::kSub, {a.id, b.id}, std::move(y), [a, b](Graph& graph, const Tensor& gout) {
    if (graph.requires_grad(a)) graph.grad_buffer(a) += gout;
    if (graph.requires_grad(b)) {
      Tensor negated = gout;
      for (double& v : negated.data()) v = -v;
      accumulate_maybe_broadcast(graph.grad_buffer(b), negated);
    }
  });
}

Var mul(Var a, Var b) {
  Graph& g = same_graph(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const bool bc = broadcast_check(av, bv, "mul");
  Tensor y = av;
  const std::size_t n = bv.size();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= bv[bc ? i % n : i];
  return g.emit(Op::kMul, {a.id, b.id}, std::move(y), [a, b, bc, n](Graph& graph, const Tensor& gout) {
    const Tensor& x = graph.value(a);
    const Tensor& w = graph.value(b);
    if (graph.requires_grad(a)) {
      Tensor& ga = graph.grad_buffer(a);
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += gout[i] * w[bc ? i % n : i];
    }
    if (graph.requires_grad(b)) {
      Tensor& gb = graph.grad_buffer(b);
      for (std::size_t i = 0; i < gout.size(); ++i) gb[bc ? i % n : i] += gout[i] * x[i];
    }
  });
}

Var div(Var a, Var b) {
  Graph& g = same_graph(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const bool bc = broadcast_check(av, bv, "div");
  Tensor y = av;
  const std::size_t n = bv.size();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] /= bv[bc ? i % n : i];
  return g.emit(Op::kDiv, {a.id, b.id}, std::move(y), [a, b, bc, n](Graph& graph, const Tensor& gout) {
    const Tensor& x = graph.value(a);
    const Tensor& w = graph.value(b);
    if (graph.requires_grad(a)) {
      Tensor& ga = graph.grad_buffer(a);
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += gout[i] / w[bc ? i % n : i];
    }
    if (graph.requires_grad(b)) {
      Tensor& gb = graph.grad_buffer(b);
      for (std::size_t i = 0; i < gout.size(); ++i) {
        const double wv = w[bc ? i % n : i];
        gb[bc ? i % n : i] -= gout[i] * x[i] / (wv * wv);
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Elementwise unary

Var scale(Var a, double factor) {
  return unary(
      a, Op::kScale, [factor](double x) { return factor * x; },
      [factor](double) { return factor; });
}

Var add_scalar(Var a, double offset) {
  return unary(
      a, Op::kAddScalar, [offset](double x) { return x + offset; }, [](double) { return 1.0; });
}

Var neg(Var a) { return scale(a, -1.0); }

Var relu(Var a) {
  return unary(
      a, Op::kRelu, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x) { return x > 0.0 ? 1.0 : 0.0; });
}

Var exp(Var a) {
  return unary(
      a, Op::kExp, [](double x) { return std::exp(x); }, [](double x) { return std::exp(x); });
}

Var log(Var a) {
  return unary(
      a, Op::kLog, [](double x) { return std::log(x); }, [](double x) { return 1.0 / x; });
}

Var sigmoid(Var a) {
  return unary(a, Op::kSigmoid, logistic, [](double x) {
    const double s = logistic(x);
    return s * (1.0 - s);
  });
}

Var tanh(Var a) {
  return unary(
      a, Op::kTanh, [](double x) { return std::tanh(x); },
      [](double x) {
        const double t = std::tanh(x);
        return 1.0 - t * t;
      });
}

Var softplus(Var a) { return unary(a, Op::kSoftplus, stable_softplus, logistic); }

Var square(Var a) {
  return unary(
      a, Op::kSquare, [](double x) { return x * x; }, [](double x) { return 2.0 * x; });
}

// ---------------------------------------------------------------------------
// Reductions

Var sum(Var a) {
  Graph& g = graph_of(a);
  const Tensor& x = a.value();
  double total = 0.0;
  for (double v : x.data()) total += v;
  return g.emit(Op::kSum, {a.id}, Tensor::scalar(total), [a](Graph& graph, const Tensor& gout) {
    Tensor& ga = graph.grad_buffer(a);
    const double gv = gout[0];
    for (double& v : ga.data()) v += gv;
  });
}

namespace {

Var reduce_axis(Var a, int axis, bool mean, Op op) {
  Graph& g = graph_of(a);
  const Tensor& x = a.value();
  require_rank2(x, op_name(op));
  if (axis != 0 && axis != 1) throw ContractError("reduction axis must be 0 or 1");
  const std::size_t m = x.rows(), n = x.cols();
  const double denom = mean ? static_cast<double>(axis == 0 ? m : n) : 1.0;
  Tensor y = axis == 0 ? Tensor::matrix(1, n) : Tensor::matrix(m, 1);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) y[axis == 0 ? j : i] += x.at(i, j);
  if (mean)
    for (double& v : y.data()) v /= denom;
  return g.emit(op, {a.id}, std::move(y), [a, axis, m, n, denom](Graph& graph, const Tensor& gout) {
    Tensor& ga = graph.grad_buffer(a);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) ga.at(i, j) += gout[axis == 0 ? j : i] / denom;
  });
}

}  // namespace

Var sum_axis(Var a, int axis) { return reduce_axis(a, axis, false, Op::kSumAxis); }
Var mean_axis(Var a, int axis) { return reduce_axis(a, axis, true, Op::kMeanAxis); }

// ---------------------------------------------------------------------------
// Structure

Var concat(std::span<const Var> parts, int axis) {
  if (parts.empty()) throw ContractError("concat of zero tensors");
  if (axis != 0 && axis != 1) throw ContractError("concat axis must be 0 or 1");
  Graph& g = graph_of(parts[0]);
  std::vector<std::uint32_t> ids;
  std::size_t rows = 0, cols = 0;
  for (const Var& p : parts) {
    if (p.graph != &g) throw ContractError("concat operands belong to different graphs");
    const Tensor& t = p.value();
    require_rank2(t, "concat");
    ids.push_back(p.id);
    if (axis == 0) {
      if (cols != 0 && t.cols() != cols)
        throw ShapeError("concat axis 0: column counts differ, got " + shape_string(t.shape()));
      cols = t.cols();
      rows += t.rows();
    } else {
      if (rows != 0 && t.rows() != rows)
        throw ShapeError("concat axis 1: row counts differ, got " + shape_string(t.shape()));
      rows = t.rows();
      cols += t.cols();
    }
  }
  Tensor y = Tensor::matrix(rows, cols);
  std::size_t offset = 0;
  for (const Var& p : parts) {
    const Tensor& t = p.value();
    for (std::size_t i = 0; i < t.rows(); ++i)
      for (std::size_t j = 0; j < t.cols(); ++j) {
        if (axis == 0) y.at(offset + i, j) = t.at(i, j);
        else y.at(i, offset + j) = t.at(i, j);
      }
    offset += axis == 0 ? t.rows() : t.cols();
  }
  std::vector<Var> saved(parts.begin(), parts.end());
  return g.emit(Op::kConcat, std::move(ids), std::move(y),
                [saved = std::move(saved), axis](Graph& graph, const Tensor& gout) {
                  std::size_t off = 0;
                  for (const Var& p : saved) {
                    const Tensor& t = graph.value(p);
                    if (graph.requires_grad(p)) {
                      Tensor& gp = graph.grad_buffer(p);
                      for (std::size_t i = 0; i < t.rows(); ++i)
                        for (std::size_t j = 0; j < t.cols(); ++j)
                          gp.at(i, j) += axis == 0 ? gout.at(off + i, j) : gout.at(i, off + j);
                    }
                    off += axis == 0 ? t.rows() : t.cols();
                  }
                });
}

Var concat(std::initializer_list<Var> parts, int axis) {
  return concat(std::span<const Var>(parts.begin(), parts.size()), axis);
}

Var gather_rows(Var table, std::span<const std::uint32_t> rows) {
  Graph& g = graph_of(table);
  const Tensor& t = table.value();
  require_rank2(t, "gather_rows");
  if (rows.empty()) throw ContractError("gather_rows with no indices");
  const std::size_t n = t.cols();
  Tensor y = Tensor::matrix(rows.size(), n);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= t.rows()) {
      throw ShapeError("gather_rows: index " + std::to_string(rows[i]) + " out of range for " +
                       shape_string(t.shape()));
    }
    std::copy_n(t.row_span(rows[i]).begin(), n, y.row_span(i).begin());
  }
  std::vector<std::uint32_t> idx(rows.begin(), rows.end());
  return g.emit(Op::kGatherRows, {table.id}, std::move(y),
                [table, idx = std::move(idx), n](Graph& graph, const Tensor& gout) {
                  Tensor& gt = graph.grad_buffer(table);
                  for (std::size_t i = 0; i < idx.size(); ++i)
                    for (std::size_t j = 0; j < n; ++j) gt.at(idx[i], j) += gout.at(i, j);
                });
}

Var slice_rows(Var a, std::size_t begin, std::size_t end) {
  Graph& g = graph_of(a);
  const Tensor& x = a.value();
  require_rank2(x, "slice_rows");
  if (begin >= end || end > x.rows()) {
    throw ShapeError("slice_rows [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") invalid for " + shape_string(x.shape()));
  }
  const std::size_t n = x.cols();
  Tensor y = Tensor::matrix(end - begin, n);
  std::copy(x.data().begin() + begin * n, x.data().begin() + end * n, y.data().begin());
  return g.emit(Op::kSliceRows, {a.id}, std::move(y), [a, begin, n](Graph& graph, const Tensor& gout) {
    Tensor& ga = graph.grad_buffer(a);
    for (std::size_t i = 0; i < gout.size(); ++i) ga[begin * n + i] += gout[i];
  });
}

Var slice_cols(Var a, std::size_t begin, std::size_t end) {
  Graph& g = graph_of(a);
  const Tensor& x = a.value();
  require_rank2(x, "slice_cols");
  if (begin >= end || end > x.cols()) {
    throw ShapeError("slice_cols [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") invalid for " + shape_string(x.shape()));
  }
  const std::size_t m = x.rows(), w = end - begin;
  Tensor y = Tensor::matrix(m, w);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < w; ++j) y.at(i, j) = x.at(i, begin + j);
  return g.emit(Op::kSliceCols, {a.id}, std::move(y), [a, begin, m, w](Graph& graph, const Tensor& gout) {
    Tensor& ga = graph.grad_buffer(a);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < w; ++j) ga.at(i, begin + j) += gout.at(i, j);
  });
}

Var broadcast_rows(Var row, std::size_t n) {
  Graph& g = graph_of(row);
  const Tensor& x = row.value();
  require_rank2(x, "broadcast_rows");
  if (x.rows() != 1) throw ShapeError("broadcast_rows expects a 1xn row, got " + shape_string(x.shape()));
  if (n == 0) throw ContractError("broadcast_rows to zero rows");
  const std::size_t c = x.cols();
  Tensor y = Tensor::matrix(n, c);
  for (std::size_t i = 0; i < n; ++i) std::copy_n(x.data().begin(), c, y.row_span(i).begin());
  return g.emit(Op::kBroadcastRows, {row.id}, std::move(y), [row](Graph& graph, const Tensor& gout) {
    accumulate_maybe_broadcast(graph.grad_buffer(row), gout);
  });
}

// ---------------------------------------------------------------------------
// Normalization and probabilities

Var layer_norm_rows(Var a, double eps) {
  Graph& g = graph_of(a);
  const Tensor& x = a.value();
  require_rank2(x, "layer_norm_rows");
  const std::size_t m = x.rows(), n = x.cols();
  Tensor y = Tensor::matrix(m, n);
  std::vector<double> inv_std(m);
  for (std::size_t i = 0; i < m; ++i) {
    auto r = x.row_span(i);
    double mean = 0.0;
    for (double v : r) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : r) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) y.at(i, j) = (r[j] - mean) * inv_std[i];
  }
  Tensor saved = y;
  return g.emit(Op::kLayerNorm, {a.id}, std::move(y),
                [a, inv_std = std::move(inv_std), m, n, y = std::move(saved)](Graph& graph,
                                                                         const Tensor& gout) {
                  Tensor& ga = graph.grad_buffer(a);
                  const double dn = static_cast<double>(n);
                  for (std::size_t i = 0; i < m; ++i) {
                    double mean_g = 0.0, mean_gy = 0.0;
                    for (std::size_t j = 0; j < n; ++j) {
                      mean_g += gout.at(i, j);
                      mean_gy += gout.at(i, j) * y.at(i, j);
                    }
                    mean_g /= dn;
                    mean_gy /= dn;
                    for (std::size_t j = 0; j < n; ++j)
                      ga.at(i, j) += inv_std[i] * (gout.at(i, j) - mean_g - y.at(i, j) * mean_gy);
                  }
                });
}

Var softmax_rows(Var a) {
  Graph& g = graph_of(a);
  const Tensor& x = a.value();
  require_rank2(x, "softmax_rows");
  const std::size_t m = x.rows(), n = x.cols();
  Tensor y = Tensor::matrix(m, n);
  for (std::size_t i = 0; i < m; ++i) softmax_row(x.row_span(i), y.row_span(i));
  Tensor saved = y;
  return g.emit(Op::kSoftmaxRows, {a.id}, std::move(y),
                [a, m, n, y = std::move(saved)](Graph& graph, const Tensor& gout) {
                  Tensor& ga = graph.grad_buffer(a);
                  for (std::size_t i = 0; i < m; ++i) {
                    double dot = 0.0;
                    for (std::size_t j = 0; j < n; ++j) dot += gout.at(i, j) * y.at(i, j);
                    for (std::size_t j = 0; j < n; ++j) ga.at(i, j) += y.at(i, j) * (gout.at(i, j) - dot);
                  }
                });
}

Var log_softmax_rows(Var a) {
  Graph& g = graph_of(a);
  const Tensor& x = a.value();
  require_rank2(x, "log_softmax_rows");
  const std::size_t m = x.rows(), n = x.cols();
  Tensor y = Tensor::matrix(m, n);
  for (std::size_t i = 0; i < m; ++i) {
    const double lse = log_sum_exp(x.row_span(i));
    for (std::size_t j = 0; j < n; ++j) y.at(i, j) = x.at(i, j) - lse;
  }
  Tensor saved = y;
  return g.emit(Op::kLogSoftmaxRows, {a.id}, std::move(y),
                [a, m, n, y = std::move(saved)](Graph& graph, const Tensor& gout) {
                  Tensor& ga = graph.grad_buffer(a);
                  for (std::size_t i = 0; i < m; ++i) {
                    double total = 0.0;
                    for (std::size_t j = 0; j < n; ++j) total += gout.at(i, j);
                    for (std::size_t j = 0; j < n; ++j)
                      ga.at(i, j) += gout.at(i, j) - std::exp(y.at(i, j)) * total;
                  }
                });
}

Var cross_entropy(Var logits, std::span<const std::uint32_t> targets) {
  Graph& g = graph_of(logits);
  const Tensor& x = logits.value();
  require_rank2(x, "cross_entropy");
  const std::size_t m = x.rows(), n = x.cols();
  if (targets.size() != m) {
    throw ShapeError("cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                     shape_string(x.shape()) + " logits");
  }
  Tensor probs = Tensor::matrix(m, n);
  double loss = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    if (targets[i] >= n) {
      throw ContractError("cross_entropy: target " + std::to_string(targets[i]) +
                          " out of range for " + std::to_string(n) + " classes");
    }
    loss += log_sum_exp(x.row_span(i)) - x.at(i, targets[i]);
    softmax_row(x.row_span(i), probs.row_span(i));
  }
  std::vector<std::uint32_t> tgt(targets.begin(), targets.end());
  return g.emit(Op::kCrossEntropy, {logits.id}, Tensor::scalar(loss),
                [logits, probs = std::move(probs), tgt = std::move(tgt), m, n](Graph& graph,
                                                                              const Tensor& gout) {
                  Tensor& gl = graph.grad_buffer(logits);
                  const double gv = gout[0];
                  for (std::size_t i = 0; i < m; ++i) {
                    for (std::size_t j = 0; j < n; ++j) gl.at(i, j) += gv * probs.at(i, j);
                    gl.at(i, tgt[i]) -= gv;
                  }
                });
}

Var sparse_affine(const SparseRow& x, Var weight, Var bias) {
  Graph& g = same_graph(weight, bias);
  const Tensor& w = weight.value();
  const Tensor& b = bias.value();
  require_rank2(w, "sparse_affine");
  const std::size_t n = w.cols();
  if (b.rank() != 2 || b.rows() != 1 || b.cols() != n) {
    throw ShapeError("sparse_affine: bias " + shape_string(b.shape()) + " does not match weight " +
                     shape_string(w.shape()));
  }
  Tensor y = b;
  for (const FeatureValue& f : x) {
    if (f.index >= w.rows()) {
      throw ShapeError("sparse_affine: feature index " + std::to_string(f.index) +
                       " out of range for weight " + shape_string(w.shape()));
    }
    auto wr = w.row_span(f.index);
    for (std::size_t j = 0; j < n; ++j) y[j] += f.value * wr[j];
  }
  return g.emit(Op::kSparseAffine, {weight.id, bias.id}, std::move(y),
                [x, weight, bias, n](Graph& graph, const Tensor& gout) {
                  if (graph.requires_grad(weight)) {
                    Tensor& gw = graph.grad_buffer(weight);
                    for (const FeatureValue& f : x) {
                      auto gr = gw.row_span(f.index);
                      for (std::size_t j = 0; j < n; ++j) gr[j] += f.value * gout[j];
                    }
                  }
                  if (graph.requires_grad(bias)) graph.grad_buffer(bias) += gout;
                });
}

}  // namespace xmlc::ad
