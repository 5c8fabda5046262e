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

#include "xmlc/gradcheck_suite.hpp"

#include <algorithm>
#include <cmath>

#include "xmlc/ar_model.hpp"
#include "xmlc/gradcheck.hpp"
#include "xmlc/nar_model.hpp"

namespace xmlc {

using ad::Graph;
using ad::Op;
using ad::Var;

Tensor random_uniform(std::size_t rows, std::size_t cols, Rng& rng, double lo, double hi) {
  Tensor t = Tensor::matrix(rows, cols);
  for (double& v : t.data()) v = lo + (hi - lo) * rng.uniform();
  return t;
}

Var weighted_sum(Graph& g, Var y) {
  Rng rng(y.value().size() * 7919 + y.value().shape()[0]);
  Tensor w(y.value().shape());
  for (double& v : w.data()) v = 0.5 + rng.uniform();
  return ad::sum(ad::mul(y, g.constant(std::move(w))));
}

std::vector<PrimitiveCase> primitive_cases() {
  std::vector<PrimitiveCase> ps;
  auto other = [](Graph& g, std::size_t m, std::size_t n, std::uint64_t seed, double lo, double hi) {
    Rng r(seed);
    return g.constant(random_uniform(m, n, r, lo, hi));
  };
  ps.push_back({"matmul_left", Op::kMatmul, 3, 4, -1, 1, [=](Graph& g, Var x) { return ad::matmul(x, other(g, 4, 2, 1, -1, 1)); }});
  ps.push_back({"matmul_right", Op::kMatmul, 4, 2, -1, 1, [=](Graph& g, Var x) { return ad::matmul(other(g, 3, 4, 2, -1, 1), x); }});
  ps.push_back({"add", Op::kAdd, 3, 4, -1, 1, [=](Graph& g, Var x) { return ad::add(x, other(g, 3, 4, 3, -1, 1)); }});
  ps.push_back({"add_bias_row", Op::kAdd, 1, 4, -1, 1, [=](Graph& g, Var x) { return ad::add(other(g, 3, 4, 4, -1, 1), x); }});
  ps.push_back({"sub", Op::kSub, 3, 4, -1, 1, [=](Graph& g, Var x) { return ad::sub(other(g, 3, 4, 5, -1, 1), x); }});
  ps.push_back({"mul", Op::kMul, 3, 4, -1, 1, [=](Graph& g, Var x) { return ad::mul(x, other(g, 3, 4, 6, -1, 1)); }});
  ps.push_back({"mul_row", Op::kMul, 1, 4, -1, 1, [=](Graph& g, Var x) { return ad::mul(other(g, 3, 4, 7, -1, 1), x); }});
  ps.push_back({"div_num", Op::kDiv, 3, 4, -1, 1, [=](Graph& g, Var x) { return ad::div(x, other(g, 3, 4, 8, 0.5, 2)); }});
  ps.push_back({"div_den", Op::kDiv, 3, 4, 0.5, 2, [=](Graph& g, Var x) { return ad::div(other(g, 3, 4, 9, -1, 1), x); }});
  ps.push_back({"scale", Op::kScale, 2, 3, -1, 1, [](Graph&, Var x) { return ad::scale(x, -2.5); }});
  ps.push_back({"add_scalar", Op::kAddScalar, 2, 3, -1, 1, [](Graph&, Var x) { return ad::add_scalar(x, 0.75); }});
  ps.push_back({"relu", Op::kRelu, 3, 4, -1, 1, [](Graph&, Var x) { return ad::relu(x); }});
  ps.push_back({"exp", Op::kExp, 3, 4, -1, 1, [](Graph&, Var x) { return ad::exp(x); }});
  ps.push_back({"log", Op::kLog, 3, 4, 0.2, 3, [](Graph&, Var x) { return ad::log(x); }});
  ps.push_back({"sigmoid", Op::kSigmoid, 3, 4, -3, 3, [](Graph&, Var x) { return ad::sigmoid(x); }});
  ps.push_back({"tanh", Op::kTanh, 3, 4, -2, 2, [](Graph&, Var x) { return ad::tanh(x); }});
  ps.push_back({"softplus", Op::kSoftplus, 3, 4, -3, 3, [](Graph&, Var x) { return ad::softplus(x); }});
  ps.push_back({"square", Op::kSquare, 3, 4, -2, 2, [](Graph&, Var x) { return ad::square(x); }});
  ps.push_back({"sum", Op::kSum, 3, 4, -1, 1, [](Graph&, Var x) { return ad::scale(ad::sum(x), 1.3); }});
  ps.push_back({"sum_axis0", Op::kSumAxis, 3, 4, -1, 1, [](Graph&, Var x) { return ad::sum_axis(x, 0); }});
  ps.push_back({"sum_axis1", Op::kSumAxis, 3, 4, -1, 1, [](Graph&, Var x) { return ad::sum_axis(x, 1); }});
  ps.push_back({"mean_axis0", Op::kMeanAxis, 3, 4, -1, 1, [](Graph&, Var x) { return ad::mean_axis(x, 0); }});
  ps.push_back({"mean_axis1", Op::kMeanAxis, 3, 4, -1, 1, [](Graph&, Var x) { return ad::mean_axis(x, 1); }});
  ps.push_back({"concat0", Op::kConcat, 2, 3, -1, 1, [=](Graph& g, Var x) { return ad::concat({other(g, 1, 3, 10, -1, 1), x, x}, 0); }});
  ps.push_back({"concat1", Op::kConcat, 2, 3, -1, 1, [=](Graph& g, Var x) { return ad::concat({x, other(g, 2, 2, 11, -1, 1)}, 1); }});
  ps.push_back({"gather_rows", Op::kGatherRows, 4, 3, -1, 1, [](Graph&, Var x) {
                  const std::vector<std::uint32_t> idx{2, 0, 2, 3};
                  return ad::gather_rows(x, idx);
                }});
  ps.push_back({"slice_rows", Op::kSliceRows, 4, 3, -1, 1, [](Graph&, Var x) { return ad::slice_rows(x, 1, 3); }});
  ps.push_back({"slice_cols", Op::kSliceCols, 3, 5, -1, 1, [](Graph&, Var x) { return ad::slice_cols(x, 1, 4); }});
  ps.push_back({"broadcast_rows", Op::kBroadcastRows, 1, 4, -1, 1, [](Graph&, Var x) { return ad::broadcast_rows(x, 3); }});
  ps.push_back({"transpose", Op::kTranspose, 2, 3, -1, 1, [](Graph&, Var x) { return ad::transpose(x); }});
  ps.push_back({"layer_norm", Op::kLayerNorm, 3, 5, -2, 2, [](Graph&, Var x) { return ad::layer_norm_rows(x); }});
  ps.push_back({"softmax_rows", Op::kSoftmaxRows, 2, 4, -2, 2, [](Graph&, Var x) { return ad::softmax_rows(x); }});
  ps.push_back({"log_softmax_rows", Op::kLogSoftmaxRows, 2, 4, -2, 2, [](Graph&, Var x) { return ad::log_softmax_rows(x); }});
  ps.push_back({"cross_entropy", Op::kCrossEntropy, 3, 5, -2, 2, [](Graph&, Var x) {
                  const std::vector<std::uint32_t> t{4, 0, 2};
                  return ad::cross_entropy(x, t);
                }});
  ps.push_back({"sparse_affine_weight", Op::kSparseAffine, 6, 3, -1, 1, [=](Graph& g, Var w) {
                  const SparseRow row{{1, 0.5}, {4, -1.25}, {5, 2.0}};
                  return ad::sparse_affine(row, w, other(g, 1, 3, 12, -1, 1));
                }});
  ps.push_back({"sparse_affine_bias", Op::kSparseAffine, 1, 3, -1, 1, [=](Graph& g, Var b) {
                  const SparseRow row{{0, 1.5}, {2, -0.5}};
                  return ad::sparse_affine(row, other(g, 4, 3, 13, -1, 1), b);
                }});
  return ps;
}

bool GradSuiteReport::passed() const {
  return std::all_of(entries.begin(), entries.end(), [](const GradSuiteEntry& e) { return e.passed; });
}

double GradSuiteReport::max_rel_error() const {
  double worst = 0.0;
  for (const auto& e : entries) worst = std::max(worst, e.max_rel_error);
  return worst;
}

std::vector<std::string> GradSuiteReport::failing_names() const {
  std::vector<std::string> out;
  auto push = [&](const std::string& n) {
    if (std::find(out.begin(), out.end(), n) == out.end()) out.push_back(n);
  };
  for (const auto& e : entries) {
    if (e.passed) continue;
    if (e.op) push(ad::op_name(*e.op));
    for (const auto& p : e.failing) push(e.name + ":" + p);
  }
  return out;
}

namespace {

GradSuiteEntry objective_entry(const std::string& name, const GradCheckReport& r) {
  GradSuiteEntry e;
  e.name = name;
  e.checked = r.entries.size();
  e.max_rel_error = r.max_rel_error;
  e.failing = r.failing_names();
  e.passed = r.passed();
  return e;
}

SparseRow tiny_features(Rng& rng) {
  SparseRow x;
  for (std::uint32_t f = 0; f < 6; ++f)
    if (f == 0 || rng.uniform() < 0.6) x.push_back({f, rng.normal()});
  return x;
}

}  // namespace

GradSuiteReport gradcheck_suite(std::uint64_t seed, std::size_t trials, double tolerance) {
  GradSuiteReport report;
  report.seed = seed;
  report.tolerance = tolerance;
  Rng rng(seed);

  for (const PrimitiveCase& p : primitive_cases()) {
    GradSuiteEntry e;
    e.name = p.name;
    e.op = p.op;
    for (std::size_t t = 0; t < trials; ++t) {
      Tensor x = random_uniform(p.rows, p.cols, rng, p.lo, p.hi);
      if (p.op == Op::kRelu) {
        // Keep probes away from the kink at zero.
        for (double& v : x.data())
          if (std::abs(v) < 1e-2) v = 0.5;
      }
      const GradCheckReport r =
          grad_check([&](Graph& g, Var in) { return weighted_sum(g, p.apply(g, in)); }, x, 1e-4, tolerance, p.name);
      e.checked += r.entries.size();
      e.max_rel_error = std::max(e.max_rel_error, r.max_rel_error);
      e.passed = e.passed && r.passed();
    }
    report.entries.push_back(std::move(e));
  }

  {
    NarConfig c;
    c.d_model = 8;
    c.n_layers = 1;
    c.n_heads = 2;
    c.d_latent = 4;
    c.d_ff = 16;
    c.d_head_hidden = 8;
    c.d_decoder_hidden = 8;
    c.l_max = 3;
    c.t_budget = 4;
    NarModel model(c, 6, 5, rng.next_u64());
    const SparseRow x = tiny_features(rng);
    const LabelSet y{1, 3, 4};
    const Tensor noise = model.sample_noise(y, rng);
    auto loss = [&](Graph& g) { return model.elbo(g, x, y, noise, 0.5).total; };
    report.entries.push_back(objective_entry("nar_elbo", grad_check_parameters(model.params(), loss, 1e-4, tolerance)));
  }
  {
    ArConfig c;
    c.d_hidden = 8;
    c.d_embed = 4;
    c.max_steps = 4;
    ArModel model(c, 6, 5, rng.next_u64());
    const SparseRow x = tiny_features(rng);
    const LabelSet y{0, 2, 4};
    auto loss = [&](Graph& g) { return model.sequence_nll(g, x, y); };
    report.entries.push_back(objective_entry("ar_nll", grad_check_parameters(model.params(), loss, 1e-4, tolerance)));
  }
  return report;
}

}  // namespace xmlc
