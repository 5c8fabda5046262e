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

#include <cmath>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "xmlc/autodiff.hpp"
#include "xmlc/errors.hpp"
#include "xmlc/gradcheck.hpp"
#include "xmlc/gradcheck_suite.hpp"
#include "xmlc/rng.hpp"

using namespace xmlc;
using ad::Graph;
using ad::Var;

namespace {

Tensor random_matrix(std::size_t m, std::size_t n, Rng& rng, double lo = -1.0, double hi = 1.0) {
  return random_uniform(m, n, rng, lo, hi);
}

}  // namespace

TEST_CASE("matmul forward examples") {
  Graph g;
  Var id = g.constant(Tensor::from_rows({{1, 0}, {0, 1}}));
  Var m = g.constant(Tensor::from_rows({{1, 2}, {3, 4}}));
  CHECK(bit_equal(ad::matmul(id, m).value(), Tensor::from_rows({{1, 2}, {3, 4}})));

  Var p = g.constant(Tensor::from_rows({{1, 0}, {0, 0}}));
  Var q = g.constant(Tensor::from_rows({{5, 6}, {7, 8}}));
  CHECK(bit_equal(ad::matmul(p, q).value(), Tensor::from_rows({{5, 6}, {0, 0}})));
}

TEST_CASE("matmul shape mismatch names both shapes") {
  Graph g;
  Var a = g.constant(Tensor::matrix(2, 3));
  Var b = g.constant(Tensor::matrix(2, 3));
  try {
    ad::matmul(a, b);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2x3]") != std::string::npos);
    CHECK(msg.find("and [2x3]") != std::string::npos);
  }
}

TEST_CASE("matmul gradient of sum(A*B) matches finite differences") {
  Rng rng(11);
  const Tensor b = random_matrix(3, 3, rng);
  const Tensor a = random_matrix(3, 3, rng);
  auto report = grad_check(
      [&](Graph& g, Var x) { return ad::sum(ad::matmul(x, g.constant(b))); }, a);
  CHECK(report.max_rel_error < 1e-6);
}

TEST_CASE("softmax rows examples") {
  Graph g;
  Var x = g.constant(Tensor::from_rows({{0, 0, 0}, {1000, 0, 0}}));
  const Tensor y = ad::softmax_rows(x).value();
  for (int j = 0; j < 3; ++j) CHECK(std::abs(y.at(0, j) - 1.0 / 3.0) < 1e-15);
  CHECK(std::abs(y.at(1, 0) - 1.0) < 1e-12);
  CHECK(std::abs(y.at(1, 1)) < 1e-12);

  Rng rng(3);
  auto report = grad_check([](Graph& gg, Var in) { return weighted_sum(gg, ad::softmax_rows(in)); },
                           random_matrix(2, 4, rng, -2, 2));
  CHECK(report.max_rel_error < 1e-6);
}

TEST_CASE("softmax rows sum to one and ignore row shifts") {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const Tensor x = random_matrix(3, 7, rng, -30, 30);
    Tensor shifted = x;
    for (std::size_t i = 0; i < 3; ++i) {
      const double c = 100.0 * (rng.uniform() - 0.5);
      for (double& v : shifted.row_span(i)) v += c;
    }
    Graph g;
    const Tensor y = ad::softmax_rows(g.constant(x)).value();
    const Tensor ys = ad::softmax_rows(g.constant(shifted)).value();
    for (std::size_t i = 0; i < 3; ++i) {
      double total = 0.0;
      for (double v : y.row_span(i)) {
        CHECK(v >= 0.0);
        total += v;
      }
      CHECK(std::abs(total - 1.0) < 1e-12);
    }
    CHECK(max_abs_diff(y, ys) < 1e-10);
  }
}

TEST_CASE("backward of sum gives ones") {
  Graph g;
  Var x = g.input(Tensor({2, 3}, 0.7));
  g.backward(ad::sum(x));
  const Tensor gx = g.grad(x);
  for (double v : gx.data()) CHECK(v == 1.0);
}

TEST_CASE("relu gates the gradient") {
  Graph g;
  Var x = g.input(Tensor::row({-1.0, 2.0}));
  g.backward(ad::sum(ad::relu(x)));
  const Tensor gx = g.grad(x);
  CHECK(gx[0] == 0.0);
  CHECK(gx[1] == 1.0);
}

TEST_CASE("composite matmul-relu-softmax-cross-entropy gradient") {
  Rng rng(21);
  const Tensor w = random_matrix(4, 5, rng);
  const Tensor x0 = random_matrix(3, 4, rng);
  const std::vector<std::uint32_t> targets{1, 4, 0};
  auto f = [&](Graph& g, Var x) {
    Var h = ad::relu(ad::matmul(x, g.constant(w)));
    Var p = ad::softmax_rows(h);
    return ad::cross_entropy(ad::log(ad::add_scalar(p, 1e-3)), targets);
  };
  CHECK(grad_check(f, x0).max_rel_error < 1e-4);
  // And with respect to the weights, through a parameter.
  ParameterSet ps;
  Parameter& wp = ps.add("w", w);
  auto loss = [&](Graph& g) {
    Var h = ad::relu(ad::matmul(g.constant(x0), g.param(wp)));
    return ad::cross_entropy(ad::log(ad::add_scalar(ad::softmax_rows(h), 1e-3)), targets);
  };
  CHECK(grad_check_parameters(ps, loss).passed());
}

TEST_CASE("backward rejects non-scalar loss") {
  Graph g;
  Var x = g.input(Tensor::matrix(2, 2, 1.0));
  CHECK_THROWS_AS(g.backward(x), ContractError);
}

TEST_CASE("grad_check examples") {
  auto sq = [](Graph&, Var x) { return ad::sum(ad::square(x)); };
  auto r = grad_check(sq, Tensor::row({1, 2, 3}));
  CHECK(r.max_rel_error < 1e-8);
  CHECK(std::abs(r.entries[0].analytic - 2.0) < 1e-12);
  CHECK(std::abs(r.entries[2].analytic - 6.0) < 1e-12);

  auto constant = [](Graph& g, Var) { return g.constant(Tensor::scalar(4.0)); };
  auto rc = grad_check(constant, Tensor::row({1, 2}));
  for (const auto& e : rc.entries) {
    CHECK(e.analytic == 0.0);
    CHECK(e.numeric == 0.0);
  }
  CHECK(rc.passed());
}

TEST_CASE("grad_check detects non-deterministic functions") {
  int calls = 0;
  auto flaky = [&calls](Graph& g, Var x) {
    ++calls;
    return ad::add(ad::sum(x), g.constant(Tensor::scalar(calls * 1e-3)));
  };
  CHECK_THROWS_AS(grad_check(flaky, Tensor::row({1.0})), DeterminismError);
  CHECK_THROWS_AS(grad_check([](Graph&, Var x) { return ad::sum(x); }, Tensor::row({1.0}), 0.1),
                  ContractError);
}

TEST_CASE("every primitive passes finite differences on 20 random inputs") {
  for (const PrimitiveCase& p : primitive_cases()) {
    CAPTURE(p.name);
    Rng rng(std::hash<std::string>{}(p.name));
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
      Tensor x = random_matrix(p.rows, p.cols, rng, p.lo, p.hi);
      if (p.name == "relu") {
        for (double& v : x.data())
          if (std::abs(v) < 1e-2) v = 0.5;
      }
      auto report = grad_check([&](Graph& g, Var in) { return weighted_sum(g, p.apply(g, in)); }, x);
      worst = std::max(worst, report.max_rel_error);
    }
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("backward is bit-deterministic") {
  Rng rng(8);
  const Tensor x0 = random_matrix(4, 6, rng);
  auto run = [&]() {
    Graph g;
    Var x = g.input(x0);
    Var y = ad::layer_norm_rows(ad::matmul(x, ad::transpose(x)));
    g.backward(weighted_sum(g, ad::softmax_rows(y)));
    return g.grad(x);
  };
  CHECK(bit_equal(run(), run()));
}

TEST_CASE("layer normalization standardizes rows") {
  Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor x = Tensor::matrix(4, 16);
    for (double& v : x.data()) v = 3.0 + 2.0 * rng.normal();
    Graph g;
    const Tensor y = ad::layer_norm_rows(g.constant(x)).value();
    for (std::size_t i = 0; i < 4; ++i) {
      double mean = 0.0, var = 0.0;
      for (double v : y.row_span(i)) mean += v;
      mean /= 16.0;
      for (double v : y.row_span(i)) var += (v - mean) * (v - mean);
      var /= 16.0;
      CHECK(std::abs(mean) < 1e-10);
      CHECK(std::abs(var - 1.0) < 1e-8);
    }
  }
}

TEST_CASE("non-finite values are reported when checks are on") {
  const bool previous = ad::check_finite();
  ad::set_check_finite(true);
  Graph g;
  Var x = g.input(Tensor::row({-1.0}));
  CHECK_THROWS_AS(ad::log(x), NumericError);
  ad::set_check_finite(previous);
}

TEST_CASE("corrupted backward rule is caught by grad_check") {
  ad::set_corrupted_op(ad::Op::kTanh);
  auto report = grad_check([](Graph& g, Var x) { return weighted_sum(g, ad::tanh(x)); },
                           Tensor::row({0.1, -0.4, 0.9}));
  ad::set_corrupted_op(std::nullopt);
  CHECK_FALSE(report.passed());
  CHECK(ad::op_from_name("tanh") == ad::Op::kTanh);
}

TEST_CASE("graph dump lists one node per line") {
  ParameterSet ps;
  Parameter& w = ps.add("w", Tensor::matrix(2, 2, 1.0));
  Graph g;
  Var x = g.input(Tensor::matrix(1, 2, 1.0));
  ad::sum(ad::matmul(x, g.param(w)));
  std::ostringstream os;
  g.dump(os);
  CHECK(os.str() == "0 input [] [1x2]\n1 parameter(w) [] [2x2]\n2 matmul [0,1] [1x2]\n3 sum [2] [1x1]\n");
}

TEST_CASE("parameter gradients accumulate across graphs") {
  ParameterSet ps;
  Parameter& w = ps.add("w", Tensor::row({1.0, 2.0}));
  for (int i = 0; i < 3; ++i) {
    Graph g;
    g.backward(ad::sum(ad::square(g.param(w))));
  }
  CHECK(w.grad[0] == 6.0);
  CHECK(w.grad[1] == 12.0);
  ps.zero_grad();
  CHECK(w.grad[1] == 0.0);
}
