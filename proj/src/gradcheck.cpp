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

#include "xmlc/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "xmlc/errors.hpp"

namespace xmlc {
namespace {

void check_eps(double eps) {
  if (!(eps > 0.0 && eps <= 1e-2)) throw ContractError("grad_check step must lie in (0, 1e-2]");
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof(double)) == 0; }

void record(GradCheckReport& report, const std::string& name, std::size_t index, double analytic,
            double numeric) {
  GradCheckEntry e{name, index, analytic, numeric, relative_error(analytic, numeric), true};
  e.ok = e.rel_error < report.tolerance;
  if (!e.ok) ++report.failures;
  report.max_rel_error = std::max(report.max_rel_error, e.rel_error);
  report.entries.push_back(std::move(e));
}

}  // namespace

std::vector<std::string> GradCheckReport::failing_names() const {
  std::vector<std::string> names;
  for (const auto& e : entries) {
    if (!e.ok && std::find(names.begin(), names.end(), e.name) == names.end()) names.push_back(e.name);
  }
  return names;
}

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  return std::abs(analytic - numeric) / denom;
}

GradCheckReport grad_check(const ScalarFn& f, const Tensor& x, double eps, double tolerance,
                           const std::string& name) {
  check_eps(eps);
  auto evaluate = [&f](const Tensor& at) {
    ad::Graph g;
    ad::Var in = g.input(at, false);
    return f(g, in).value().item();
  };

  Tensor analytic;
  double base = 0.0;
  {
    ad::Graph g;
    ad::Var in = g.input(x, true);
    ad::Var out = f(g, in);
    base = out.value().item();
    g.backward(out);
    analytic = g.grad(in);
  }
  if (!same_bits(base, evaluate(x))) {
    throw DeterminismError("grad_check: repeated forward passes returned different values");
  }

  GradCheckReport report;
  report.tolerance = tolerance;
  Tensor probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + eps;
    const double up = evaluate(probe);
    probe[i] = orig - eps;
    const double down = evaluate(probe);
    probe[i] = orig;
    record(report, name, i, analytic[i], (up - down) / (2.0 * eps));
  }
  return report;
}

GradCheckReport grad_check_parameters(ParameterSet& params, const LossFn& loss, double eps,
                                      double tolerance, std::size_t max_per_param) {
  check_eps(eps);
  auto evaluate = [&loss]() {
    ad::Graph g;
    return loss(g).value().item();
  };

  params.zero_grad();
  double base = 0.0;
  {
    ad::Graph g;
    ad::Var out = loss(g);
    base = out.value().item();
    g.backward(out);
  }
  if (!same_bits(base, evaluate())) {
    throw DeterminismError("grad_check: repeated forward passes returned different values");
  }

  GradCheckReport report;
  report.tolerance = tolerance;
  for (Parameter& p : params) {
    const Tensor analytic = p.grad;
    const std::size_t n = p.value.size();
    const std::size_t probes = max_per_param == 0 ? n : std::min(n, max_per_param);
    for (std::size_t k = 0; k < probes; ++k) {
      const std::size_t i = probes == n ? k : (k * n) / probes;
      const double orig = p.value[i];
      p.value[i] = orig + eps;
      const double up = evaluate();
      p.value[i] = orig - eps;
      const double down = evaluate();
      p.value[i] = orig;
      record(report, p.name, i, analytic[i], (up - down) / (2.0 * eps));
    }
  }
  params.zero_grad();
  return report;
}

}  // namespace xmlc
