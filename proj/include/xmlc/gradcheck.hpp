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

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "xmlc/autodiff.hpp"
#include "xmlc/parameters.hpp"
#include "xmlc/tensor.hpp"

namespace xmlc {

struct GradCheckEntry {
  std::string name;  // input or parameter name
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
  bool ok = true;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  std::size_t failures = 0;
  std::vector<GradCheckEntry> entries;

  bool passed() const { return failures == 0; }
  /// Names with at least one failing element, in first-seen order.
  std::vector<std::string> failing_names() const;
};

/// |a - n| / max(|a|, |n|, 1e-6). The floor keeps components where both
/// gradients are essentially zero from dominating through roundoff.
double relative_error(double analytic, double numeric);

using ScalarFn = std::function<ad::Var(ad::Graph&, ad::Var)>;
using LossFn = std::function<ad::Var(ad::Graph&)>;

/// Central differences (f(x+eps e_i) - f(x-eps e_i)) / 2eps against reverse
/// mode for every element of `x`. Throws DeterminismError when two identical
/// forward passes disagree.
GradCheckReport grad_check(const ScalarFn& f, const Tensor& x, double eps = 1e-4,
                           double tolerance = 1e-4, const std::string& name = "x");

/// Same check w.r.t. every parameter of `params`, perturbing values in place
/// (restored afterwards). `loss` must register parameters via Graph::param.
/// With max_per_param > 0 only that many evenly spaced elements of each
/// parameter are probed.
GradCheckReport grad_check_parameters(ParameterSet& params, const LossFn& loss,
                                      double eps = 1e-4, double tolerance = 1e-4,
                                      std::size_t max_per_param = 0);

}  // namespace xmlc
