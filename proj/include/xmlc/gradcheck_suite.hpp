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

// Finite-difference verification of every autodiff primitive and of both
// model objectives at tiny dimensions.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "xmlc/autodiff.hpp"
#include "xmlc/rng.hpp"

namespace xmlc {

struct PrimitiveCase {
  std::string name;  // e.g. "matmul_left"
  ad::Op op;         // primitive under test
  std::size_t rows, cols;
  double lo, hi;  // input range
  std::function<ad::Var(ad::Graph&, ad::Var)> apply;
};

/// One case per differentiable primitive (several for ops with more than one
/// differentiable input).
std::vector<PrimitiveCase> primitive_cases();

/// Uniform random matrix in [lo, hi).
Tensor random_uniform(std::size_t rows, std::size_t cols, Rng& rng, double lo = -1.0, double hi = 1.0);

/// Reduces any output to a scalar through fixed pseudo-random weights so every
/// output element contributes a distinct amount to the loss.
ad::Var weighted_sum(ad::Graph& g, ad::Var y);

struct GradSuiteEntry {
  std::string name;              // case name, or "nar_elbo" / "ar_nll"
  std::optional<ad::Op> op;      // set for primitive cases
  std::size_t checked = 0;       // number of probed elements
  double max_rel_error = 0.0;
  std::vector<std::string> failing;  // failing parameter names (objectives)
  bool passed = true;
};

struct GradSuiteReport {
  std::uint64_t seed = 0;
  double tolerance = 1e-4;
  std::vector<GradSuiteEntry> entries;

  bool passed() const;
  double max_rel_error() const;
  /// Failing primitive op names and objective parameter names, first-seen order.
  std::vector<std::string> failing_names() const;
};

/// Runs every primitive case on `trials` random inputs plus the NAR ELBO
/// (d_model 8, d_latent 4, 5 labels) and AR NLL (d_hidden 8, 5 labels).
GradSuiteReport gradcheck_suite(std::uint64_t seed, std::size_t trials = 3, double tolerance = 1e-4);

}  // namespace xmlc
