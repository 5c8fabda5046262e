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

// Type-erased handle over the two label-set models so training, evaluation,
// checkpoints and the CLI can treat them uniformly.

#include <string>
#include <variant>
#include <vector>

#include "xmlc/ar_model.hpp"
#include "xmlc/nar_model.hpp"

namespace xmlc {

using Model = std::variant<NarModel, ArModel>;

/// "nar" or "ar".
std::string model_type(const Model& m);
ParameterSet& model_params(Model& m);
const ParameterSet& model_params(const Model& m);
std::size_t model_n_features(const Model& m);
std::size_t model_n_labels(const Model& m);
/// Architecture config as JSON (NarConfig or ArConfig).
nlohmann::json model_config_json(const Model& m);

/// Per-label ranking scores: NAR infers with `n_refine` refinement steps, AR
/// decodes with its configured beam width.
std::vector<double> model_scores(const Model& m, const SparseRow& x, std::size_t n_refine);

}  // namespace xmlc
