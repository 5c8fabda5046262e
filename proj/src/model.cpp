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

#include "xmlc/model.hpp"

namespace xmlc {

std::string model_type(const Model& m) { return std::holds_alternative<NarModel>(m) ? "nar" : "ar"; }

ParameterSet& model_params(Model& m) {
  return std::visit([](auto& model) -> ParameterSet& { return model.params(); }, m);
}

const ParameterSet& model_params(const Model& m) {
  return std::visit([](const auto& model) -> const ParameterSet& { return model.params(); }, m);
}

std::size_t model_n_features(const Model& m) {
  return std::visit([](const auto& model) { return model.n_features(); }, m);
}

std::size_t model_n_labels(const Model& m) {
  return std::visit([](const auto& model) { return model.n_labels(); }, m);
}

nlohmann::json model_config_json(const Model& m) {
  return std::visit([](const auto& model) { return to_json(model.config()); }, m);
}

std::vector<double> model_scores(const Model& m, const SparseRow& x, std::size_t n_refine) {
  if (const auto* nar = std::get_if<NarModel>(&m)) return nar->infer(x, n_refine).scores;
  return std::get<ArModel>(m).predict(x).scores;
}

}  // namespace xmlc
