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

// JSON run configuration for the `train` command.
//
//   {
//     "schema_version": 1,
//     "model_type": "nar" | "ar",
//     "train_path": "data/train.txt",
//     "validation_path": "data/valid.txt",   // optional; else split off train
//     "validation_fraction": 0.1,            // used when validation_path is absent
//     "output_dir": "runs/nar",
//     "propensity": {"a": 0.55, "b": 1.5},
//     "nar": { NarConfig } | "ar": { ArConfig },   // must match model_type
//     "train": { TrainConfig }
//   }
//
// Relative paths are resolved against the directory of the config file.

#include <filesystem>
#include <optional>
#include <string>

#include "json.hpp"
#include "xmlc/ar_model.hpp"
#include "xmlc/nar_model.hpp"
#include "xmlc/training.hpp"

namespace xmlc {

inline constexpr int kRunConfigSchemaVersion = 1;

struct RunConfig {
  std::string model_type = "nar";
  std::filesystem::path train_path;
  std::optional<std::filesystem::path> validation_path;
  double validation_fraction = 0.1;
  std::filesystem::path output_dir;
  double propensity_a = 0.55;
  double propensity_b = 1.5;
  NarConfig nar;
  ArConfig ar;
  TrainConfig train;

  /// Checks field ranges and that input paths exist.
  void validate() const;
};

/// Throws SchemaError naming the offending field for unknown keys, wrong
/// types, a missing required field, or a model block that does not match
/// model_type. `base_dir` anchors relative paths.
RunConfig run_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);

/// Every field materialized, paths absolute, only the active model block.
nlohmann::json to_json(const RunConfig& c);

}  // namespace xmlc
