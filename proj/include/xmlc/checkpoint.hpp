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

// Versioned JSON checkpoint container shared by both model types.
//
//   {
//     "format": "xmlc-checkpoint", "version": 1,
//     "model_type": "nar" | "ar",
//     "n_features": F, "n_labels": L,
//     "config": { architecture config },
//     "params": [ {"name": ..., "shape": [r, c], "data": [row-major f64]} ... ],
//     "train_config": { ... } | null,
//     "optimizer": { Adam state } | null,
//     "rng_state": u64,
//     "best_epoch": n
//   }
//
// Numbers are written in shortest round-trip form, so loading restores every
// parameter bit for bit.

#include <cstdint>
#include <filesystem>
#include <optional>

#include "json.hpp"
#include "xmlc/model.hpp"

namespace xmlc {

inline constexpr int kCheckpointVersion = 1;

struct CheckpointMeta {
  nlohmann::json train_config;  // null when absent
  nlohmann::json optimizer;     // null when absent
  std::uint64_t rng_state = 0;
  std::size_t best_epoch = 0;
};

nlohmann::json checkpoint_to_json(const Model& model, const CheckpointMeta& meta = {});
/// Throws SchemaError on malformed documents, unknown versions, or missing,
/// extra or mis-shaped parameters.
Model checkpoint_from_json(const nlohmann::json& j, CheckpointMeta* meta = nullptr);

void save_checkpoint(const std::filesystem::path& path, const Model& model, const CheckpointMeta& meta = {});
Model load_checkpoint(const std::filesystem::path& path, CheckpointMeta* meta = nullptr);

}  // namespace xmlc
