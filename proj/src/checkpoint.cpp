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

#include "xmlc/checkpoint.hpp"

#include <fstream>
#include <set>

#include "xmlc/errors.hpp"

namespace xmlc {

nlohmann::json checkpoint_to_json(const Model& model, const CheckpointMeta& meta) {
  nlohmann::json params = nlohmann::json::array();
  for (const auto& p : model_params(model)) {
    params.push_back({{"name", p.name}, {"shape", p.value.shape()}, {"data", p.value.storage()}});
  }
  return {{"format", "xmlc-checkpoint"},
          {"version", kCheckpointVersion},
          {"model_type", model_type(model)},
          {"n_features", model_n_features(model)},
          {"n_labels", model_n_labels(model)},
          {"config", model_config_json(model)},
          {"params", params},
          {"train_config", meta.train_config},
          {"optimizer", meta.optimizer},
          {"rng_state", meta.rng_state},
          {"best_epoch", meta.best_epoch}};
}

Model checkpoint_from_json(const nlohmann::json& j, CheckpointMeta* meta) {
  try {
    if (j.at("format").get<std::string>() != "xmlc-checkpoint") throw SchemaError("checkpoint: unknown format");
    const int version = j.at("version").get<int>();
    if (version != kCheckpointVersion) {
      throw SchemaError("checkpoint: unsupported version " + std::to_string(version));
    }
    const auto type = j.at("model_type").get<std::string>();
    const auto n_features = j.at("n_features").get<std::size_t>();
    const auto n_labels = j.at("n_labels").get<std::size_t>();
    Model model = [&]() -> Model {
      if (type == "nar") return NarModel(nar_config_from_json(j.at("config")), n_features, n_labels, 0);
      if (type == "ar") return ArModel(ar_config_from_json(j.at("config")), n_features, n_labels, 0);
      throw SchemaError("checkpoint: unknown model_type '" + type + "'");
    }();

    ParameterSet& params = model_params(model);
    std::set<std::string> seen;
    for (const auto& entry : j.at("params")) {
      const auto name = entry.at("name").get<std::string>();
      if (!params.contains(name)) throw SchemaError("checkpoint: unexpected parameter '" + name + "'");
      if (!seen.insert(name).second) throw SchemaError("checkpoint: duplicate parameter '" + name + "'");
      Parameter& p = params.get(name);
      const auto shape = entry.at("shape").get<std::vector<std::size_t>>();
      auto data = entry.at("data").get<std::vector<double>>();
      if (shape != p.value.shape() || data.size() != p.value.size()) {
        throw SchemaError("checkpoint: parameter '" + name + "' has shape " + shape_string(shape) +
                          ", expected " + shape_string(p.value.shape()));
      }
      p.value = Tensor(p.value.shape(), std::move(data));
    }
    if (seen.size() != params.size()) {
      for (const auto& p : params)
        if (!seen.count(p.name)) throw SchemaError("checkpoint: missing parameter '" + p.name + "'");
    }
    if (meta) {
      meta->train_config = j.value("train_config", nlohmann::json());
      meta->optimizer = j.value("optimizer", nlohmann::json());
      meta->rng_state = j.value("rng_state", std::uint64_t{0});
      meta->best_epoch = j.value("best_epoch", std::size_t{0});
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const Model& model, const CheckpointMeta& meta) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write checkpoint " + path.string());
  out << checkpoint_to_json(model, meta).dump() << '\n';
  if (!out) throw Error("failed writing checkpoint " + path.string());
}

Model load_checkpoint(const std::filesystem::path& path, CheckpointMeta* meta) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError("checkpoint " + path.string() + ": " + e.what());
  }
  return checkpoint_from_json(j, meta);
}

}  // namespace xmlc
