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

#include "xmlc/run_config.hpp"

#include <fstream>

#include "xmlc/errors.hpp"

namespace xmlc {
namespace {

std::filesystem::path anchor(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  if (path.is_relative() && !base.empty()) path = base / path;
  return path.lexically_normal();
}

}  // namespace

void RunConfig::validate() const {
  if (model_type != "nar" && model_type != "ar") throw SchemaError("model_type: expected 'nar' or 'ar'");
  if (train_path.empty()) throw SchemaError("train_path: required");
  if (!std::filesystem::exists(train_path)) throw SchemaError("train_path: file not found: " + train_path.string());
  if (validation_path && !std::filesystem::exists(*validation_path)) {
    throw SchemaError("validation_path: file not found: " + validation_path->string());
  }
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    throw SchemaError("validation_fraction: must lie in (0, 1)");
  }
  if (output_dir.empty()) throw SchemaError("output_dir: required");
  if (!(propensity_a > 0.0 && propensity_a < 1.0)) throw SchemaError("propensity.a: must lie in (0, 1)");
  if (!(propensity_b > 0.0)) throw SchemaError("propensity.b: must be positive");
  train.validate();
}

RunConfig run_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw SchemaError("run config: expected a JSON object");
  if (!j.contains("schema_version")) throw SchemaError("schema_version: required");
  RunConfig c;
  bool has_nar = false, has_ar = false;
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "schema_version") {
        const int v = value.get<int>();
        if (v != kRunConfigSchemaVersion) throw SchemaError("schema_version: unsupported version " + std::to_string(v));
      } else if (key == "model_type") {
        c.model_type = value.get<std::string>();
      } else if (key == "train_path") {
        c.train_path = anchor(base_dir, value.get<std::string>());
      } else if (key == "validation_path") {
        if (!value.is_null()) c.validation_path = anchor(base_dir, value.get<std::string>());
      } else if (key == "validation_fraction") {
        c.validation_fraction = value.get<double>();
      } else if (key == "output_dir") {
        c.output_dir = anchor(base_dir, value.get<std::string>());
      } else if (key == "propensity") {
        if (!value.is_object()) throw SchemaError("propensity: expected an object");
        for (const auto& [pk, pv] : value.items()) {
          if (pk == "a") c.propensity_a = pv.get<double>();
          else if (pk == "b") c.propensity_b = pv.get<double>();
          else throw SchemaError("propensity: unknown key '" + pk + "'");
        }
      } else if (key == "nar") {
        c.nar = nar_config_from_json(value);
        has_nar = true;
      } else if (key == "ar") {
        c.ar = ar_config_from_json(value);
        has_ar = true;
      } else if (key == "train") {
        c.train = train_config_from_json(value);
      } else {
        throw SchemaError("run config: unknown key '" + key + "'");
      }
    } catch (const nlohmann::json::exception& e) {
      throw SchemaError(key + ": " + e.what());
    }
  }
  if (c.model_type != "nar" && c.model_type != "ar") throw SchemaError("model_type: expected 'nar' or 'ar'");
  if (c.model_type == "nar" && has_ar) throw SchemaError("ar: block given but model_type is 'nar'");
  if (c.model_type == "ar" && has_nar) throw SchemaError("nar: block given but model_type is 'ar'");
  if (!j.contains("train_path")) throw SchemaError("train_path: required");
  if (!j.contains("output_dir")) throw SchemaError("output_dir: required");
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError("config " + path.string() + ": " + e.what());
  }
  return run_config_from_json(j, std::filesystem::absolute(path).parent_path());
}

nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json j{{"schema_version", kRunConfigSchemaVersion},
                   {"model_type", c.model_type},
                   {"train_path", std::filesystem::absolute(c.train_path).lexically_normal().string()},
                   {"validation_path", nullptr},
                   {"validation_fraction", c.validation_fraction},
                   {"output_dir", std::filesystem::absolute(c.output_dir).lexically_normal().string()},
                   {"propensity", {{"a", c.propensity_a}, {"b", c.propensity_b}}},
                   {"train", to_json(c.train)}};
  if (c.validation_path) {
    j["validation_path"] = std::filesystem::absolute(*c.validation_path).lexically_normal().string();
  }
  if (c.model_type == "nar") j["nar"] = to_json(c.nar);
  else j["ar"] = to_json(c.ar);
  return j;
}

}  // namespace xmlc
