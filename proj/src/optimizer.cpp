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

#include "xmlc/optimizer.hpp"

#include <cmath>

#include "xmlc/errors.hpp"

namespace xmlc {

Adam::Adam(AdamConfig config, const ParameterSet& params) : config_(config) {
  if (!(config.learning_rate > 0.0)) throw ContractError("adam: learning_rate must be positive");
  if (!(config.beta1 >= 0.0 && config.beta1 < 1.0) || !(config.beta2 >= 0.0 && config.beta2 < 1.0)) {
    throw ContractError("adam: betas must lie in [0, 1)");
  }
  for (const auto& p : params) {
    first_.emplace_back(p.value.shape());
    second_.emplace_back(p.value.shape());
  }
}

void Adam::step(ParameterSet& params) {
  if (params.size() != first_.size()) throw ContractError("adam: parameter set changed size");
  ++steps_;
  const double t = static_cast<double>(steps_);
  const double correction1 = 1.0 - std::pow(config_.beta1, t);
  const double correction2 = 1.0 - std::pow(config_.beta2, t);
  std::size_t i = 0;
  for (auto& p : params) {
    auto value = p.value.data();
    const auto grad = p.grad.data();
    auto m = first_[i].data();
    auto v = second_[i].data();
    for (std::size_t j = 0; j < value.size(); ++j) {
      m[j] = config_.beta1 * m[j] + (1.0 - config_.beta1) * grad[j];
      v[j] = config_.beta2 * v[j] + (1.0 - config_.beta2) * grad[j] * grad[j];
      const double m_hat = m[j] / correction1;
      const double v_hat = v[j] / correction2;
      value[j] -= config_.learning_rate * m_hat / (std::sqrt(v_hat) + config_.epsilon);
    }
    ++i;
  }
}

nlohmann::json Adam::state() const {
  nlohmann::json moments = nlohmann::json::array();
  for (std::size_t i = 0; i < first_.size(); ++i) {
    moments.push_back({{"first", first_[i].storage()}, {"second", second_[i].storage()}});
  }
  return {{"steps", steps_},
          {"learning_rate", config_.learning_rate},
          {"beta1", config_.beta1},
          {"beta2", config_.beta2},
          {"epsilon", config_.epsilon},
          {"moments", moments}};
}

void Adam::load_state(const nlohmann::json& state, const ParameterSet& params) {
  try {
    const auto& moments = state.at("moments");
    if (moments.size() != params.size()) throw SchemaError("optimizer state does not match the parameter count");
    std::size_t i = 0;
    for (const auto& p : params) {
      auto first = moments[i].at("first").get<std::vector<double>>();
      auto second = moments[i].at("second").get<std::vector<double>>();
      if (first.size() != p.value.size() || second.size() != p.value.size()) {
        throw SchemaError("optimizer state shape mismatch for " + p.name);
      }
      first_[i] = Tensor(p.value.shape(), std::move(first));
      second_[i] = Tensor(p.value.shape(), std::move(second));
      ++i;
    }
    steps_ = state.at("steps").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("optimizer state: ") + e.what());
  }
}

double clip_grad_norm(ParameterSet& params, double max_norm) {
  const double norm = params.grad_norm();
  if (std::isfinite(norm) && norm > max_norm && max_norm > 0.0) params.scale_grad(max_norm / norm);
  return norm;
}

}  // namespace xmlc
