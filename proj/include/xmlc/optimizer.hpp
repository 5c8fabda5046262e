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
#include <vector>

#include "json.hpp"
#include "xmlc/parameters.hpp"

namespace xmlc {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam with bias-corrected moment estimates. Moments are kept per parameter
/// in ParameterSet order.
class Adam {
 public:
  Adam(AdamConfig config, const ParameterSet& params);

  /// One update from the gradients currently stored in `params`.
  void step(ParameterSet& params);
  std::size_t steps() const { return steps_; }
  const AdamConfig& config() const { return config_; }

  nlohmann::json state() const;
  /// Restores moments and the step count; shapes must match `params`.
  void load_state(const nlohmann::json& state, const ParameterSet& params);

 private:
  AdamConfig config_;
  std::size_t steps_ = 0;
  std::vector<Tensor> first_;
  std::vector<Tensor> second_;
};

/// Rescales all gradients so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
double clip_grad_norm(ParameterSet& params, double max_norm);

}  // namespace xmlc
