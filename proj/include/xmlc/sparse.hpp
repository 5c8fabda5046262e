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

#include <cstdint>
#include <vector>

namespace xmlc {

struct FeatureValue {
  std::uint32_t index;
  double value;

  friend bool operator==(const FeatureValue&, const FeatureValue&) = default;
};

/// Sparse feature vector, entries sorted by index, no duplicates.
using SparseRow = std::vector<FeatureValue>;

}  // namespace xmlc
