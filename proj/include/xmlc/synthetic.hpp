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

// Seeded synthetic multi-label data: each example is drawn around one of a
// few prototypes whose label set it inherits, so the labels are a learnable
// function of the features.

#include <cstddef>
#include <cstdint>

#include "xmlc/dataset.hpp"

namespace xmlc {

struct SyntheticOptions {
  std::size_t n_examples = 50;
  std::size_t n_features = 24;
  std::size_t n_labels = 10;
  std::size_t n_prototypes = 8;
  std::size_t max_labels = 3;         // label sets have 1..max_labels labels
  std::size_t active_features = 5;    // non-zero features per prototype
  double noise = 0.05;                // feature jitter
  std::uint64_t seed = 1;
};

/// Rows are L2-normalized like parsed data.
SparseDataset make_synthetic(const SyntheticOptions& options);

}  // namespace xmlc
