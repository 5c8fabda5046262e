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

#include "xmlc/synthetic.hpp"

#include <algorithm>
#include <numeric>

#include "xmlc/errors.hpp"
#include "xmlc/rng.hpp"

namespace xmlc {

SparseDataset make_synthetic(const SyntheticOptions& options) {
  if (options.n_examples == 0 || options.n_prototypes == 0 || options.max_labels == 0) {
    throw ContractError("synthetic: counts must be positive");
  }
  if (options.max_labels > options.n_labels || options.active_features > options.n_features || options.active_features == 0) {
    throw ContractError("synthetic: max_labels and active_features must fit the label and feature spaces");
  }
  Rng rng(options.seed);
  struct Prototype {
    std::vector<std::uint32_t> features;
    std::vector<double> weights;
    LabelSet labels;
  };
  std::vector<Prototype> prototypes(options.n_prototypes);
  std::vector<std::uint32_t> feature_ids(options.n_features), label_ids(options.n_labels);
  std::iota(feature_ids.begin(), feature_ids.end(), 0u);
  std::iota(label_ids.begin(), label_ids.end(), 0u);
  for (auto& p : prototypes) {
    shuffle(feature_ids, rng);
    p.features.assign(feature_ids.begin(), feature_ids.begin() + options.active_features);
    std::sort(p.features.begin(), p.features.end());
    for (std::size_t i = 0; i < p.features.size(); ++i) p.weights.push_back(0.5 + rng.uniform());
    shuffle(label_ids, rng);
    const std::size_t k = 1 + rng.below(options.max_labels);
    p.labels.assign(label_ids.begin(), label_ids.begin() + k);
    std::sort(p.labels.begin(), p.labels.end());
  }

  SparseDataset ds;
  ds.n_features = options.n_features;
  ds.n_labels = options.n_labels;
  for (std::size_t i = 0; i < options.n_examples; ++i) {
    const Prototype& p = prototypes[rng.below(options.n_prototypes)];
    Example ex;
    for (std::size_t j = 0; j < p.features.size(); ++j) {
      ex.features.push_back({p.features[j], p.weights[j] + options.noise * rng.normal()});
    }
    ex.labels = p.labels;
    ds.examples.push_back(std::move(ex));
  }
  l2_normalize(ds);
  return ds;
}

}  // namespace xmlc
