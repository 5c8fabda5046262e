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
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include "xmlc/sparse.hpp"

namespace xmlc {

using LabelSet = std::vector<std::uint32_t>;  // sorted ascending, unique

struct Example {
  SparseRow features;
  LabelSet labels;

  bool has_labels() const { return !labels.empty(); }
};

/// Rows of sparse features with their label sets.
struct SparseDataset {
  std::size_t n_features = 0;
  std::size_t n_labels = 0;
  std::vector<Example> examples;

  std::size_t size() const { return examples.size(); }
  bool empty() const { return examples.empty(); }
  std::size_t empty_label_count() const;
  double mean_label_count() const;
};

struct ParseOptions {
  /// Scale every feature vector to unit Euclidean norm after parsing.
  bool l2_normalize = true;
};

// Text format:
//   N F L
//   l1,l2,...,lk idx1:val1 idx2:val2 ...
// An example without labels starts with a space. Parse errors carry the
// 1-based line number.
SparseDataset parse_xmlc(std::istream& in, const ParseOptions& options = {});
SparseDataset parse_xmlc(const std::filesystem::path& path, const ParseOptions& options = {});

/// Writes the same format back; values use 17 significant digits.
void write_xmlc(const SparseDataset& ds, std::ostream& out);

/// Rescales each feature row to unit L2 norm (zero rows untouched).
void l2_normalize(SparseDataset& ds);

struct LabelStats {
  std::vector<std::size_t> frequency;  // N_l per label
  std::size_t max_set_size = 0;
  std::size_t total_assignments = 0;  // sum of |y| == sum of frequency
};

LabelStats label_stats(const SparseDataset& ds);

/// Inverse-sigmoid-of-log-frequency propensity model:
///   p_l = 1 / (1 + C exp(-a log(N_l + b))),  C = (log n - 1)(b + 1)^a
struct PropensityModel {
  double a = 0.55;
  double b = 1.5;
  std::vector<double> propensities;

  double operator[](std::size_t label) const { return propensities[label]; }
  static PropensityModel uniform(std::size_t n_labels);
};

PropensityModel compute_propensities(const LabelStats& stats, std::size_t n_points, double a = 0.55,
                                     double b = 1.5);

/// CSV with header label_id,count,propensity.
void write_label_stats_csv(const LabelStats& stats, const PropensityModel& prop, std::ostream& out);

SparseDataset subset(const SparseDataset& ds, std::span<const std::size_t> indices);
SparseDataset drop_empty_labels(const SparseDataset& ds);

/// Seed-deterministic partition: a Fisher-Yates permutation of the example
/// indices, the first round(fraction * n) going to the first part. Each part
/// keeps the original relative order of its examples.
std::pair<SparseDataset, SparseDataset> split(const SparseDataset& ds, double fraction,
                                              std::uint64_t seed);

/// Per-epoch shuffled mini-batches of example indices. Epoch e uses a
/// generator seeded from (seed, e), so any epoch can be regenerated alone.
class BatchSampler {
 public:
  BatchSampler(std::size_t n_examples, std::size_t batch_size, std::uint64_t seed);

  std::vector<std::vector<std::size_t>> epoch(std::size_t epoch_index) const;
  std::size_t batch_size() const { return batch_size_; }

 private:
  std::size_t n_;
  std::size_t batch_size_;
  std::uint64_t seed_;
};

}  // namespace xmlc
