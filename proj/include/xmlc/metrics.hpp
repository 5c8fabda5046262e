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

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "xmlc/dataset.hpp"

namespace xmlc {

/// Indices of the k largest scores, descending; ties go to the lower label
/// index. Requires 1 <= k <= scores.size() and finite scores.
std::vector<std::uint32_t> rank_k(std::span<const double> scores, std::size_t k);

double precision_at_k(std::span<const double> scores, const LabelSet& truth, std::size_t k);

/// nDCG@k with gains at rank positions r = 1..k discounted by 1/log2(r+1),
/// normalized by the ideal DCG over min(k, |y|) positions. Returns nullopt
/// for an empty truth set (the example is skipped in aggregates).
std::optional<double> ndcg_at_k(std::span<const double> scores, const LabelSet& truth, std::size_t k);

double psp_at_k(std::span<const double> scores, const LabelSet& truth, const PropensityModel& prop,
                std::size_t k);

/// Propensity-scored DCG divided by sum_{r=1..k} 1/log2(r+1); the normalizer
/// always has k terms, unlike ndcg_at_k.
double psndcg_at_k(std::span<const double> scores, const LabelSet& truth, const PropensityModel& prop,
                   std::size_t k);

enum class Metric : std::uint8_t { kPrecision, kNdcg, kPsp, kPsndcg };
inline constexpr std::array<Metric, 4> kAllMetrics = {Metric::kPrecision, Metric::kNdcg, Metric::kPsp,
                                                      Metric::kPsndcg};
const char* metric_name(Metric m);  // "P", "nDCG", "PSP", "PSnDCG"

struct MetricValue {
  Metric metric;
  std::size_t k;
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation
  std::size_t count = 0;
};

/// Aggregated metric values over a set of examples.
struct MetricTable {
  std::vector<std::size_t> ks;
  std::vector<MetricValue> values;  // metric-major, then k ascending
  std::size_t n_examples = 0;
  std::size_t n_skipped = 0;  // examples with empty truth

  const MetricValue& get(Metric m, std::size_t k) const;
};

/// Collects per-example metric values in insertion order; finish() reduces
/// them in that same order so results do not depend on how predictions
/// were produced.
class MetricAccumulator {
 public:
  MetricAccumulator(std::vector<std::size_t> ks, const PropensityModel* prop);

  void add(std::span<const double> scores, const LabelSet& truth);
  MetricTable finish() const;

 private:
  std::vector<std::size_t> ks_;
  const PropensityModel* prop_;
  std::vector<std::vector<double>> samples_;  // one vector per (metric, k)
  std::size_t n_examples_ = 0;
  std::size_t n_skipped_ = 0;
};

}  // namespace xmlc
