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

#include "xmlc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "xmlc/errors.hpp"

namespace xmlc {
namespace {

void check_k(std::size_t k, std::size_t n_labels) {
  if (k < 1 || k > n_labels) {
    throw ContractError("k=" + std::to_string(k) + " outside [1, " + std::to_string(n_labels) + "]");
  }
}

bool contains(const LabelSet& truth, std::uint32_t label) {
  return std::binary_search(truth.begin(), truth.end(), label);
}

double discount(std::size_t rank) { return 1.0 / std::log2(static_cast<double>(rank) + 1.0); }

void check_propensities(const PropensityModel& prop, std::size_t n_labels) {
  if (prop.propensities.size() != n_labels) {
    throw ContractError("propensity model covers " + std::to_string(prop.propensities.size()) +
                        " labels, scores cover " + std::to_string(n_labels));
  }
}

}  // namespace

std::vector<std::uint32_t> rank_k(std::span<const double> scores, std::size_t k) {
  check_k(k, scores.size());
  for (double s : scores)
    if (!std::isfinite(s)) throw ContractError("rank_k: non-finite score");
  std::vector<std::uint32_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0u);
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                    [&scores](std::uint32_t a, std::uint32_t b) {
                      return scores[a] > scores[b] || (scores[a] == scores[b] && a < b);
                    });
  idx.resize(k);
  return idx;
}

double precision_at_k(std::span<const double> scores, const LabelSet& truth, std::size_t k) {
  const auto top = rank_k(scores, k);
  std::size_t hits = 0;
  for (auto l : top) hits += contains(truth, l) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(k);
}

std::optional<double> ndcg_at_k(std::span<const double> scores, const LabelSet& truth, std::size_t k) {
  const auto top = rank_k(scores, k);
  if (truth.empty()) return std::nullopt;
  double dcg = 0.0;
  for (std::size_t r = 0; r < top.size(); ++r)
    if (contains(truth, top[r])) dcg += discount(r + 1);
  double ideal = 0.0;
  for (std::size_t r = 1; r <= std::min(k, truth.size()); ++r) ideal += discount(r);
  return dcg / ideal;
}

double psp_at_k(std::span<const double> scores, const LabelSet& truth, const PropensityModel& prop,
                std::size_t k) {
  check_propensities(prop, scores.size());
  const auto top = rank_k(scores, k);
  double total = 0.0;
  for (auto l : top)
    if (contains(truth, l)) total += 1.0 / prop[l];
  return total / static_cast<double>(k);
}

double psndcg_at_k(std::span<const double> scores, const LabelSet& truth, const PropensityModel& prop,
                   std::size_t k) {
  check_propensities(prop, scores.size());
  const auto top = rank_k(scores, k);
  double dcg = 0.0;
  for (std::size_t r = 0; r < top.size(); ++r)
    if (contains(truth, top[r])) dcg += discount(r + 1) / prop[top[r]];
  double norm = 0.0;
  for (std::size_t r = 1; r <= k; ++r) norm += discount(r);
  return dcg / norm;
}

const char* metric_name(Metric m) {
  switch (m) {
    case Metric::kPrecision: return "P";
    case Metric::kNdcg: return "nDCG";
    case Metric::kPsp: return "PSP";
    case Metric::kPsndcg: return "PSnDCG";
  }
  return "?";
}

const MetricValue& MetricTable::get(Metric m, std::size_t k) const {
  for (const auto& v : values)
    if (v.metric == m && v.k == k) return v;
  throw ContractError(std::string("metric ") + metric_name(m) + "@" + std::to_string(k) + " not in table");
}

MetricAccumulator::MetricAccumulator(std::vector<std::size_t> ks, const PropensityModel* prop)
    : ks_(std::move(ks)), prop_(prop), samples_(kAllMetrics.size() * ks_.size()) {
  if (ks_.empty()) throw ContractError("no k values requested");
  if (!std::is_sorted(ks_.begin(), ks_.end())) throw ContractError("k values must be sorted ascending");
  if (prop_ == nullptr) throw ContractError("metric accumulator needs a propensity model");
}

void MetricAccumulator::add(std::span<const double> scores, const LabelSet& truth) {
  for (auto k : ks_) check_k(k, scores.size());
  ++n_examples_;
  if (truth.empty()) {
    ++n_skipped_;
    return;
  }
  for (std::size_t ki = 0; ki < ks_.size(); ++ki) {
    const std::size_t k = ks_[ki];
    samples_[0 * ks_.size() + ki].push_back(precision_at_k(scores, truth, k));
    samples_[1 * ks_.size() + ki].push_back(*ndcg_at_k(scores, truth, k));
    samples_[2 * ks_.size() + ki].push_back(psp_at_k(scores, truth, *prop_, k));
    samples_[3 * ks_.size() + ki].push_back(psndcg_at_k(scores, truth, *prop_, k));
  }
}

MetricTable MetricAccumulator::finish() const {
  MetricTable t;
  t.ks = ks_;
  t.n_examples = n_examples_;
  t.n_skipped = n_skipped_;
  for (std::size_t mi = 0; mi < kAllMetrics.size(); ++mi) {
    for (std::size_t ki = 0; ki < ks_.size(); ++ki) {
      const auto& xs = samples_[mi * ks_.size() + ki];
      MetricValue v{kAllMetrics[mi], ks_[ki]};
      v.count = xs.size();
      if (!xs.empty()) {
        double sum = 0.0;
        for (double x : xs) sum += x;
        v.mean = sum / static_cast<double>(xs.size());
        if (xs.size() > 1) {
          double sq = 0.0;
          for (double x : xs) sq += (x - v.mean) * (x - v.mean);
          v.std = std::sqrt(sq / static_cast<double>(xs.size() - 1));
        }
      }
      t.values.push_back(v);
    }
  }
  return t;
}

}  // namespace xmlc
