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

#include <cmath>
#include <set>
#include <sstream>

#include "doctest.h"
#include "metric_oracle.hpp"
#include "xmlc/errors.hpp"
#include "xmlc/metrics.hpp"
#include "xmlc/report.hpp"
#include "xmlc/rng.hpp"

using namespace xmlc;

namespace {

struct Instance {
  std::vector<double> scores;
  LabelSet truth;
  PropensityModel prop;
};

Instance random_instance(Rng& rng, bool allow_ties = true) {
  Instance in;
  const std::size_t n = 5 + rng.below(16);  // L <= 20
  for (std::size_t l = 0; l < n; ++l) {
    double s = rng.normal();
    if (allow_ties && rng.uniform() < 0.2) s = std::round(s);
    in.scores.push_back(s);
    if (rng.uniform() < 0.3) in.truth.push_back(static_cast<std::uint32_t>(l));
  }
  if (in.truth.empty()) in.truth.push_back(static_cast<std::uint32_t>(rng.below(n)));
  for (std::size_t l = 0; l < n; ++l) in.prop.propensities.push_back(1e-3 + (1.0 - 1e-3) * rng.uniform());
  return in;
}

}  // namespace

TEST_CASE("rank_k examples") {
  const std::vector<double> s{0.1, 0.9, 0.5};
  CHECK(rank_k(s, 2) == std::vector<std::uint32_t>{1, 2});
  const std::vector<double> tie{0.5, 0.5};
  CHECK(rank_k(tie, 2) == std::vector<std::uint32_t>{0, 1});
  CHECK_THROWS_AS(rank_k(s, 0), ContractError);
  CHECK_THROWS_AS(rank_k(s, 4), ContractError);
}

TEST_CASE("rank_k equals full sort then truncate on 1000 random vectors") {
  Rng rng(123);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto in = random_instance(rng);
    const std::size_t k = 1 + rng.below(in.scores.size());
    auto full = oracle::full_ranking(in.scores);
    full.resize(k);
    CHECK(rank_k(in.scores, k) == full);
  }
}

TEST_CASE("precision examples") {
  const std::vector<double> s{0.9, 0.1, 0.8, 0.0};
  const LabelSet truth{0, 2};
  CHECK(precision_at_k(s, truth, 1) == 1.0);
  CHECK(std::abs(precision_at_k(s, truth, 3) - 2.0 / 3.0) < 1e-15);
  CHECK(precision_at_k(s, LabelSet{0, 1, 2, 3}, 4) == 1.0);
}

TEST_CASE("ndcg examples") {
  const std::vector<double> s{0.9, 0.1, 0.8, 0.0};
  const LabelSet truth{0, 2};
  CHECK(*ndcg_at_k(s, truth, 1) == precision_at_k(s, truth, 1));
  CHECK(std::abs(*ndcg_at_k(s, truth, 3) - 1.0) < 1e-15);
  CHECK(std::abs(*ndcg_at_k(s, LabelSet{0, 2, 3}, 2) - 1.0) < 1e-15);
  CHECK_FALSE(ndcg_at_k(s, LabelSet{}, 2).has_value());
}

TEST_CASE("psp examples") {
  const std::vector<double> s{0.2, 0.9, 0.1};
  CHECK(psp_at_k(s, LabelSet{1}, PropensityModel::uniform(3), 2) == precision_at_k(s, LabelSet{1}, 2));
  PropensityModel p = PropensityModel::uniform(3);
  p.propensities[1] = 0.5;
  CHECK(psp_at_k(s, LabelSet{1}, p, 1) == 2.0);
  CHECK(psp_at_k(s, LabelSet{2}, p, 1) == 0.0);
}

TEST_CASE("psndcg examples") {
  const std::vector<double> s{0.9, 0.8, 0.7, 0.1};
  CHECK(std::abs(psndcg_at_k(s, LabelSet{0, 1, 2}, PropensityModel::uniform(4), 3) - 1.0) < 1e-15);
  PropensityModel p = PropensityModel::uniform(4);
  p.propensities[0] = 0.5;
  CHECK(psndcg_at_k(s, LabelSet{0}, p, 1) == 2.0);
  CHECK(psndcg_at_k(s, LabelSet{3}, p, 2) == 0.0);
}

TEST_CASE("metric invariants on random instances") {
  Rng rng(55);
  for (int trial = 0; trial < 1000; ++trial) {
    auto in = random_instance(rng);
    const std::size_t k = 1 + rng.below(std::min<std::size_t>(5, in.scores.size()));
    const double p = precision_at_k(in.scores, in.truth, k);
    const double n = *ndcg_at_k(in.scores, in.truth, k);
    CHECK(p >= 0.0);
    CHECK(p <= 1.0);
    CHECK(n >= 0.0);
    CHECK(n <= 1.0 + 1e-15);
    CHECK(precision_at_k(in.scores, in.truth, 1) == *ndcg_at_k(in.scores, in.truth, 1));

    // Scale invariance.
    const double c = 0.01 + 10.0 * rng.uniform();
    std::vector<double> scaled = in.scores;
    for (double& v : scaled) v *= c;
    CHECK(rank_k(scaled, k) == rank_k(in.scores, k));
    CHECK(psndcg_at_k(scaled, in.truth, in.prop, k) == psndcg_at_k(in.scores, in.truth, in.prop, k));

    // Monotone hits: a label in the top-k that becomes relevant.
    const auto top = rank_k(in.scores, k);
    const auto extra = top[rng.below(k)];
    LabelSet more = in.truth;
    if (std::find(more.begin(), more.end(), extra) == more.end()) {
      more.push_back(extra);
      std::sort(more.begin(), more.end());
      CHECK(precision_at_k(in.scores, more, k) >= p);
      // nDCG's ideal-DCG normalizer grows with |y| while |y| < k, so the
      // property only holds once the truth set already fills the top-k.
      if (in.truth.size() >= k) CHECK(*ndcg_at_k(in.scores, more, k) >= n - 1e-15);
      CHECK(psp_at_k(in.scores, more, in.prop, k) >= psp_at_k(in.scores, in.truth, in.prop, k));
      CHECK(psndcg_at_k(in.scores, more, in.prop, k) >= psndcg_at_k(in.scores, in.truth, in.prop, k));
    }
  }
}

TEST_CASE("nDCG can drop when a new relevant label enters a short truth set") {
  const std::vector<double> s{0.9, 0.5, 0.4};
  CHECK(*ndcg_at_k(s, LabelSet{0}, 3) == 1.0);
  CHECK(*ndcg_at_k(s, LabelSet{0, 2}, 3) < 1.0);
}

TEST_CASE("metrics match the brute-force oracle (1000 instances)") {
  Rng rng(2718);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto in = random_instance(rng);
    for (std::size_t k : {1, 3, 5}) {
      const auto ref = oracle::metrics(in.scores, in.truth, in.prop.propensities, k);
      CHECK(std::abs(precision_at_k(in.scores, in.truth, k) - ref.p) < 1e-9);
      // The oracle uses natural logs: agreement also shows base independence.
      CHECK(std::abs(*ndcg_at_k(in.scores, in.truth, k) - ref.ndcg) < 1e-9);
      CHECK(std::abs(psp_at_k(in.scores, in.truth, in.prop, k) - ref.psp) < 1e-9);
      CHECK(std::abs(psndcg_at_k(in.scores, in.truth, in.prop, k) - ref.psndcg) < 1e-9);
    }
  }
}

TEST_CASE("accumulator skips empty truth and aggregates in order") {
  const auto prop = PropensityModel::uniform(3);
  MetricAccumulator acc({1, 2}, &prop);
  acc.add(std::vector<double>{0.9, 0.1, 0.0}, LabelSet{0});
  acc.add(std::vector<double>{0.9, 0.1, 0.0}, LabelSet{1});
  acc.add(std::vector<double>{0.9, 0.1, 0.0}, LabelSet{});
  const auto t = acc.finish();
  CHECK(t.n_examples == 3);
  CHECK(t.n_skipped == 1);
  CHECK(t.get(Metric::kPrecision, 1).mean == 0.5);
  CHECK(std::abs(t.get(Metric::kPrecision, 1).std - std::sqrt(0.5)) < 1e-15);
  CHECK(t.get(Metric::kPrecision, 2).mean == 0.5);
  CHECK(t.get(Metric::kPrecision, 1).count == 2);
  CHECK_THROWS_AS(acc.add(std::vector<double>{0.1}, LabelSet{0}), ContractError);
  CHECK_THROWS_AS(MetricAccumulator({2, 1}, &prop), ContractError);
}

TEST_CASE("report CSV and JSON agree value for value") {
  const auto prop = PropensityModel::uniform(4);
  MetricAccumulator acc({1, 3}, &prop);
  Rng rng(9);
  for (int i = 0; i < 20; ++i) {
    std::vector<double> s(4);
    for (double& v : s) v = rng.normal();
    acc.add(s, LabelSet{static_cast<std::uint32_t>(rng.below(4))});
  }
  const std::vector<EvalReport> reps{EvalReport::from_table("toy", "nar", acc.finish())};
  std::ostringstream csv;
  write_report_csv(reps, csv);
  const auto back = report_from_json(nlohmann::json::parse(report_to_json(reps).dump()));
  std::istringstream lines(csv.str());
  std::string line;
  std::getline(lines, line);
  CHECK(line == "dataset,model,metric,k,mean,std,n_runs");
  std::size_t i = 0;
  while (std::getline(lines, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    REQUIRE(cells.size() == 7);
    const auto& row = back[0].rows.at(i++);
    CHECK(cells[2] == metric_name(row.metric));
    CHECK(std::abs(std::stod(cells[4]) - row.mean) < 1e-12);
    CHECK(std::abs(std::stod(cells[5]) - row.std) < 1e-12);
  }
  CHECK(i == 8);
}

TEST_CASE("combine_runs averages run means") {
  EvalReport a{"d", "m", {{Metric::kPrecision, 1, 0.4, 0.1, 1}}, 10, 0};
  EvalReport b{"d", "m", {{Metric::kPrecision, 1, 0.6, 0.1, 1}}, 10, 0};
  const std::vector<EvalReport> runs{a, b};
  const auto c = combine_runs(runs);
  CHECK(std::abs(c.rows[0].mean - 0.5) < 1e-15);
  CHECK(std::abs(c.rows[0].std - std::sqrt(0.02)) < 1e-15);
  CHECK(c.rows[0].n_runs == 2);
}
