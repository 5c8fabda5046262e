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

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "data_paths.hpp"
#include "doctest.h"
#include "xmlc/dataset.hpp"
#include "xmlc/errors.hpp"
#include "xmlc/rng.hpp"

using namespace xmlc;

namespace {

SparseDataset parse_string(const std::string& text, bool normalize = false) {
  std::istringstream in(text);
  return parse_xmlc(in, ParseOptions{normalize});
}

SparseDataset random_dataset(Rng& rng, std::size_t n, std::size_t f, std::size_t l) {
  SparseDataset ds;
  ds.n_features = f;
  ds.n_labels = l;
  for (std::size_t i = 0; i < n; ++i) {
    Example ex;
    for (std::uint32_t j = 0; j < f; ++j)
      if (rng.uniform() < 0.3) ex.features.push_back({j, rng.normal()});
    for (std::uint32_t j = 0; j < l; ++j)
      if (rng.uniform() < 0.2) ex.labels.push_back(j);
    ds.examples.push_back(std::move(ex));
  }
  return ds;
}

}  // namespace

TEST_CASE("parse the constructed fixture") {
  const auto ds = parse_string("2 4 3\n0,2 1:0.5 3:1.0\n1 0:2.0\n");
  REQUIRE(ds.size() == 2);
  CHECK(ds.n_features == 4);
  CHECK(ds.n_labels == 3);
  CHECK(ds.examples[0].labels == LabelSet{0, 2});
  CHECK(ds.examples[0].features == SparseRow{{1, 0.5}, {3, 1.0}});
  CHECK(ds.examples[1].labels == LabelSet{1});
  CHECK(ds.examples[1].features == SparseRow{{0, 2.0}});
}

TEST_CASE("empty label lines are kept and counted") {
  const auto ds = parse_string("3 4 3\n 0:1.0 2:1.0\n2 1:1\n1,0,1\n");
  REQUIRE(ds.size() == 3);
  CHECK(ds.examples[0].labels.empty());
  CHECK(ds.examples[0].features.size() == 2);
  CHECK(ds.examples[2].labels == LabelSet{0, 1});
  CHECK(ds.examples[2].features.empty());
  CHECK(ds.empty_label_count() == 1);
  CHECK(drop_empty_labels(ds).size() == 2);
}

TEST_CASE("parse errors carry line numbers") {
  try {
    parse_string("2 4\n0 1:1\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 1);
  }
  try {
    parse_string("2 4 3\n0 1:1\n1 7:0.5\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
    const std::string msg = e.what();
    CHECK(msg.find("7") != std::string::npos);
    CHECK(msg.find("[0, 4)") != std::string::npos);
  }
  try {
    parse_string("1 4 3\n5 1:1\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("label index 5") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_string(""), ParseError);
  CHECK_THROWS_AS(parse_string("3 4 3\n0 1:1\n"), ParseError);
  CHECK_THROWS_AS(parse_string("1 4 3\n0 1:x\n"), ParseError);
  CHECK_THROWS_AS(parse_string("1 4 3\n0 1:1\n1 1:1\n"), ParseError);
}

TEST_CASE("l2 normalization gives unit rows") {
  const auto ds = parse_string("1 4 3\n0 1:3 3:4\n", true);
  CHECK(std::abs(ds.examples[0].features[0].value - 0.6) < 1e-15);
  CHECK(std::abs(ds.examples[0].features[1].value - 0.8) < 1e-15);
}

TEST_CASE("serialize and re-parse round trip") {
  Rng rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    SparseDataset ds = random_dataset(rng, 1 + rng.below(20), 1 + rng.below(12), 1 + rng.below(8));
    l2_normalize(ds);
    std::ostringstream out;
    write_xmlc(ds, out);
    const auto back = parse_string(out.str(), true);
    REQUIRE(back.size() == ds.size());
    CHECK(back.n_features == ds.n_features);
    CHECK(back.n_labels == ds.n_labels);
    for (std::size_t i = 0; i < ds.size(); ++i) {
      CHECK(back.examples[i].labels == ds.examples[i].labels);
      REQUIRE(back.examples[i].features.size() == ds.examples[i].features.size());
      for (std::size_t k = 0; k < ds.examples[i].features.size(); ++k) {
        CHECK(back.examples[i].features[k].index == ds.examples[i].features[k].index);
        CHECK(std::abs(back.examples[i].features[k].value - ds.examples[i].features[k].value) < 1e-9);
      }
    }
  }
}

TEST_CASE("label statistics") {
  const auto ds = parse_string("3 2 4\n0,3 0:1\n3 1:1\n 0:1\n");
  const auto s = label_stats(ds);
  CHECK(s.frequency == std::vector<std::size_t>{1, 0, 0, 2});
  CHECK(s.max_set_size == 2);
  CHECK(s.total_assignments == 3);
}

TEST_CASE("propensities match an independent evaluation of the closed form") {
  LabelStats s;
  s.frequency = {10000, 0, 1, 100};
  const auto p = compute_propensities(s, 10000, 0.55, 1.5);
  // Reference values computed with mpmath at 30 digits.
  CHECK(std::abs(p[0] - 0.92102933372294181014) < 1e-14);
  CHECK(std::abs(p[1] - 0.084219634767875784648) < 1e-14);
  CHECK(std::abs(p[2] - 0.10857362047581295691) < 1e-14);
  CHECK(std::abs(p[3] - 0.48292615500240623582) < 1e-14);
  CHECK(p[1] == *std::min_element(p.propensities.begin(), p.propensities.end()));
  CHECK(p[2] < p[3]);
}

TEST_CASE("propensities lie in (0,1] and are monotone in frequency") {
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    LabelStats s;
    const std::size_t n = 3 + rng.below(100000);
    for (int l = 0; l < 30; ++l) s.frequency.push_back(rng.below(n + 1));
    const double a = 0.05 + 0.9 * rng.uniform();
    const double b = 0.1 + 5.0 * rng.uniform();
    const auto p = compute_propensities(s, n, a, b);
    for (std::size_t i = 0; i < s.frequency.size(); ++i) {
      CHECK(p[i] > 0.0);
      CHECK(p[i] <= 1.0);
      for (std::size_t j = 0; j < s.frequency.size(); ++j)
        if (s.frequency[i] <= s.frequency[j]) CHECK(p[i] <= p[j]);
    }
  }
}

TEST_CASE("propensity domain errors") {
  LabelStats s;
  s.frequency = {1};
  CHECK_THROWS_AS(compute_propensities(s, 2), DomainError);
  CHECK_THROWS_AS(compute_propensities(s, 10, 1.5, 1.5), DomainError);
  CHECK_THROWS_AS(compute_propensities(s, 10, 0.5, 0.0), DomainError);
}

TEST_CASE("label statistics CSV") {
  LabelStats s;
  s.frequency = {2, 0};
  PropensityModel p = PropensityModel::uniform(2);
  std::ostringstream out;
  write_label_stats_csv(s, p, out);
  CHECK(out.str() == "label_id,count,propensity\n0,2,1\n1,0,1\n");
}

TEST_CASE("split examples") {
  Rng rng(1);
  const auto ds = random_dataset(rng, 10, 5, 4);
  const auto [a, b] = split(ds, 0.8, 42);
  CHECK(a.size() == 8);
  CHECK(b.size() == 2);
  const auto [a2, b2] = split(ds, 0.8, 42);
  for (std::size_t i = 0; i < b.size(); ++i) CHECK(b.examples[i].features == b2.examples[i].features);

  const auto two = random_dataset(rng, 2, 3, 3);
  const auto [c, d] = split(two, 0.5, 7);
  CHECK(c.size() == 1);
  CHECK(d.size() == 1);
  CHECK_THROWS_AS(split(two, 0.1, 7), ContractError);
  CHECK_THROWS_AS(split(two, 1.0, 7), ContractError);
}

TEST_CASE("split is a disjoint exhaustive partition (1000 random datasets)") {
  Rng rng(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + rng.below(40);
    SparseDataset ds = random_dataset(rng, n, 3, 3);
    // Tag each example with a unique feature value so membership is traceable.
    for (std::size_t i = 0; i < n; ++i) ds.examples[i].features = {{0, static_cast<double>(i)}};
    const double fraction = 0.5 / static_cast<double>(n) + rng.uniform() * (1.0 - 1.0 / static_cast<double>(n));
    const auto first = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
    if (first == 0 || first >= n) continue;
    const auto [a, b] = split(ds, fraction, rng.next_u64());
    std::multiset<double> seen;
    for (const auto* part : {&a, &b})
      for (const auto& ex : part->examples) seen.insert(ex.features[0].value);
    CHECK(seen.size() == n);
    CHECK(std::set<double>(seen.begin(), seen.end()).size() == n);
    CHECK(a.size() == first);
  }
}

TEST_CASE("batches") {
  BatchSampler sampler(5, 2, 3);
  const auto e0 = sampler.epoch(0);
  REQUIRE(e0.size() == 3);
  CHECK(e0[0].size() == 2);
  CHECK(e0[1].size() == 2);
  CHECK(e0[2].size() == 1);
  CHECK(BatchSampler(5, 2, 3).epoch(0) == e0);

  BatchSampler big(200, 7, 1);
  CHECK(big.epoch(0) != BatchSampler(200, 7, 2).epoch(0));
  CHECK(big.epoch(0) != big.epoch(1));
  CHECK_THROWS_AS(BatchSampler(5, 0, 1), ContractError);
}

TEST_CASE("every index appears once per epoch (100 random configs)") {
  Rng rng(77);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.below(300);
    const std::size_t bs = 1 + rng.below(50);
    BatchSampler sampler(n, bs, rng.next_u64());
    for (std::size_t e = 0; e < 3; ++e) {
      std::vector<int> count(n, 0);
      for (const auto& batch : sampler.epoch(e)) {
        CHECK(batch.size() <= bs);
        for (auto i : batch) ++count[i];
      }
      CHECK(std::all_of(count.begin(), count.end(), [](int c) { return c == 1; }));
    }
  }
}

TEST_CASE("benchmark files match published statistics") {
  struct Expect {
    const char* name;
    std::size_t n, f, l;
  };
  const Expect expected[] = {{"bibtex", 4880, 1836, 159}, {"mediamill", 30993, 120, 101},
                             {"delicious", 12920, 500, 983}};
  for (const auto& e : expected) {
    const auto path = benchmark_file(e.name, "train");
    if (!path) {
      MESSAGE("skipping " << std::string(e.name) << ": set XMLC_DATA_DIR to check the real training file");
      continue;
    }
    const auto ds = parse_xmlc(*path);
    CHECK(ds.size() == e.n);
    CHECK(ds.n_features == e.f);
    CHECK(ds.n_labels == e.l);
  }
}
