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

#include "xmlc/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>

#include "xmlc/errors.hpp"
#include "xmlc/rng.hpp"

namespace xmlc {
namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r'; }

std::vector<std::string_view> tokenize(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && is_space(line[i])) ++i;
    std::size_t j = i;
    while (j < line.size() && !is_space(line[j])) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

template <typename T>
T parse_number(std::string_view token, std::size_t line, const char* what) {
  T value{};
  const char* first = token.data();
  const char* last = token.data() + token.size();
  if (!token.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    throw ParseError(line, std::string("invalid ") + what + " '" + std::string(token) + "'");
  }
  return value;
}

void parse_labels(std::string_view token, std::size_t line, std::size_t n_labels, LabelSet& out) {
  std::size_t start = 0;
  while (start <= token.size()) {
    std::size_t comma = token.find(',', start);
    if (comma == std::string_view::npos) comma = token.size();
    const std::string_view piece = token.substr(start, comma - start);
    if (piece.empty()) throw ParseError(line, "empty label in '" + std::string(token) + "'");
    const auto label = parse_number<std::uint64_t>(piece, line, "label index");
    if (label >= n_labels) {
      throw ParseError(line, "label index " + std::to_string(label) + " out of range [0, " +
                                 std::to_string(n_labels) + ")");
    }
    out.push_back(static_cast<std::uint32_t>(label));
    start = comma + 1;
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
}

FeatureValue parse_feature(std::string_view token, std::size_t line, std::size_t n_features) {
  const std::size_t colon = token.find(':');
  if (colon == std::string_view::npos) {
    throw ParseError(line, "expected index:value, got '" + std::string(token) + "'");
  }
  const auto index = parse_number<std::uint64_t>(token.substr(0, colon), line, "feature index");
  if (index >= n_features) {
    throw ParseError(line, "feature index " + std::to_string(index) + " out of range [0, " +
                               std::to_string(n_features) + ")");
  }
  const double value = parse_number<double>(token.substr(colon + 1), line, "feature value");
  if (!std::isfinite(value)) throw ParseError(line, "non-finite feature value");
  return {static_cast<std::uint32_t>(index), value};
}

}  // namespace

std::size_t SparseDataset::empty_label_count() const {
  return static_cast<std::size_t>(
      std::count_if(examples.begin(), examples.end(), [](const Example& e) { return e.labels.empty(); }));
}

double SparseDataset::mean_label_count() const {
  if (examples.empty()) return 0.0;
  std::size_t total = 0;
  for (const auto& e : examples) total += e.labels.size();
  return static_cast<double>(total) / static_cast<double>(examples.size());
}

SparseDataset parse_xmlc(std::istream& in, const ParseOptions& options) {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw ParseError(1, "missing header 'N F L'");
  ++line_no;
  const auto header = tokenize(line);
  if (header.size() != 3) throw ParseError(1, "header must be three integers 'N F L'");
  const auto n = parse_number<std::size_t>(header[0], 1, "header count");
  SparseDataset ds;
  ds.n_features = parse_number<std::size_t>(header[1], 1, "header count");
  ds.n_labels = parse_number<std::size_t>(header[2], 1, "header count");
  if (ds.n_features == 0 || ds.n_labels == 0) throw ParseError(1, "header dimensions must be positive");
  ds.examples.reserve(n);

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto tokens = tokenize(line);
    if (tokens.empty()) {
      if (line.empty()) continue;  // trailing blank line
      // A line of pure whitespace is an example with no labels and no features.
    }
    if (ds.examples.size() == n) {
      throw ParseError(line_no, "more examples than the " + std::to_string(n) + " declared in the header");
    }
    Example ex;
    std::size_t first_feature = 0;
    const bool starts_with_labels =
        !line.empty() && !is_space(line[0]) && !tokens.empty() && tokens[0].find(':') == std::string_view::npos;
    if (starts_with_labels) {
      parse_labels(tokens[0], line_no, ds.n_labels, ex.labels);
      first_feature = 1;
    }
    for (std::size_t t = first_feature; t < tokens.size(); ++t) {
      ex.features.push_back(parse_feature(tokens[t], line_no, ds.n_features));
    }
    std::sort(ex.features.begin(), ex.features.end(),
              [](const FeatureValue& a, const FeatureValue& b) { return a.index < b.index; });
    for (std::size_t k = 1; k < ex.features.size(); ++k) {
      if (ex.features[k].index == ex.features[k - 1].index) {
        throw ParseError(line_no, "duplicate feature index " + std::to_string(ex.features[k].index));
      }
    }
    ds.examples.push_back(std::move(ex));
  }
  if (ds.examples.size() != n) {
    throw ParseError(line_no, "header declares " + std::to_string(n) + " examples, found " +
                                  std::to_string(ds.examples.size()));
  }
  if (options.l2_normalize) l2_normalize(ds);
  return ds;
}

SparseDataset parse_xmlc(const std::filesystem::path& path, const ParseOptions& options) {
  std::ifstream in(path);
  if (!in) throw ContractError("cannot open dataset file " + path.string());
  return parse_xmlc(in, options);
}

void write_xmlc(const SparseDataset& ds, std::ostream& out) {
  out << ds.size() << ' ' << ds.n_features << ' ' << ds.n_labels << '\n';
  std::ostringstream value;
  value << std::setprecision(17);
  for (const auto& ex : ds.examples) {
    for (std::size_t i = 0; i < ex.labels.size(); ++i) out << (i ? "," : "") << ex.labels[i];
    if (ex.labels.empty() && ex.features.empty()) out << ' ';
    for (const auto& f : ex.features) {
      value.str("");
      value << f.value;
      out << ' ' << f.index << ':' << value.str();
    }
    out << '\n';
  }
}

void l2_normalize(SparseDataset& ds) {
  for (auto& ex : ds.examples) {
    double sq = 0.0;
    for (const auto& f : ex.features) sq += f.value * f.value;
    if (sq <= 0.0) continue;
    const double inv = 1.0 / std::sqrt(sq);
    for (auto& f : ex.features) f.value *= inv;
  }
}

LabelStats label_stats(const SparseDataset& ds) {
  LabelStats s;
  s.frequency.assign(ds.n_labels, 0);
  for (const auto& ex : ds.examples) {
    s.max_set_size = std::max(s.max_set_size, ex.labels.size());
    s.total_assignments += ex.labels.size();
    for (auto l : ex.labels) ++s.frequency[l];
  }
  return s;
}

PropensityModel PropensityModel::uniform(std::size_t n_labels) {
  PropensityModel m;
  m.propensities.assign(n_labels, 1.0);
  return m;
}

PropensityModel compute_propensities(const LabelStats& stats, std::size_t n_points, double a, double b) {
  if (n_points < 3) {
    throw DomainError("propensity model needs at least 3 points (log(n) - 1 must be positive)");
  }
  if (!(a > 0.0 && a < 1.0)) throw DomainError("propensity parameter a must lie in (0, 1)");
  if (!(b > 0.0)) throw DomainError("propensity parameter b must be positive");
  PropensityModel m;
  m.a = a;
  m.b = b;
  const double c = (std::log(static_cast<double>(n_points)) - 1.0) * std::pow(b + 1.0, a);
  m.propensities.reserve(stats.frequency.size());
  for (std::size_t n_l : stats.frequency) {
    const double count = static_cast<double>(n_l);
    m.propensities.push_back(1.0 / (1.0 + c * std::exp(-a * std::log(count + b))));
  }
  return m;
}

void write_label_stats_csv(const LabelStats& stats, const PropensityModel& prop, std::ostream& out) {
  if (stats.frequency.size() != prop.propensities.size()) {
    throw ContractError("label statistics and propensities cover different label counts");
  }
  out << "label_id,count,propensity\n";
  out << std::setprecision(17);
  for (std::size_t l = 0; l < stats.frequency.size(); ++l) {
    out << l << ',' << stats.frequency[l] << ',' << prop.propensities[l] << '\n';
  }
}

SparseDataset subset(const SparseDataset& ds, std::span<const std::size_t> indices) {
  SparseDataset out;
  out.n_features = ds.n_features;
  out.n_labels = ds.n_labels;
  out.examples.reserve(indices.size());
  for (std::size_t i : indices) {
    if (i >= ds.size()) throw ContractError("subset index " + std::to_string(i) + " out of range");
    out.examples.push_back(ds.examples[i]);
  }
  return out;
}

SparseDataset drop_empty_labels(const SparseDataset& ds) {
  SparseDataset out;
  out.n_features = ds.n_features;
  out.n_labels = ds.n_labels;
  for (const auto& ex : ds.examples)
    if (ex.has_labels()) out.examples.push_back(ex);
  return out;
}

std::pair<SparseDataset, SparseDataset> split(const SparseDataset& ds, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw ContractError("split fraction must lie in (0, 1)");
  const std::size_t n = ds.size();
  const auto first = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  if (first == 0 || first >= n) {
    throw ContractError("split fraction " + std::to_string(fraction) + " leaves an empty side for " +
                        std::to_string(n) + " examples");
  }
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  Rng rng(seed);
  shuffle(perm, rng);
  std::vector<std::size_t> a(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(first));
  std::vector<std::size_t> b(perm.begin() + static_cast<std::ptrdiff_t>(first), perm.end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  return {subset(ds, a), subset(ds, b)};
}

BatchSampler::BatchSampler(std::size_t n_examples, std::size_t batch_size, std::uint64_t seed)
    : n_(n_examples), batch_size_(batch_size), seed_(seed) {
  if (batch_size == 0) throw ContractError("batch size must be at least 1");
}

std::vector<std::vector<std::size_t>> BatchSampler::epoch(std::size_t epoch_index) const {
  Rng mixer(seed_);
  Rng rng(mixer.next_u64() ^ (0xD1B54A32D192ED03ULL * (epoch_index + 1)));
  std::vector<std::size_t> perm(n_);
  for (std::size_t i = 0; i < n_; ++i) perm[i] = i;
  shuffle(perm, rng);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t s = 0; s < n_; s += batch_size_) {
    const std::size_t e = std::min(n_, s + batch_size_);
    out.emplace_back(perm.begin() + static_cast<std::ptrdiff_t>(s), perm.begin() + static_cast<std::ptrdiff_t>(e));
  }
  return out;
}

}  // namespace xmlc
