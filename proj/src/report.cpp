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

#include "xmlc/report.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>

#include "xmlc/errors.hpp"

namespace xmlc {
namespace {

Metric metric_from_name(const std::string& name) {
  for (Metric m : kAllMetrics)
    if (name == metric_name(m)) return m;
  throw SchemaError("unknown metric '" + name + "'");
}

}  // namespace

EvalReport EvalReport::from_table(std::string dataset, std::string model, const MetricTable& table) {
  EvalReport r;
  r.dataset = std::move(dataset);
  r.model = std::move(model);
  r.n_examples = table.n_examples;
  r.n_skipped = table.n_skipped;
  for (const auto& v : table.values) r.rows.push_back({v.metric, v.k, v.mean, v.std, 1});
  return r;
}

const ReportRow& EvalReport::row(Metric m, std::size_t k) const {
  for (const auto& r : rows)
    if (r.metric == m && r.k == k) return r;
  throw ContractError(std::string("report has no ") + metric_name(m) + "@" + std::to_string(k));
}

double EvalReport::mean(Metric m, std::size_t k) const { return row(m, k).mean; }

EvalReport combine_runs(std::span<const EvalReport> runs) {
  if (runs.empty()) throw ContractError("combine_runs needs at least one report");
  EvalReport out = runs[0];
  const double n = static_cast<double>(runs.size());
  for (std::size_t i = 0; i < out.rows.size(); ++i) {
    double sum = 0.0;
    for (const auto& r : runs) {
      if (r.rows.size() != out.rows.size() || r.rows[i].metric != out.rows[i].metric ||
          r.rows[i].k != out.rows[i].k) {
        throw ContractError("combine_runs: reports have different layouts");
      }
      sum += r.rows[i].mean;
    }
    const double mean = sum / n;
    double sq = 0.0;
    for (const auto& r : runs) sq += (r.rows[i].mean - mean) * (r.rows[i].mean - mean);
    out.rows[i].mean = mean;
    out.rows[i].std = runs.size() > 1 ? std::sqrt(sq / (n - 1.0)) : 0.0;
    out.rows[i].n_runs = runs.size();
  }
  return out;
}

void write_report_csv(std::span<const EvalReport> reports, std::ostream& out) {
  out << "dataset,model,metric,k,mean,std,n_runs\n";
  const auto old = out.precision(17);
  for (const auto& rep : reports) {
    for (const auto& r : rep.rows) {
      out << rep.dataset << ',' << rep.model << ',' << metric_name(r.metric) << ',' << r.k << ','
          << r.mean << ',' << r.std << ',' << r.n_runs << '\n';
    }
  }
  out.precision(old);
}

nlohmann::json report_to_json(std::span<const EvalReport> reports) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& rep : reports) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : rep.rows) {
      rows.push_back({{"metric", metric_name(r.metric)},
                      {"k", r.k},
                      {"mean", r.mean},
                      {"std", r.std},
                      {"n_runs", r.n_runs}});
    }
    arr.push_back({{"dataset", rep.dataset},
                   {"model", rep.model},
                   {"n_examples", rep.n_examples},
                   {"n_skipped", rep.n_skipped},
                   {"rows", rows}});
  }
  return {{"reports", arr}};
}

std::vector<EvalReport> report_from_json(const nlohmann::json& j) {
  std::vector<EvalReport> out;
  for (const auto& rj : j.at("reports")) {
    EvalReport rep;
    rep.dataset = rj.at("dataset").get<std::string>();
    rep.model = rj.at("model").get<std::string>();
    rep.n_examples = rj.at("n_examples").get<std::size_t>();
    rep.n_skipped = rj.at("n_skipped").get<std::size_t>();
    for (const auto& row : rj.at("rows")) {
      rep.rows.push_back({metric_from_name(row.at("metric").get<std::string>()), row.at("k").get<std::size_t>(),
                          row.at("mean").get<double>(), row.at("std").get<double>(),
                          row.at("n_runs").get<std::size_t>()});
    }
    out.push_back(std::move(rep));
  }
  return out;
}

}  // namespace xmlc
