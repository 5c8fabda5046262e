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
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "xmlc/metrics.hpp"

namespace xmlc {

struct ReportRow {
  Metric metric;
  std::size_t k;
  double mean;
  double std;
  std::size_t n_runs;
};

/// Evaluation results for one (dataset, model) pair. Values are fractions in
/// [0, 1] for P and nDCG (the propensity-scored metrics may exceed 1).
struct EvalReport {
  std::string dataset;
  std::string model;
  std::vector<ReportRow> rows;
  std::size_t n_examples = 0;
  std::size_t n_skipped = 0;

  static EvalReport from_table(std::string dataset, std::string model, const MetricTable& table);
  double mean(Metric m, std::size_t k) const;
  const ReportRow& row(Metric m, std::size_t k) const;
};

/// Mean of per-run means with the sample standard deviation across runs.
EvalReport combine_runs(std::span<const EvalReport> runs);

/// Columns: dataset,model,metric,k,mean,std,n_runs
void write_report_csv(std::span<const EvalReport> reports, std::ostream& out);
nlohmann::json report_to_json(std::span<const EvalReport> reports);
std::vector<EvalReport> report_from_json(const nlohmann::json& j);

}  // namespace xmlc
