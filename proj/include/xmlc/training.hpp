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

// Mini-batch Adam training with KL warm-up, validation P@1 early stopping and
// seed-determinism, plus dataset-level evaluation.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

#include "json.hpp"
#include "xmlc/dataset.hpp"
#include "xmlc/metrics.hpp"
#include "xmlc/model.hpp"

namespace xmlc {

struct TrainConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 100;
  std::size_t patience = 10;
  std::uint64_t seed = 1;
  std::size_t kl_warmup_steps = 5000;
  std::vector<std::size_t> eval_ks{1, 3, 5};
  std::size_t n_refine = 2;
  double clip_norm = 5.0;
  std::size_t elbo_samples = 1;  // NAR: noise draws averaged per example
  std::size_t workers = 1;       // evaluation threads
  bool early_stopping = true;    // false: run max_epochs and keep the final parameters

  void validate() const;
  /// KL weight after `updates` optimizer steps.
  double beta(std::size_t updates) const;
};

nlohmann::json to_json(const TrainConfig& c);
/// Unknown keys raise SchemaError naming the key.
TrainConfig train_config_from_json(const nlohmann::json& j);

struct EpochRecord {
  std::size_t epoch = 0;        // 1-based
  double objective = 0.0;       // NAR: mean ELBO (maximized); AR: mean NLL (minimized)
  double reconstruction = 0.0;  // NAR only
  double length_ll = 0.0;       // NAR only
  double kl = 0.0;              // NAR only
  double beta = 0.0;            // KL weight at the end of the epoch (NAR)
  double val_p1 = 0.0;
  double wall_seconds = 0.0;    // excluded from the deterministic history CSV
};

struct TrainHistory {
  std::vector<EpochRecord> records;
  std::size_t best_epoch = 0;
  bool stopped_early = false;
};

/// Deterministic columns only: epoch,objective,reconstruction,length_ll,kl,beta,val_p1
void write_history_csv(const TrainHistory& h, std::ostream& out);
/// Columns: epoch,wall_seconds
void write_timing_csv(const TrainHistory& h, std::ostream& out);

/// Optimizer and noise state at the end of training, for checkpoints.
struct TrainState {
  nlohmann::json optimizer;
  std::uint64_t rng_state = 0;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Trains `model` in place. Examples without labels are dropped from
/// `train_set`; `validation` is used as is for per-epoch P@1. On return the
/// parameters of the best epoch are restored. A non-finite objective or
/// gradient restores the last good parameters and throws DivergenceError.
TrainHistory train(Model& model, const SparseDataset& train_set, const SparseDataset& validation,
                   const TrainConfig& config, TrainState* state = nullptr, const EpochCallback& on_epoch = {});

/// Scores every example, in dataset order, using `workers` threads.
std::vector<std::vector<double>> score_dataset(const Model& model, const SparseDataset& ds, std::size_t n_refine,
                                               std::size_t workers = 1);

/// Metrics for precomputed per-example scores, reduced in dataset order.
MetricTable evaluate_scores(const std::vector<std::vector<double>>& scores, const SparseDataset& ds,
                            const PropensityModel* propensities, const std::vector<std::size_t>& ks);

/// Metrics over `ds` for the sorted `ks`. Throws ContractError when the
/// dataset's feature or label space does not match the model or k > L.
MetricTable evaluate(const Model& model, const SparseDataset& ds, const PropensityModel* propensities,
                     const std::vector<std::size_t>& ks, std::size_t n_refine, std::size_t workers = 1);

}  // namespace xmlc
