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

#include "xmlc/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <thread>

#include "xmlc/errors.hpp"
#include "xmlc/optimizer.hpp"

namespace xmlc {
namespace {

constexpr std::uint64_t kNoiseStream = 0x9E3779B97F4A7C15ULL;

struct ExampleObjective {
  double loss = 0.0;  // minimized quantity
  double objective = 0.0;
  double reconstruction = 0.0;
  double length_ll = 0.0;
  double kl = 0.0;
};

ExampleObjective accumulate_example(Model& model, const Example& ex, double beta, std::size_t samples, Rng& noise,
                                    double weight) {
  ExampleObjective out;
  if (auto* nar = std::get_if<NarModel>(&model)) {
    for (std::size_t s = 0; s < samples; ++s) {
      ad::Graph g;
      const ElboVars e = nar->elbo(g, ex.features, ex.labels, nar->sample_noise(ex.labels, noise), beta);
      const ElboBreakdown b = e.values(beta);
      out.objective += b.total / samples;
      out.reconstruction += b.reconstruction / samples;
      out.length_ll += b.length_ll / samples;
      out.kl += b.kl / samples;
      if (std::isfinite(b.total)) g.backward(ad::scale(e.total, -weight / samples));
    }
    out.loss = -out.objective;
  } else {
    auto& ar = std::get<ArModel>(model);
    ad::Graph g;
    ad::Var nll = ar.sequence_nll(g, ex.features, ex.labels);
    out.loss = out.objective = nll.value().item();
    if (std::isfinite(out.loss)) g.backward(ad::scale(nll, weight));
  }
  return out;
}

void check_spaces(const Model& model, const SparseDataset& ds, const char* what) {
  if (ds.n_features != model_n_features(model) || ds.n_labels != model_n_labels(model)) {
    throw ContractError(std::string(what) + ": dataset has " + std::to_string(ds.n_features) + " features and " +
                        std::to_string(ds.n_labels) + " labels but the model expects " +
                        std::to_string(model_n_features(model)) + " and " + std::to_string(model_n_labels(model)));
  }
}

double validation_p1(const Model& model, const SparseDataset& ds, const TrainConfig& c) {
  // P@1 ignores propensities; the uniform model only satisfies the accumulator.
  const PropensityModel uniform = PropensityModel::uniform(ds.n_labels);
  return evaluate(model, ds, &uniform, {1}, c.n_refine, c.workers).get(Metric::kPrecision, 1).mean;
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ContractError("train: learning_rate must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) {
    throw ContractError("train: adam betas must lie in [0, 1)");
  }
  if (!(adam_epsilon > 0.0)) throw ContractError("train: adam_epsilon must be positive");
  if (batch_size == 0) throw ContractError("train: batch_size must be at least 1");
  if (max_epochs == 0) throw ContractError("train: max_epochs must be at least 1");
  if (patience == 0) throw ContractError("train: patience must be at least 1");
  if (eval_ks.empty() || eval_ks.front() == 0) throw ContractError("train: eval_ks must be positive");
  if (!std::is_sorted(eval_ks.begin(), eval_ks.end()) ||
      std::adjacent_find(eval_ks.begin(), eval_ks.end()) != eval_ks.end()) {
    throw ContractError("train: eval_ks must be strictly ascending");
  }
  if (!(clip_norm > 0.0)) throw ContractError("train: clip_norm must be positive");
  if (elbo_samples == 0) throw ContractError("train: elbo_samples must be at least 1");
  if (workers == 0) throw ContractError("train: workers must be at least 1");
}

double TrainConfig::beta(std::size_t updates) const {
  if (kl_warmup_steps == 0) return 1.0;
  return std::min(1.0, static_cast<double>(updates) / static_cast<double>(kl_warmup_steps));
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"learning_rate", c.learning_rate},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"adam_epsilon", c.adam_epsilon},
          {"batch_size", c.batch_size},
          {"max_epochs", c.max_epochs},
          {"patience", c.patience},
          {"seed", c.seed},
          {"kl_warmup_steps", c.kl_warmup_steps},
          {"eval_ks", c.eval_ks},
          {"n_refine", c.n_refine},
          {"clip_norm", c.clip_norm},
          {"elbo_samples", c.elbo_samples},
          {"workers", c.workers},
          {"early_stopping", c.early_stopping}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw SchemaError("train: expected an object");
  TrainConfig c;
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "learning_rate") c.learning_rate = value.get<double>();
      else if (key == "beta1") c.beta1 = value.get<double>();
      else if (key == "beta2") c.beta2 = value.get<double>();
      else if (key == "adam_epsilon") c.adam_epsilon = value.get<double>();
      else if (key == "batch_size") c.batch_size = value.get<std::size_t>();
      else if (key == "max_epochs") c.max_epochs = value.get<std::size_t>();
      else if (key == "patience") c.patience = value.get<std::size_t>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else if (key == "kl_warmup_steps") c.kl_warmup_steps = value.get<std::size_t>();
      else if (key == "eval_ks") c.eval_ks = value.get<std::vector<std::size_t>>();
      else if (key == "n_refine") {
        if (value.is_number_integer() && value.get<std::int64_t>() < 0) {
          throw SchemaError("train.n_refine: must be non-negative");
        }
        c.n_refine = value.get<std::size_t>();
      } else if (key == "clip_norm") c.clip_norm = value.get<double>();
      else if (key == "elbo_samples") c.elbo_samples = value.get<std::size_t>();
      else if (key == "workers") c.workers = value.get<std::size_t>();
      else if (key == "early_stopping") c.early_stopping = value.get<bool>();
      else throw SchemaError("train: unknown key '" + key + "'");
    } catch (const nlohmann::json::exception& e) {
      throw SchemaError("train." + key + ": " + e.what());
    }
  }
  return c;
}

// ---------------------------------------------------------------------------
// History

void write_history_csv(const TrainHistory& h, std::ostream& out) {
  out << "epoch,objective,reconstruction,length_ll,kl,beta,val_p1\n";
  out << std::setprecision(17);
  for (const auto& r : h.records) {
    out << r.epoch << ',' << r.objective << ',' << r.reconstruction << ',' << r.length_ll << ',' << r.kl << ','
        << r.beta << ',' << r.val_p1 << '\n';
  }
}

void write_timing_csv(const TrainHistory& h, std::ostream& out) {
  out << "epoch,wall_seconds\n" << std::setprecision(6);
  for (const auto& r : h.records) out << r.epoch << ',' << r.wall_seconds << '\n';
}

// ---------------------------------------------------------------------------
// Training

TrainHistory train(Model& model, const SparseDataset& train_set, const SparseDataset& validation,
                   const TrainConfig& config, TrainState* state, const EpochCallback& on_epoch) {
  config.validate();
  check_spaces(model, train_set, "train");
  check_spaces(model, validation, "validation");
  const SparseDataset data = drop_empty_labels(train_set);
  if (data.empty()) throw ContractError("train: no training examples with labels");
  if (validation.empty()) throw ContractError("train: validation set is empty");

  const std::size_t limit = std::holds_alternative<NarModel>(model)
                                ? std::get<NarModel>(model).config().l_max
                                : std::get<ArModel>(model).config().max_steps - 1;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data.examples[i].labels.size() > limit) {
      throw ContractError("train: example " + std::to_string(i) + " has " +
                          std::to_string(data.examples[i].labels.size()) + " labels, more than the model allows (" +
                          std::to_string(limit) + ")");
    }
  }

  ParameterSet& params = model_params(model);
  Adam adam({config.learning_rate, config.beta1, config.beta2, config.adam_epsilon}, params);
  BatchSampler sampler(data.size(), config.batch_size, config.seed);
  Rng noise(config.seed ^ kNoiseStream);

  ParameterSet best = params;
  double best_p1 = -1.0;
  TrainHistory history;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    EpochRecord rec;
    rec.epoch = epoch;
    for (const auto& batch : sampler.epoch(epoch - 1)) {
      params.zero_grad();
      const double beta = config.beta(adam.steps());
      const double weight = 1.0 / static_cast<double>(batch.size());
      bool finite = true;
      for (std::size_t idx : batch) {
        ExampleObjective o;
        try {
          o = accumulate_example(model, data.examples[idx], beta, config.elbo_samples, noise, weight);
        } catch (const NumericError&) {
          o.loss = std::nan("");
        }
        finite = finite && std::isfinite(o.loss);
        rec.objective += o.objective;
        rec.reconstruction += o.reconstruction;
        rec.length_ll += o.length_ll;
        rec.kl += o.kl;
      }
      const double norm = clip_grad_norm(params, config.clip_norm);
      if (!finite || !std::isfinite(norm)) {
        params.copy_values_from(best);
        throw DivergenceError("training diverged in epoch " + std::to_string(epoch) + " after " +
                              std::to_string(adam.steps()) + " updates (non-finite " +
                              (finite ? "gradient" : "objective") + "); parameters restored to epoch " +
                              std::to_string(history.best_epoch));
      }
      adam.step(params);
      rec.beta = beta;
    }
    const double n = static_cast<double>(data.size());
    rec.objective /= n;
    rec.reconstruction /= n;
    rec.length_ll /= n;
    rec.kl /= n;
    rec.val_p1 = validation_p1(model, validation, config);
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    history.records.push_back(rec);
    if (rec.val_p1 > best_p1) {
      best_p1 = rec.val_p1;
      history.best_epoch = epoch;
      best.copy_values_from(params);
    }
    if (on_epoch) on_epoch(rec);
    if (config.early_stopping && epoch - history.best_epoch >= config.patience) {
      history.stopped_early = epoch < config.max_epochs;
      break;
    }
  }
  if (config.early_stopping) params.copy_values_from(best);
  if (state) {
    state->optimizer = adam.state();
    state->rng_state = noise.state();
  }
  return history;
}

// ---------------------------------------------------------------------------
// Evaluation

std::vector<std::vector<double>> score_dataset(const Model& model, const SparseDataset& ds, std::size_t n_refine,
                                               std::size_t workers) {
  std::vector<std::vector<double>> scores(ds.size());
  workers = std::max<std::size_t>(1, std::min(workers, ds.size()));
  auto run = [&](std::size_t w) {
    for (std::size_t i = w; i < ds.size(); i += workers) scores[i] = model_scores(model, ds.examples[i].features, n_refine);
  };
  if (workers == 1) {
    run(0);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run, w);
    for (auto& t : pool) t.join();
  }
  return scores;
}

MetricTable evaluate_scores(const std::vector<std::vector<double>>& scores, const SparseDataset& ds,
                            const PropensityModel* propensities, const std::vector<std::size_t>& ks) {
  if (scores.size() != ds.size()) throw ContractError("evaluate: one score vector per example required");
  for (std::size_t k : ks) {
    if (k == 0 || k > ds.n_labels) {
      throw ContractError("evaluate: k=" + std::to_string(k) + " outside [1, " + std::to_string(ds.n_labels) + "]");
    }
  }
  if (propensities && propensities->propensities.size() != ds.n_labels) {
    throw ContractError("evaluate: propensity model covers " + std::to_string(propensities->propensities.size()) +
                        " labels, dataset has " + std::to_string(ds.n_labels));
  }
  MetricAccumulator acc(ks, propensities);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (scores[i].size() != ds.n_labels) throw ContractError("evaluate: score vector length differs from L");
    acc.add(scores[i], ds.examples[i].labels);
  }
  return acc.finish();
}

MetricTable evaluate(const Model& model, const SparseDataset& ds, const PropensityModel* propensities,
                     const std::vector<std::size_t>& ks, std::size_t n_refine, std::size_t workers) {
  check_spaces(model, ds, "evaluate");
  for (std::size_t k : ks) {
    if (k == 0 || k > ds.n_labels) {
      throw ContractError("evaluate: k=" + std::to_string(k) + " outside [1, " + std::to_string(ds.n_labels) + "]");
    }
  }
  return evaluate_scores(score_dataset(model, ds, n_refine, workers), ds, propensities, ks);
}

}  // namespace xmlc
