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

// Autoregressive sequence-to-sequence baseline.
//
//   h_0     = W_x x + b_x                       (linear feature encoder)
//   h_t     = GRU(h_{t-1}, E[y_{t-1}])          (y_0 = BOS)
//   p(y_t)  = softmax(W_o h_t + b_o)            over L labels + EOS
//
// Targets are the positive labels in ascending index order followed by EOS.
// Decoding masks labels that were already emitted.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "json.hpp"
#include "xmlc/autodiff.hpp"
#include "xmlc/dataset.hpp"
#include "xmlc/layers.hpp"
#include "xmlc/parameters.hpp"

namespace xmlc {

struct ArConfig {
  std::size_t d_hidden = 256;
  std::size_t d_embed = 128;
  std::size_t max_steps = 0;  // 0: largest training label set + 1
  std::size_t beam_width = 1;

  void resolve(std::size_t max_label_set);
  void validate() const;
};

nlohmann::json to_json(const ArConfig& c);
/// Unknown keys raise SchemaError naming the key.
ArConfig ar_config_from_json(const nlohmann::json& j);

struct ArPrediction {
  std::vector<std::uint32_t> sequence;  // emitted labels in emission order, no EOS
  std::vector<double> scores;           // per label, for ranking
  double log_prob = 0.0;                // total log-probability, EOS included when emitted
  bool terminated = false;              // EOS emitted before the step cap
};

struct GruCell {
  Dense input_update;
  Dense input_reset;
  Dense input_candidate;
  Parameter* hidden_update = nullptr;
  Parameter* hidden_reset = nullptr;
  Parameter* hidden_candidate = nullptr;

  static GruCell create(ParameterSet& params, const std::string& name, std::size_t d_in, std::size_t d_hidden,
                        Rng& rng);
  /// One step for 1 x d_in input and 1 x d_hidden state.
  ad::Var operator()(ad::Graph& g, ad::Var input, ad::Var state) const;
};

class ArModel {
 public:
  ArModel(ArConfig config, std::size_t n_features, std::size_t n_labels, std::uint64_t seed);
  ArModel(const ArModel& other);
  ArModel& operator=(const ArModel&) = delete;

  const ArConfig& config() const { return config_; }
  std::size_t n_features() const { return n_features_; }
  std::size_t n_labels() const { return n_labels_; }
  std::uint32_t eos() const { return static_cast<std::uint32_t>(n_labels_); }
  std::uint32_t bos() const { return static_cast<std::uint32_t>(n_labels_ + 1); }
  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }

  /// Ascending labels followed by EOS.
  std::vector<std::uint32_t> label_order(const LabelSet& y) const;

  /// Teacher-forced negative log-likelihood of label_order(y).
  ad::Var sequence_nll(ad::Graph& g, const SparseRow& x, const LabelSet& y) const;
  /// Teacher-forced per-step distributions, |y|+1 rows over L+1 symbols.
  Tensor teacher_forced_probs(const SparseRow& x, const LabelSet& y) const;

  ArPrediction greedy_decode(const SparseRow& x) const;
  /// Hypotheses sorted by total log-probability, best first.
  std::vector<ArPrediction> beam_decode(const SparseRow& x, std::size_t beam_width) const;
  /// Log-probability of a decode path under emitted-label masking. The path
  /// may end with EOS; without it, it is scored as stopped at the step cap.
  double decode_log_prob(const SparseRow& x, std::span<const std::uint32_t> path) const;
  /// Ranking used for evaluation: greedy when beam_width is 1, else the top beam.
  ArPrediction predict(const SparseRow& x) const;

 private:
  void build(std::uint64_t seed);
  ad::Var initial_state(ad::Graph& g, const SparseRow& x) const;
  ad::Var step(ad::Graph& g, ad::Var state, std::uint32_t token) const;
  ad::Var output_logits(ad::Graph& g, ad::Var state) const;
  /// Masked log-softmax over L+1 symbols; masked entries are -inf.
  std::vector<double> masked_log_probs(const Tensor& logits, const std::vector<bool>& emitted) const;

  ArConfig config_;
  std::size_t n_features_;
  std::size_t n_labels_;
  ParameterSet params_;

  Parameter* encoder_weight_ = nullptr;
  Parameter* encoder_bias_ = nullptr;
  Parameter* embeddings_ = nullptr;
  GruCell cell_;
  Dense output_;
};

}  // namespace xmlc
