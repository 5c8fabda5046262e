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

// Non-autoregressive latent-variable label-set model.
//
//   prior      p(z|x)   = N(mu_x, diag(sigma_x^2)), shared by every latent position
//   posterior  q(z|x,y) = N(mu_xy, diag(sigma_xy^2)), one row per position, |y|+1 rows
//   decoder    p(y_i|x,z_i,l) = softmax(f_pi([z_i, h_x]))  for positions i < l
//   length     p(l|z)   = softmax(W mean(z) + b) over 1..l_max
//
// Position i < |y| reconstructs the i-th label of y in ascending index order;
// the extra position carries the feature row of the posterior encoder.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "json.hpp"
#include "xmlc/attention.hpp"
#include "xmlc/autodiff.hpp"
#include "xmlc/dataset.hpp"
#include "xmlc/layers.hpp"
#include "xmlc/parameters.hpp"
#include "xmlc/rng.hpp"

namespace xmlc {

enum class Reparameterization {
  kVariance,  // z = mu + eps * sigma^2
  kStdDev,    // z = mu + eps * sigma
};

struct NarConfig {
  std::size_t d_model = 256;
  std::size_t n_layers = 2;
  std::size_t n_heads = 4;
  std::size_t d_latent = 64;
  std::size_t d_ff = 512;
  std::size_t d_head_hidden = 256;     // hidden width of the Gaussian heads
  std::size_t d_decoder_hidden = 256;  // hidden width of the label decoder
  std::size_t l_max = 0;               // 0: largest training label set
  std::size_t t_budget = 0;            // 0: l_max + 1
  AttentionScale attention_scale = AttentionScale::kSequenceLength;
  Reparameterization reparameterization = Reparameterization::kVariance;
  double sigma_min = 1e-6;

  /// Fills l_max / t_budget from the largest label set when they are 0.
  void resolve(std::size_t max_label_set);
  void validate() const;
};

nlohmann::json to_json(const NarConfig& c);
/// Unknown keys raise SchemaError naming the key.
NarConfig nar_config_from_json(const nlohmann::json& j);

struct LatentState {
  Tensor mu;
  Tensor sigma;
  Tensor z;

  std::size_t positions() const { return mu.rows(); }
};

struct ElboBreakdown {
  double reconstruction = 0.0;
  double length_ll = 0.0;
  double kl = 0.0;
  double beta = 1.0;
  double total = 0.0;
};

struct GaussianVars {
  ad::Var mu;
  ad::Var sigma;
};

struct PriorVars {
  GaussianVars gaussian;  // 1 x d_latent, broadcast by callers
  ad::Var feature_state;  // 1 x d_model, pooled prior-encoder state
};

struct PosteriorVars {
  GaussianVars gaussian;  // (|y|+1) x d_latent
  ad::Var feature_state;  // 1 x d_model
  ad::Var label_state;    // 1 x d_model, mean of label rows
};

struct ElboVars {
  ad::Var total;
  ad::Var reconstruction;
  ad::Var length_ll;
  ad::Var kl;
  ad::Var z;

  ElboBreakdown values(double beta) const;
};

struct RefinementStep {
  std::size_t length = 0;
  LabelSet labels;
  std::vector<double> scores;
};

struct NarPrediction {
  std::vector<double> scores;  // per label, max probability over positions
  std::size_t length = 0;
  LabelSet labels;
  std::vector<RefinementStep> trace;  // step 0 is the prior pass
  std::size_t posterior_passes = 0;
};

/// z = mu + eps * sigma^2 (or sigma, per mode). Throws ContractError unless
/// every sigma > 0.
ad::Var reparameterize(ad::Var mu, ad::Var sigma, ad::Var eps, Reparameterization mode);

/// KL(N(mu_q, sigma_q^2) || N(mu_p, sigma_p^2)) summed over all elements.
ad::Var kl_diag_gaussians(ad::Var mu_q, ad::Var sigma_q, ad::Var mu_p, ad::Var sigma_p);
double kl_diag_gaussians(const Tensor& mu_q, const Tensor& sigma_q, const Tensor& mu_p, const Tensor& sigma_p);

class NarModel {
 public:
  NarModel(NarConfig config, std::size_t n_features, std::size_t n_labels, std::uint64_t seed);

  NarModel(const NarModel& other);
  NarModel& operator=(const NarModel&) = delete;

  const NarConfig& config() const { return config_; }
  std::size_t n_features() const { return n_features_; }
  std::size_t n_labels() const { return n_labels_; }
  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }

  ad::Var project_features(ad::Graph& g, const SparseRow& x) const;
  ad::Var encode_prior_sequence(ad::Graph& g, ad::Var seq) const;
  ad::Var encode_posterior_sequence(ad::Graph& g, ad::Var seq) const;

  PriorVars encode_prior(ad::Graph& g, const SparseRow& x) const;
  /// Labels are used in the given order (the public path sorts first).
  PosteriorVars encode_posterior_ordered(ad::Graph& g, const SparseRow& x, std::span<const std::uint32_t> labels) const;
  PosteriorVars encode_posterior(ad::Graph& g, const SparseRow& x, const LabelSet& y) const;

  /// l_y x n_labels logits from the first l_y latent rows.
  ad::Var decode_logits(ad::Graph& g, ad::Var z, ad::Var feature_state, std::size_t l_y) const;
  /// 1 x l_max logits; class j means length j+1.
  ad::Var length_logits(ad::Graph& g, ad::Var z) const;

  /// Reconstruction and length log-likelihood of y for a given latent
  /// sequence z with |y|+1 rows.
  std::pair<ad::Var, ad::Var> log_likelihood(ad::Graph& g, ad::Var z, ad::Var feature_state,
                                             const LabelSet& y) const;

  /// Single-sample ELBO with injected standard-normal noise of shape
  /// (|y|+1) x d_latent.
  ElboVars elbo(ad::Graph& g, const SparseRow& x, const LabelSet& y, const Tensor& noise, double beta) const;
  Tensor sample_noise(const LabelSet& y, Rng& rng) const;

  // Tensor-level helpers built on the graph versions.
  LatentState prior_state(const SparseRow& x) const;  // t_budget positions, z = mu
  LatentState posterior_state(const SparseRow& x, const LabelSet& y, const Tensor& noise) const;
  Tensor decode(const SparseRow& x, const Tensor& z, std::size_t l_y) const;  // probabilities
  Tensor predict_length(const Tensor& z) const;                               // probabilities

  /// Deterministic inference with z = mu and n_refine posterior refinements.
  NarPrediction infer(const SparseRow& x, std::size_t n_refine) const;

 private:
  void build(std::uint64_t seed);
  void check_labels(const LabelSet& y) const;

  NarConfig config_;
  std::size_t n_features_;
  std::size_t n_labels_;
  ParameterSet params_;

  Parameter* feature_weight_ = nullptr;
  Parameter* feature_bias_ = nullptr;
  Parameter* label_embeddings_ = nullptr;
  EncoderStack prior_encoder_;
  EncoderStack posterior_encoder_;
  TwoLayerNet prior_mu_;
  TwoLayerNet prior_sigma_;
  TwoLayerNet posterior_mu_;
  TwoLayerNet posterior_sigma_;
  TwoLayerNet decoder_;
  Dense length_head_;
};

}  // namespace xmlc
