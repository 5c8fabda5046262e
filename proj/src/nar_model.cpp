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

#include "xmlc/nar_model.hpp"

#include <algorithm>
#include <cmath>

#include "xmlc/errors.hpp"
#include "xmlc/metrics.hpp"

namespace xmlc {
namespace {

void require_positive(const Tensor& sigma, const char* what) {
  for (double s : sigma.data()) {
    if (!(s > 0.0)) throw ContractError(std::string(what) + ": standard deviations must be positive");
  }
}

std::size_t argmax(std::span<const double> v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

const char* scale_name(AttentionScale s) {
  return s == AttentionScale::kSequenceLength ? "sequence_length" : "key_dim";
}

const char* reparam_name(Reparameterization r) {
  return r == Reparameterization::kVariance ? "variance" : "std_dev";
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

void NarConfig::resolve(std::size_t max_label_set) {
  if (l_max == 0) l_max = std::max<std::size_t>(1, max_label_set);
  if (t_budget == 0) t_budget = l_max + 1;
}

void NarConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw ContractError(std::string("nar config: ") + name + " must be at least 1");
  };
  positive(d_model, "d_model");
  positive(n_layers, "n_layers");
  positive(n_heads, "n_heads");
  positive(d_latent, "d_latent");
  positive(d_ff, "d_ff");
  positive(d_head_hidden, "d_head_hidden");
  positive(d_decoder_hidden, "d_decoder_hidden");
  positive(l_max, "l_max");
  positive(t_budget, "t_budget");
  if (d_model % n_heads != 0) throw ContractError("nar config: d_model must be divisible by n_heads");
  if (t_budget < l_max + 1) throw ContractError("nar config: t_budget must be at least l_max + 1");
  if (!(sigma_min > 0.0)) throw ContractError("nar config: sigma_min must be positive");
}

nlohmann::json to_json(const NarConfig& c) {
  return {{"d_model", c.d_model},
          {"n_layers", c.n_layers},
          {"n_heads", c.n_heads},
          {"d_latent", c.d_latent},
          {"d_ff", c.d_ff},
          {"d_head_hidden", c.d_head_hidden},
          {"d_decoder_hidden", c.d_decoder_hidden},
          {"l_max", c.l_max},
          {"t_budget", c.t_budget},
          {"attention_scale", scale_name(c.attention_scale)},
          {"reparameterization", reparam_name(c.reparameterization)},
          {"sigma_min", c.sigma_min}};
}

NarConfig nar_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw SchemaError("nar: expected an object");
  NarConfig c;
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "d_model") c.d_model = value.get<std::size_t>();
      else if (key == "n_layers") c.n_layers = value.get<std::size_t>();
      else if (key == "n_heads") c.n_heads = value.get<std::size_t>();
      else if (key == "d_latent") c.d_latent = value.get<std::size_t>();
      else if (key == "d_ff") c.d_ff = value.get<std::size_t>();
      else if (key == "d_head_hidden") c.d_head_hidden = value.get<std::size_t>();
      else if (key == "d_decoder_hidden") c.d_decoder_hidden = value.get<std::size_t>();
      else if (key == "l_max") c.l_max = value.get<std::size_t>();
      else if (key == "t_budget") c.t_budget = value.get<std::size_t>();
      else if (key == "sigma_min") c.sigma_min = value.get<double>();
      else if (key == "attention_scale") {
        const auto s = value.get<std::string>();
        if (s == "sequence_length") c.attention_scale = AttentionScale::kSequenceLength;
        else if (s == "key_dim") c.attention_scale = AttentionScale::kKeyDim;
        else throw SchemaError("nar.attention_scale: expected 'sequence_length' or 'key_dim'");
      } else if (key == "reparameterization") {
        const auto s = value.get<std::string>();
        if (s == "variance") c.reparameterization = Reparameterization::kVariance;
        else if (s == "std_dev") c.reparameterization = Reparameterization::kStdDev;
        else throw SchemaError("nar.reparameterization: expected 'variance' or 'std_dev'");
      } else {
        throw SchemaError("nar: unknown key '" + key + "'");
      }
    } catch (const nlohmann::json::exception& e) {
      throw SchemaError("nar." + key + ": " + e.what());
    }
  }
  return c;
}

// ---------------------------------------------------------------------------
// Gaussian utilities

ad::Var reparameterize(ad::Var mu, ad::Var sigma, ad::Var eps, Reparameterization mode) {
  require_positive(sigma.value(), "reparameterize");
  if (!mu.value().same_shape(sigma.value()) || !mu.value().same_shape(eps.value())) {
    throw ShapeError("reparameterize: mu, sigma and noise shapes differ");
  }
  ad::Var spread = mode == Reparameterization::kVariance ? ad::square(sigma) : sigma;
  return ad::add(mu, ad::mul(eps, spread));
}

ad::Var kl_diag_gaussians(ad::Var mu_q, ad::Var sigma_q, ad::Var mu_p, ad::Var sigma_p) {
  require_positive(sigma_q.value(), "kl_diag_gaussians");
  require_positive(sigma_p.value(), "kl_diag_gaussians");
  ad::Var log_ratio = ad::sub(ad::log(sigma_p), ad::log(sigma_q));
  ad::Var spread = ad::add(ad::square(sigma_q), ad::square(ad::sub(mu_q, mu_p)));
  ad::Var quad = ad::div(spread, ad::scale(ad::square(sigma_p), 2.0));
  return ad::sum(ad::add_scalar(ad::add(log_ratio, quad), -0.5));
}

double kl_diag_gaussians(const Tensor& mu_q, const Tensor& sigma_q, const Tensor& mu_p, const Tensor& sigma_p) {
  ad::Graph g(false);
  return kl_diag_gaussians(g.constant(mu_q), g.constant(sigma_q), g.constant(mu_p), g.constant(sigma_p))
      .value()
      .item();
}

ElboBreakdown ElboVars::values(double beta) const {
  ElboBreakdown b;
  b.reconstruction = reconstruction.value().item();
  b.length_ll = length_ll.value().item();
  b.kl = kl.value().item();
  b.beta = beta;
  b.total = total.value().item();
  return b;
}

// ---------------------------------------------------------------------------
// Model

NarModel::NarModel(NarConfig config, std::size_t n_features, std::size_t n_labels, std::uint64_t seed)
    : config_(config), n_features_(n_features), n_labels_(n_labels) {
  config_.validate();
  if (n_features == 0 || n_labels == 0) throw ContractError("model needs at least one feature and label");
  build(seed);
}

NarModel::NarModel(const NarModel& other)
    : config_(other.config_), n_features_(other.n_features_), n_labels_(other.n_labels_) {
  build(0);
  params_.copy_values_from(other.params_);
}

void NarModel::build(std::uint64_t seed) {
  Rng rng(seed);
  const auto& c = config_;
  feature_weight_ = &params_.add("nar.features.weight", glorot_uniform(n_features_, c.d_model, rng));
  feature_bias_ = &params_.add("nar.features.bias", Tensor::matrix(1, c.d_model));
  label_embeddings_ = &params_.add("nar.label_embeddings", glorot_uniform(n_labels_, c.d_model, rng));
  prior_encoder_ = EncoderStack::create(params_, "nar.prior_encoder", c.n_layers, c.d_model, c.d_ff, c.n_heads,
                                        c.attention_scale, rng);
  posterior_encoder_ = EncoderStack::create(params_, "nar.posterior_encoder", c.n_layers, c.d_model, c.d_ff,
                                            c.n_heads, c.attention_scale, rng);
  prior_mu_ = TwoLayerNet::create(params_, "nar.prior_mu", c.d_model, c.d_head_hidden, c.d_latent, rng);
  prior_sigma_ = TwoLayerNet::create(params_, "nar.prior_sigma", c.d_model, c.d_head_hidden, c.d_latent, rng);
  posterior_mu_ =
      TwoLayerNet::create(params_, "nar.posterior_mu", 3 * c.d_model, c.d_head_hidden, c.d_latent, rng);
  posterior_sigma_ =
      TwoLayerNet::create(params_, "nar.posterior_sigma", 3 * c.d_model, c.d_head_hidden, c.d_latent, rng);
  decoder_ = TwoLayerNet::create(params_, "nar.decoder", c.d_latent + c.d_model, c.d_decoder_hidden, n_labels_,
                                 rng);
  length_head_ = Dense::create(params_, "nar.length", c.d_latent, c.l_max, rng);
}

void NarModel::check_labels(const LabelSet& y) const {
  if (y.empty()) throw ContractError("label set must not be empty");
  for (auto l : y) {
    if (l >= n_labels_) {
      throw ContractError("label " + std::to_string(l) + " outside model label space of " +
                          std::to_string(n_labels_));
    }
  }
}

ad::Var NarModel::project_features(ad::Graph& g, const SparseRow& x) const {
  return ad::sparse_affine(x, bind(g, *feature_weight_), bind(g, *feature_bias_));
}

ad::Var NarModel::encode_prior_sequence(ad::Graph& g, ad::Var seq) const { return prior_encoder_(g, seq); }

ad::Var NarModel::encode_posterior_sequence(ad::Graph& g, ad::Var seq) const {
  return posterior_encoder_(g, seq);
}

PriorVars NarModel::encode_prior(ad::Graph& g, const SparseRow& x) const {
  ad::Var hidden = prior_encoder_(g, project_features(g, x));
  ad::Var pooled = ad::mean_axis(hidden, 0);
  ad::Var mu = prior_mu_(g, pooled);
  ad::Var sigma = ad::add_scalar(ad::softplus(prior_sigma_(g, pooled)), config_.sigma_min);
  return {{mu, sigma}, pooled};
}

PosteriorVars NarModel::encode_posterior_ordered(ad::Graph& g, const SparseRow& x,
                                                 std::span<const std::uint32_t> labels) const {
  if (labels.empty()) throw ContractError("encode_posterior: label set must not be empty");
  const std::size_t k = labels.size();
  ad::Var features = project_features(g, x);
  ad::Var embedded = ad::gather_rows(bind(g, *label_embeddings_), labels);
  ad::Var hidden = posterior_encoder_(g, ad::concat({features, embedded}, 0));
  ad::Var feature_state = ad::slice_rows(hidden, 0, 1);
  ad::Var label_rows = ad::slice_rows(hidden, 1, k + 1);
  ad::Var label_state = ad::mean_axis(label_rows, 0);
  ad::Var pooled = ad::concat({feature_state, label_state}, 1);
  ad::Var per_position = ad::concat({label_rows, feature_state}, 0);
  ad::Var head_in = ad::concat({ad::broadcast_rows(pooled, k + 1), per_position}, 1);
  ad::Var mu = posterior_mu_(g, head_in);
  ad::Var sigma = ad::add_scalar(ad::softplus(posterior_sigma_(g, head_in)), config_.sigma_min);
  return {{mu, sigma}, feature_state, label_state};
}

PosteriorVars NarModel::encode_posterior(ad::Graph& g, const SparseRow& x, const LabelSet& y) const {
  check_labels(y);
  LabelSet sorted = y;
  std::sort(sorted.begin(), sorted.end());
  return encode_posterior_ordered(g, x, sorted);
}

ad::Var NarModel::decode_logits(ad::Graph& g, ad::Var z, ad::Var feature_state, std::size_t l_y) const {
  if (l_y < 1 || l_y > std::min(config_.l_max, z.rows())) {
    throw ContractError("decode: length " + std::to_string(l_y) + " outside [1, " +
                        std::to_string(std::min(config_.l_max, z.rows())) + "]");
  }
  ad::Var rows = ad::slice_rows(z, 0, l_y);
  ad::Var in = ad::concat({rows, ad::broadcast_rows(feature_state, l_y)}, 1);
  return decoder_(g, in);
}

ad::Var NarModel::length_logits(ad::Graph& g, ad::Var z) const {
  return length_head_(g, ad::mean_axis(z, 0));
}

std::pair<ad::Var, ad::Var> NarModel::log_likelihood(ad::Graph& g, ad::Var z, ad::Var feature_state,
                                                     const LabelSet& y) const {
  check_labels(y);
  const std::size_t k = y.size();
  if (k > config_.l_max) {
    throw ContractError("label set of size " + std::to_string(k) + " exceeds l_max " +
                        std::to_string(config_.l_max));
  }
  LabelSet targets = y;
  std::sort(targets.begin(), targets.end());
  ad::Var recon = ad::neg(ad::cross_entropy(decode_logits(g, z, feature_state, k), targets));
  const std::uint32_t length_class = static_cast<std::uint32_t>(k - 1);
  ad::Var length = ad::neg(ad::cross_entropy(length_logits(g, z), std::span(&length_class, 1)));
  return {recon, length};
}

Tensor NarModel::sample_noise(const LabelSet& y, Rng& rng) const {
  Tensor eps = Tensor::matrix(y.size() + 1, config_.d_latent);
  for (double& v : eps.data()) v = rng.normal();
  return eps;
}

ElboVars NarModel::elbo(ad::Graph& g, const SparseRow& x, const LabelSet& y, const Tensor& noise,
                        double beta) const {
  check_labels(y);
  if (y.size() > config_.l_max) {
    throw ContractError("label set of size " + std::to_string(y.size()) + " exceeds l_max " +
                        std::to_string(config_.l_max));
  }
  const std::size_t positions = y.size() + 1;
  if (noise.rank() != 2 || noise.rows() != positions || noise.cols() != config_.d_latent) {
    throw ShapeError("elbo: noise must be " + std::to_string(positions) + "x" + std::to_string(config_.d_latent) +
                     ", got " + shape_string(noise.shape()));
  }
  PriorVars prior = encode_prior(g, x);
  PosteriorVars post = encode_posterior(g, x, y);
  ad::Var z = reparameterize(post.gaussian.mu, post.gaussian.sigma, g.constant(noise),
                             config_.reparameterization);
  auto [recon, length] = log_likelihood(g, z, prior.feature_state, y);
  ad::Var kl = kl_diag_gaussians(post.gaussian.mu, post.gaussian.sigma,
                                 ad::broadcast_rows(prior.gaussian.mu, positions),
                                 ad::broadcast_rows(prior.gaussian.sigma, positions));
  ad::Var total = ad::sub(ad::add(recon, length), ad::scale(kl, beta));
  return {total, recon, length, kl, z};
}

LatentState NarModel::prior_state(const SparseRow& x) const {
  ad::Graph g(false);
  PriorVars prior = encode_prior(g, x);
  const std::size_t t = config_.t_budget;
  LatentState s;
  s.mu = ad::broadcast_rows(prior.gaussian.mu, t).value();
  s.sigma = ad::broadcast_rows(prior.gaussian.sigma, t).value();
  s.z = s.mu;
  return s;
}

LatentState NarModel::posterior_state(const SparseRow& x, const LabelSet& y, const Tensor& noise) const {
  ad::Graph g(false);
  PosteriorVars post = encode_posterior(g, x, y);
  LatentState s;
  s.mu = post.gaussian.mu.value();
  s.sigma = post.gaussian.sigma.value();
  s.z = reparameterize(post.gaussian.mu, post.gaussian.sigma, g.constant(noise), config_.reparameterization)
            .value();
  return s;
}

Tensor NarModel::decode(const SparseRow& x, const Tensor& z, std::size_t l_y) const {
  ad::Graph g(false);
  PriorVars prior = encode_prior(g, x);
  return ad::softmax_rows(decode_logits(g, g.constant(z), prior.feature_state, l_y)).value();
}

Tensor NarModel::predict_length(const Tensor& z) const {
  if (z.empty() || z.rank() != 2) throw ContractError("predict_length: empty latent state");
  ad::Graph g(false);
  return ad::softmax_rows(length_logits(g, g.constant(z))).value();
}

NarPrediction NarModel::infer(const SparseRow& x, std::size_t n_refine) const {
  ad::Graph g(false);
  PriorVars prior = encode_prior(g, x);
  NarPrediction out;

  auto predict_from = [&](ad::Var z) {
    const Tensor length_probs = ad::softmax_rows(length_logits(g, z)).value();
    RefinementStep step;
    step.length = argmax(length_probs.data()) + 1;
    const std::size_t rows = std::min(step.length, z.rows());
    const Tensor probs = ad::softmax_rows(decode_logits(g, z, prior.feature_state, rows)).value();
    step.scores.assign(n_labels_, 0.0);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t l = 0; l < n_labels_; ++l) step.scores[l] = std::max(step.scores[l], probs.at(i, l));
    const auto top = rank_k(step.scores, std::min(step.length, n_labels_));
    step.labels.assign(top.begin(), top.end());
    std::sort(step.labels.begin(), step.labels.end());
    out.trace.push_back(step);
  };

  predict_from(ad::broadcast_rows(prior.gaussian.mu, config_.t_budget));
  for (std::size_t r = 0; r < n_refine; ++r) {
    PosteriorVars post = encode_posterior_ordered(g, x, out.trace.back().labels);
    ++out.posterior_passes;
    predict_from(post.gaussian.mu);
  }
  const RefinementStep& last = out.trace.back();
  out.scores = last.scores;
  out.length = last.length;
  out.labels = last.labels;
  return out;
}

}  // namespace xmlc
