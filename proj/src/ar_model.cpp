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

#include "xmlc/ar_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "xmlc/errors.hpp"

namespace xmlc {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct Hypothesis {
  std::vector<std::uint32_t> sequence;
  std::vector<double> emit_probs;
  std::vector<bool> emitted;
  std::vector<double> last_probs;  // final distribution seen by this hypothesis
  Tensor state;
  double log_prob = 0.0;
  bool finished = false;
};

ArPrediction to_prediction(const Hypothesis& h, std::size_t n_labels) {
  ArPrediction p;
  p.sequence = h.sequence;
  p.log_prob = h.log_prob;
  p.terminated = h.finished;
  p.scores.assign(n_labels, 0.0);
  if (!h.last_probs.empty()) std::copy_n(h.last_probs.begin(), n_labels, p.scores.begin());
  // Emitted labels rank ahead of the tail by their emission probability.
  for (std::size_t i = 0; i < h.sequence.size(); ++i) p.scores[h.sequence[i]] = 1.0 + h.emit_probs[i];
  return p;
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

void ArConfig::resolve(std::size_t max_label_set) {
  if (max_steps == 0) max_steps = std::max<std::size_t>(1, max_label_set) + 1;
}

void ArConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw ContractError(std::string("ar config: ") + name + " must be at least 1");
  };
  positive(d_hidden, "d_hidden");
  positive(d_embed, "d_embed");
  positive(max_steps, "max_steps");
  positive(beam_width, "beam_width");
}

nlohmann::json to_json(const ArConfig& c) {
  return {{"d_hidden", c.d_hidden}, {"d_embed", c.d_embed}, {"max_steps", c.max_steps}, {"beam_width", c.beam_width}};
}

ArConfig ar_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw SchemaError("ar: expected an object");
  ArConfig c;
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "d_hidden") c.d_hidden = value.get<std::size_t>();
      else if (key == "d_embed") c.d_embed = value.get<std::size_t>();
      else if (key == "max_steps") c.max_steps = value.get<std::size_t>();
      else if (key == "beam_width") c.beam_width = value.get<std::size_t>();
      else throw SchemaError("ar: unknown key '" + key + "'");
    } catch (const nlohmann::json::exception& e) {
      throw SchemaError("ar." + key + ": " + e.what());
    }
  }
  return c;
}

// ---------------------------------------------------------------------------
// GRU

GruCell GruCell::create(ParameterSet& params, const std::string& name, std::size_t d_in, std::size_t d_hidden,
                        Rng& rng) {
  GruCell c;
  c.input_update = Dense::create(params, name + ".input_update", d_in, d_hidden, rng);
  c.input_reset = Dense::create(params, name + ".input_reset", d_in, d_hidden, rng);
  c.input_candidate = Dense::create(params, name + ".input_candidate", d_in, d_hidden, rng);
  c.hidden_update = &params.add(name + ".hidden_update", glorot_uniform(d_hidden, d_hidden, rng));
  c.hidden_reset = &params.add(name + ".hidden_reset", glorot_uniform(d_hidden, d_hidden, rng));
  c.hidden_candidate = &params.add(name + ".hidden_candidate", glorot_uniform(d_hidden, d_hidden, rng));
  return c;
}

ad::Var GruCell::operator()(ad::Graph& g, ad::Var input, ad::Var state) const {
  ad::Var update = ad::sigmoid(ad::add(input_update(g, input), ad::matmul(state, bind(g, *hidden_update))));
  ad::Var reset = ad::sigmoid(ad::add(input_reset(g, input), ad::matmul(state, bind(g, *hidden_reset))));
  ad::Var candidate = ad::tanh(
      ad::add(input_candidate(g, input), ad::mul(reset, ad::matmul(state, bind(g, *hidden_candidate)))));
  // h' = (1 - u) * n + u * h = n + u * (h - n)
  return ad::add(candidate, ad::mul(update, ad::sub(state, candidate)));
}

// ---------------------------------------------------------------------------
// Model

ArModel::ArModel(ArConfig config, std::size_t n_features, std::size_t n_labels, std::uint64_t seed)
    : config_(config), n_features_(n_features), n_labels_(n_labels) {
  config_.validate();
  if (n_features == 0 || n_labels == 0) throw ContractError("model needs at least one feature and label");
  build(seed);
}

ArModel::ArModel(const ArModel& other)
    : config_(other.config_), n_features_(other.n_features_), n_labels_(other.n_labels_) {
  build(0);
  params_.copy_values_from(other.params_);
}

void ArModel::build(std::uint64_t seed) {
  Rng rng(seed);
  encoder_weight_ = &params_.add("ar.encoder.weight", glorot_uniform(n_features_, config_.d_hidden, rng));
  encoder_bias_ = &params_.add("ar.encoder.bias", Tensor::matrix(1, config_.d_hidden));
  embeddings_ = &params_.add("ar.label_embeddings", glorot_uniform(n_labels_ + 2, config_.d_embed, rng));
  cell_ = GruCell::create(params_, "ar.gru", config_.d_embed, config_.d_hidden, rng);
  output_ = Dense::create(params_, "ar.output", config_.d_hidden, n_labels_ + 1, rng);
}

std::vector<std::uint32_t> ArModel::label_order(const LabelSet& y) const {
  if (y.empty()) throw ContractError("label_order: label set must not be empty");
  std::vector<std::uint32_t> seq(y.begin(), y.end());
  std::sort(seq.begin(), seq.end());
  seq.erase(std::unique(seq.begin(), seq.end()), seq.end());
  for (auto l : seq) {
    if (l >= n_labels_) {
      throw ContractError("label " + std::to_string(l) + " outside model label space of " +
                          std::to_string(n_labels_));
    }
  }
  seq.push_back(eos());
  return seq;
}

ad::Var ArModel::initial_state(ad::Graph& g, const SparseRow& x) const {
  return ad::sparse_affine(x, bind(g, *encoder_weight_), bind(g, *encoder_bias_));
}

ad::Var ArModel::step(ad::Graph& g, ad::Var state, std::uint32_t token) const {
  ad::Var input = ad::gather_rows(bind(g, *embeddings_), std::span(&token, 1));
  return cell_(g, input, state);
}

ad::Var ArModel::output_logits(ad::Graph& g, ad::Var state) const { return output_(g, state); }

ad::Var ArModel::sequence_nll(ad::Graph& g, const SparseRow& x, const LabelSet& y) const {
  const std::vector<std::uint32_t> targets = label_order(y);
  if (targets.size() > config_.max_steps) {
    throw ContractError("sequence of " + std::to_string(targets.size()) + " steps exceeds max_steps " +
                        std::to_string(config_.max_steps));
  }
  ad::Var state = initial_state(g, x);
  std::vector<ad::Var> logits;
  logits.reserve(targets.size());
  std::uint32_t previous = bos();
  for (auto target : targets) {
    state = step(g, state, previous);
    logits.push_back(output_logits(g, state));
    previous = target;
  }
  return ad::cross_entropy(ad::concat(logits, 0), targets);
}

Tensor ArModel::teacher_forced_probs(const SparseRow& x, const LabelSet& y) const {
  const std::vector<std::uint32_t> targets = label_order(y);
  ad::Graph g(false);
  ad::Var state = initial_state(g, x);
  std::vector<ad::Var> rows;
  std::uint32_t previous = bos();
  for (auto target : targets) {
    state = step(g, state, previous);
    rows.push_back(ad::softmax_rows(output_logits(g, state)));
    previous = target;
  }
  return ad::concat(rows, 0).value();
}

std::vector<double> ArModel::masked_log_probs(const Tensor& logits, const std::vector<bool>& emitted) const {
  const auto row = logits.data();
  double top = kNegInf;
  for (std::size_t i = 0; i <= n_labels_; ++i)
    if (i == n_labels_ || !emitted[i]) top = std::max(top, row[i]);
  double total = 0.0;
  for (std::size_t i = 0; i <= n_labels_; ++i)
    if (i == n_labels_ || !emitted[i]) total += std::exp(row[i] - top);
  const double log_norm = top + std::log(total);
  std::vector<double> out(n_labels_ + 1, kNegInf);
  for (std::size_t i = 0; i <= n_labels_; ++i)
    if (i == n_labels_ || !emitted[i]) out[i] = row[i] - log_norm;
  return out;
}

ArPrediction ArModel::greedy_decode(const SparseRow& x) const {
  ad::Graph g(false);
  Hypothesis h;
  h.emitted.assign(n_labels_, false);
  ad::Var state = initial_state(g, x);
  std::uint32_t previous = bos();
  for (std::size_t t = 0; t < config_.max_steps; ++t) {
    state = step(g, state, previous);
    const std::vector<double> lp = masked_log_probs(output_logits(g, state).value(), h.emitted);
    const auto best = static_cast<std::uint32_t>(std::max_element(lp.begin(), lp.end()) - lp.begin());
    h.last_probs.resize(lp.size());
    std::transform(lp.begin(), lp.end(), h.last_probs.begin(), [](double v) { return std::exp(v); });
    h.log_prob += lp[best];
    if (best == eos()) {
      h.finished = true;
      break;
    }
    h.sequence.push_back(best);
    h.emit_probs.push_back(h.last_probs[best]);
    h.emitted[best] = true;
    previous = best;
  }
  return to_prediction(h, n_labels_);
}

std::vector<ArPrediction> ArModel::beam_decode(const SparseRow& x, std::size_t beam_width) const {
  if (beam_width == 0) throw ContractError("beam_width must be at least 1");
  std::vector<Hypothesis> beam(1);
  {
    ad::Graph g(false);
    beam[0].state = initial_state(g, x).value();
    beam[0].emitted.assign(n_labels_, false);
  }

  struct Candidate {
    double score;
    std::size_t parent;
    std::uint32_t token;  // EOS or a label; ignored for finished parents
  };

  for (std::size_t t = 0; t < config_.max_steps; ++t) {
    if (std::all_of(beam.begin(), beam.end(), [](const Hypothesis& h) { return h.finished; })) break;
    std::vector<Candidate> candidates;
    std::vector<std::vector<double>> step_log_probs(beam.size());
    std::vector<Tensor> next_states(beam.size());
    for (std::size_t b = 0; b < beam.size(); ++b) {
      const Hypothesis& h = beam[b];
      if (h.finished) {
        candidates.push_back({h.log_prob, b, eos()});
        continue;
      }
      ad::Graph g(false);
      const std::uint32_t previous = h.sequence.empty() ? bos() : h.sequence.back();
      ad::Var state = step(g, g.constant(h.state), previous);
      next_states[b] = state.value();
      step_log_probs[b] = masked_log_probs(output_logits(g, state).value(), h.emitted);
      for (std::uint32_t token = 0; token <= n_labels_; ++token) {
        const double lp = step_log_probs[b][token];
        if (lp != kNegInf) candidates.push_back({h.log_prob + lp, b, token});
      }
    }
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Candidate& a, const Candidate& b) { return a.score > b.score; });
    candidates.resize(std::min(candidates.size(), beam_width));

    std::vector<Hypothesis> next;
    next.reserve(candidates.size());
    for (const Candidate& c : candidates) {
      const Hypothesis& parent = beam[c.parent];
      Hypothesis h = parent;
      if (!parent.finished) {
        const auto& lp = step_log_probs[c.parent];
        h.last_probs.resize(lp.size());
        std::transform(lp.begin(), lp.end(), h.last_probs.begin(), [](double v) { return std::exp(v); });
        h.log_prob = c.score;
        h.state = next_states[c.parent];
        if (c.token == eos()) {
          h.finished = true;
        } else {
          h.sequence.push_back(c.token);
          h.emit_probs.push_back(h.last_probs[c.token]);
          h.emitted[c.token] = true;
        }
      }
      next.push_back(std::move(h));
    }
    beam = std::move(next);
  }

  std::stable_sort(beam.begin(), beam.end(),
                   [](const Hypothesis& a, const Hypothesis& b) { return a.log_prob > b.log_prob; });
  std::vector<ArPrediction> out;
  out.reserve(beam.size());
  for (const auto& h : beam) out.push_back(to_prediction(h, n_labels_));
  return out;
}

double ArModel::decode_log_prob(const SparseRow& x, std::span<const std::uint32_t> path) const {
  if (path.size() > config_.max_steps) throw ContractError("decode path longer than max_steps");
  ad::Graph g(false);
  std::vector<bool> emitted(n_labels_, false);
  ad::Var state = initial_state(g, x);
  std::uint32_t previous = bos();
  double total = 0.0;
  for (std::size_t t = 0; t < path.size(); ++t) {
    const std::uint32_t token = path[t];
    if (token > eos() || (token == eos() && t + 1 != path.size())) {
      throw ContractError("decode path tokens must be labels optionally followed by one EOS");
    }
    state = step(g, state, previous);
    total += masked_log_probs(output_logits(g, state).value(), emitted)[token];
    if (token != eos()) emitted[token] = true;
    previous = token;
  }
  return total;
}

ArPrediction ArModel::predict(const SparseRow& x) const {
  if (config_.beam_width == 1) return greedy_decode(x);
  return beam_decode(x, config_.beam_width).front();
}

}  // namespace xmlc
