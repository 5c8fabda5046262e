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

#include "xmlc/attention.hpp"

#include <cmath>

#include "xmlc/errors.hpp"

namespace xmlc {

ad::Var attention(ad::Var query, ad::Var key, ad::Var value, double scale) {
  if (!(scale > 0.0)) throw ContractError("attention scale must be positive");
  ad::Var scores = ad::scale(ad::matmul(query, ad::transpose(key)), 1.0 / scale);
  return ad::matmul(ad::softmax_rows(scores), value);
}

EncoderLayer EncoderLayer::create(ParameterSet& params, const std::string& name, std::size_t d_model,
                                  std::size_t d_ff, Rng& rng) {
  EncoderLayer l;
  l.w_query = &params.add(name + ".attn.query", glorot_uniform(d_model, d_model, rng));
  l.w_key = &params.add(name + ".attn.key", glorot_uniform(d_model, d_model, rng));
  l.w_value = &params.add(name + ".attn.value", glorot_uniform(d_model, d_model, rng));
  l.w_out = &params.add(name + ".attn.out", glorot_uniform(d_model, d_model, rng));
  l.attn_norm = LayerNorm::create(params, name + ".attn_norm", d_model);
  l.ff_in = Dense::create(params, name + ".ff_in", d_model, d_ff, rng);
  l.ff_out = Dense::create(params, name + ".ff_out", d_ff, d_model, rng);
  l.ff_norm = LayerNorm::create(params, name + ".ff_norm", d_model);
  return l;
}

ad::Var EncoderLayer::operator()(ad::Graph& g, ad::Var x, std::size_t n_heads, AttentionScale mode) const {
  const std::size_t n = x.rows();
  const std::size_t d_model = x.cols();
  const std::size_t d_head = d_model / n_heads;
  const double scale = std::sqrt(static_cast<double>(mode == AttentionScale::kSequenceLength ? n : d_head));

  ad::Var q = ad::matmul(x, bind(g, *w_query));
  ad::Var k = ad::matmul(x, bind(g, *w_key));
  ad::Var v = ad::matmul(x, bind(g, *w_value));
  std::vector<ad::Var> heads;
  heads.reserve(n_heads);
  for (std::size_t h = 0; h < n_heads; ++h) {
    const std::size_t b = h * d_head, e = b + d_head;
    heads.push_back(attention(ad::slice_cols(q, b, e), ad::slice_cols(k, b, e), ad::slice_cols(v, b, e), scale));
  }
  ad::Var mixed = n_heads == 1 ? heads[0] : ad::concat(heads, 1);
  ad::Var h1 = attn_norm(g, ad::add(x, ad::matmul(mixed, bind(g, *w_out))));
  ad::Var ff = ff_out(g, ad::relu(ff_in(g, h1)));
  return ff_norm(g, ad::add(h1, ff));
}

EncoderStack EncoderStack::create(ParameterSet& params, const std::string& name, std::size_t n_layers,
                                  std::size_t d_model, std::size_t d_ff, std::size_t n_heads,
                                  AttentionScale mode, Rng& rng) {
  if (n_heads == 0 || d_model % n_heads != 0) {
    throw ContractError("d_model must be divisible by n_heads");
  }
  EncoderStack s;
  s.n_heads = n_heads;
  s.mode = mode;
  for (std::size_t i = 0; i < n_layers; ++i) {
    s.layers.push_back(EncoderLayer::create(params, name + "." + std::to_string(i), d_model, d_ff, rng));
  }
  return s;
}

ad::Var EncoderStack::operator()(ad::Graph& g, ad::Var x) const {
  for (const auto& layer : layers) x = layer(g, x, n_heads, mode);
  return x;
}

}  // namespace xmlc
