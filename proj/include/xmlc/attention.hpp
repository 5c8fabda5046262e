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
#include <string>
#include <vector>

#include "xmlc/autodiff.hpp"
#include "xmlc/layers.hpp"

namespace xmlc {

enum class AttentionScale {
  kSequenceLength,  // softmax(QK^T / sqrt(n)), n = number of rows
  kKeyDim,          // softmax(QK^T / sqrt(d_k))
};

/// softmax(Q K^T / scale) V, unmasked.
ad::Var attention(ad::Var query, ad::Var key, ad::Var value, double scale);

/// One transformer encoder layer without positional information: multi-head
/// self-attention and a position-wise ReLU feed-forward block, each wrapped
/// in a residual connection followed by layer normalization.
struct EncoderLayer {
  Parameter* w_query = nullptr;
  Parameter* w_key = nullptr;
  Parameter* w_value = nullptr;
  Parameter* w_out = nullptr;
  LayerNorm attn_norm;
  Dense ff_in;
  Dense ff_out;
  LayerNorm ff_norm;

  static EncoderLayer create(ParameterSet& params, const std::string& name, std::size_t d_model,
                             std::size_t d_ff, Rng& rng);
  ad::Var operator()(ad::Graph& g, ad::Var x, std::size_t n_heads, AttentionScale mode) const;
};

struct EncoderStack {
  std::vector<EncoderLayer> layers;
  std::size_t n_heads = 1;
  AttentionScale mode = AttentionScale::kSequenceLength;

  static EncoderStack create(ParameterSet& params, const std::string& name, std::size_t n_layers,
                             std::size_t d_model, std::size_t d_ff, std::size_t n_heads,
                             AttentionScale mode, Rng& rng);
  /// n x d_model in, n x d_model out. Row i of the output depends on the
  /// input rows only as a set plus row i itself.
  ad::Var operator()(ad::Graph& g, ad::Var x) const;
};

}  // namespace xmlc
