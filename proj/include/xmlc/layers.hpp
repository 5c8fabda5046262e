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

#include "xmlc/autodiff.hpp"
#include "xmlc/parameters.hpp"
#include "xmlc/rng.hpp"

namespace xmlc {

/// Registers `p` on `g`, frozen when the graph does not track gradients.
inline ad::Var bind(ad::Graph& g, Parameter& p) { return g.param(p); }

/// Affine map x·W + b over rows.
struct Dense {
  Parameter* weight = nullptr;
  Parameter* bias = nullptr;

  static Dense create(ParameterSet& params, const std::string& name, std::size_t in, std::size_t out,
                      Rng& rng);
  ad::Var operator()(ad::Graph& g, ad::Var x) const;
  std::size_t in_dim() const { return weight->value.rows(); }
  std::size_t out_dim() const { return weight->value.cols(); }
};

/// Feed-forward map with a single ReLU hidden layer.
struct TwoLayerNet {
  Dense hidden;
  Dense output;

  static TwoLayerNet create(ParameterSet& params, const std::string& name, std::size_t in,
                            std::size_t hidden_dim, std::size_t out, Rng& rng);
  ad::Var operator()(ad::Graph& g, ad::Var x) const;
};

/// Learned per-column scale and shift after row-wise layer normalization.
struct LayerNorm {
  Parameter* gain = nullptr;
  Parameter* shift = nullptr;

  static LayerNorm create(ParameterSet& params, const std::string& name, std::size_t dim);
  ad::Var operator()(ad::Graph& g, ad::Var x) const;
};

}  // namespace xmlc
