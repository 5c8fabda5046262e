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

#include "xmlc/layers.hpp"

namespace xmlc {

Dense Dense::create(ParameterSet& params, const std::string& name, std::size_t in, std::size_t out,
                    Rng& rng) {
  Dense d;
  d.weight = &params.add(name + ".weight", glorot_uniform(in, out, rng));
  d.bias = &params.add(name + ".bias", Tensor::matrix(1, out));
  return d;
}

ad::Var Dense::operator()(ad::Graph& g, ad::Var x) const {
  return ad::add(ad::matmul(x, bind(g, *weight)), bind(g, *bias));
}

TwoLayerNet TwoLayerNet::create(ParameterSet& params, const std::string& name, std::size_t in,
                                std::size_t hidden_dim, std::size_t out, Rng& rng) {
  return {Dense::create(params, name + ".hidden", in, hidden_dim, rng),
          Dense::create(params, name + ".out", hidden_dim, out, rng)};
}

ad::Var TwoLayerNet::operator()(ad::Graph& g, ad::Var x) const {
  return output(g, ad::relu(hidden(g, x)));
}

LayerNorm LayerNorm::create(ParameterSet& params, const std::string& name, std::size_t dim) {
  LayerNorm ln;
  ln.gain = &params.add(name + ".gain", Tensor::matrix(1, dim, 1.0));
  ln.shift = &params.add(name + ".shift", Tensor::matrix(1, dim, 0.0));
  return ln;
}

ad::Var LayerNorm::operator()(ad::Graph& g, ad::Var x) const {
  return ad::add(ad::mul(ad::layer_norm_rows(x, 1e-10), bind(g, *gain)), bind(g, *shift));
}

}  // namespace xmlc
