// Copyright 2026 The coopcarry Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "coopcarry/nn.hpp"

#include <cmath>

#include "coopcarry/error.hpp"

namespace coopcarry::nn {

Linear Linear::create(ParamSet& ps, const std::string& name, int in, int out,
                      std::mt19937_64& rng, double weight_gain) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  Linear l;
  l.w = &ps.add(name + ".w", ad::uniform_init(in, out, bound, rng) * weight_gain);
  l.b = &ps.add(name + ".b", ad::uniform_init(1, out, bound, rng));
  return l;
}

Var Linear::operator()(Tape& t, Var x) const {
  return ad::linear(x, t.param(*w), t.param(*b));
}

LayerNorm LayerNorm::create(ParamSet& ps, const std::string& name, int dim) {
  LayerNorm ln;
  ln.gain = &ps.add(name + ".gain", Mat::Ones(1, dim));
  ln.bias = &ps.add(name + ".bias", Mat::Zero(1, dim));
  return ln;
}

Var LayerNorm::operator()(Tape& t, Var x) const {
  return ad::layer_norm(x, t.param(*gain), t.param(*bias));
}

Mlp::Mlp(ParamSet& ps, const std::string& name, int in,
         const std::vector<int>& sizes, std::mt19937_64& rng, double last_gain) {
  if (sizes.empty()) fail(ErrorCode::kInvalidArgument, name + ": no layers");
  int prev = in;
  for (size_t i = 0; i < sizes.size(); ++i) {
    const bool last = i + 1 == sizes.size();
    layers_.push_back(Linear::create(ps, name + "." + std::to_string(i), prev,
                                     sizes[i], rng, last ? last_gain : 1.0));
    prev = sizes[i];
  }
}

Var Mlp::operator()(Tape& t, Var x) const {
  for (size_t i = 0; i < layers_.size(); ++i) {
    x = layers_[i](t, x);
    if (i + 1 < layers_.size()) x = ad::relu(x);
  }
  return x;
}

Adam::Adam(ParamSet& params, AdamConfig config)
    : params_(&params), config_(config) {
  for (const Parameter& p : params.items()) {
    m_.push_back(Mat::Zero(p.value.rows(), p.value.cols()));
    v_.push_back(Mat::Zero(p.value.rows(), p.value.cols()));
  }
}

double Adam::step() {
  auto& items = params_->items();
  if (items.size() != m_.size()) {
    fail(ErrorCode::kState, "adam: parameter set changed after construction");
  }
  double sq = 0.0;
  for (const Parameter& p : items) {
    if (p.grad.size() != 0) sq += p.grad.squaredNorm();
  }
  const double norm = std::sqrt(sq);
  if (!std::isfinite(norm)) {
    fail(ErrorCode::kNumeric, "adam: non-finite gradient");
  }
  double clip = 1.0;
  if (config_.max_grad_norm > 0.0 && norm > config_.max_grad_norm) {
    clip = config_.max_grad_norm / norm;
  }
  ++t_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  size_t i = 0;
  for (Parameter& p : items) {
    if (p.grad.size() != 0) {
      const Mat g = p.grad * clip;
      m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * g;
      v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * g.cwiseAbs2();
      p.value.array() -= config_.lr * (m_[i].array() / c1) /
                         ((v_[i].array() / c2).sqrt() + config_.eps);
    }
    ++i;
  }
  return norm;
}

}  // namespace coopcarry::nn
