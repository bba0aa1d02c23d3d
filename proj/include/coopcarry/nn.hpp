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

// Small layers on top of the tape, plus Adam.

#ifndef COOPCARRY_NN_HPP_
#define COOPCARRY_NN_HPP_

#include <random>
#include <string>
#include <vector>

#include "coopcarry/autodiff.hpp"

namespace coopcarry::nn {

using ad::Mat;
using ad::Parameter;
using ad::ParamSet;
using ad::Tape;
using ad::Var;

struct Linear {
  Parameter* w = nullptr;  // in x out
  Parameter* b = nullptr;  // 1 x out

  // Weights and biases uniform in +-1/sqrt(in), weights then scaled by
  // `weight_gain`.
  static Linear create(ParamSet& ps, const std::string& name, int in, int out,
                       std::mt19937_64& rng, double weight_gain = 1.0);
  Var operator()(Tape& t, Var x) const;
  int in() const { return static_cast<int>(w->value.rows()); }
  int out() const { return static_cast<int>(w->value.cols()); }
};

struct LayerNorm {
  Parameter* gain = nullptr;
  Parameter* bias = nullptr;

  static LayerNorm create(ParamSet& ps, const std::string& name, int dim);
  Var operator()(Tape& t, Var x) const;
};

// ReLU between layers; the last layer is linear.
class Mlp {
 public:
  Mlp() = default;
  Mlp(ParamSet& ps, const std::string& name, int in,
      const std::vector<int>& sizes, std::mt19937_64& rng,
      double last_gain = 1.0);

  Var operator()(Tape& t, Var x) const;
  int in() const { return layers_.front().in(); }
  int out() const { return layers_.back().out(); }

 private:
  std::vector<Linear> layers_;
};

struct AdamConfig {
  double lr = 2e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double max_grad_norm = 0.0;  // 0 disables clipping
};

class Adam {
 public:
  Adam(ParamSet& params, AdamConfig config);

  // Applies one update from the accumulated gradients. Returns the global
  // gradient norm before clipping. Throws kNumeric on non-finite gradients,
  // leaving parameters untouched.
  double step();

  const AdamConfig& config() const { return config_; }
  void set_lr(double lr) { config_.lr = lr; }
  long long steps() const { return t_; }

  // Moment state, in the parameter set's order, for checkpoints.
  std::vector<Mat>& first_moments() { return m_; }
  std::vector<Mat>& second_moments() { return v_; }
  void set_steps(long long t) { t_ = t; }

 private:
  ParamSet* params_;
  AdamConfig config_;
  std::vector<Mat> m_, v_;
  long long t_ = 0;
};

}  // namespace coopcarry::nn

#endif  // COOPCARRY_NN_HPP_
