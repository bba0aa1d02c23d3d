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

// Teammate-token transformer.
//
// Each sample contributes four agent tokens [e, proprio, object, target] and a
// variable number of teammate tokens. A stack applies pre-norm self-attention
// over the agent tokens, cross-attention from agent tokens to the teammate
// tokens, and a feed-forward block, each with a residual. The updated e token
// feeds the head. There are no positional encodings, so the output is
// invariant to the order of teammates.

#ifndef COOPCARRY_POLICY_HPP_
#define COOPCARRY_POLICY_HPP_

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "coopcarry/autodiff.hpp"
#include "coopcarry/env.hpp"
#include "coopcarry/nn.hpp"

namespace coopcarry {

struct NetConfig {
  int d_model = 64;
  std::vector<int> tokenizer_hidden = {256, 128};  // then d_model
  int stacks = 3;
  int heads = 2;
  int ff_width = 512;
  std::vector<int> head_hidden = {1024, 512};
  int proprio_dim = kProprioDim;
  int object_dim = 3 + 3 * 64 + 6;
  int target_dim = kTargetDim;
  int teammate_dim = kTeammateDim;
  int action_dim = kActionDim;
  double init_log_std = -0.5;

  void validate() const;
  static int object_dim_for(int n_contact) { return 3 + 3 * n_contact + 6; }
};

// Observations of many agents packed row-wise. Teammates of sample s occupy
// rows [teammate_offsets[s], teammate_offsets[s+1]).
struct ObsBatch {
  ad::Mat proprio, object, target, teammates;
  std::vector<int> teammate_offsets{0};

  int size() const { return static_cast<int>(proprio.rows()); }
  static ObsBatch from(std::span<const Observation> obs);
  // Rows `idx` of this batch, teammates included.
  ObsBatch select(std::span<const int> idx) const;
};

// Running mean and variance per input column, clipped to +-5 after scaling.
class ObsNormalizer {
 public:
  ObsNormalizer() = default;
  explicit ObsNormalizer(const NetConfig& cfg);

  void update(const ObsBatch& batch);
  ObsBatch apply(const ObsBatch& batch) const;

  struct Stats {
    ad::Vec mean, m2;
    double count = 0.0;
  };
  std::vector<Stats>& stats() { return stats_; }  // proprio, object, target, teammate
  const std::vector<Stats>& stats() const { return stats_; }

 private:
  std::vector<Stats> stats_;
};

class Network {
 public:
  Network(const NetConfig& cfg, int out_dim, const std::string& name,
          std::uint64_t seed, double head_gain = 1.0);
  Network(const Network&) = delete;
  Network& operator=(const Network&) = delete;

  struct Tokens {
    ad::Var agent;      // 4B x d, rows interleaved per sample
    ad::Var teammates;  // T x d, unset when T = 0
    bool has_teammates = false;
  };
  Tokens tokenize(ad::Tape& t, const ObsBatch& batch) const;
  ad::Var forward(ad::Tape& t, const ObsBatch& batch) const;  // B x out

  ad::ParamSet& params() { return params_; }
  const ad::ParamSet& params() const { return params_; }
  const NetConfig& config() const { return cfg_; }

 private:
  struct Attention {
    nn::LayerNorm ln_q;
    nn::LayerNorm ln_kv;  // cross-attention only
    nn::Linear wq, wk, wv, wo;
  };
  struct Stack {
    Attention self_attn;
    Attention cross_attn;
    nn::LayerNorm ln_ff;
    nn::Linear ff1, ff2;
  };

  NetConfig cfg_;
  ad::ParamSet params_;
  ad::Parameter* embedding_ = nullptr;
  nn::Mlp tok_proprio_, tok_object_, tok_target_, tok_teammate_;
  std::vector<Stack> stacks_;
  nn::LayerNorm ln_out_;
  nn::Mlp head_;
};

struct PolicyOutput {
  ad::Mat mean;     // B x action_dim
  ad::Vec log_std;  // action_dim, clamped to [-5, 1]
  ad::Vec value;    // B
};

// Separate actor and critic with the same backbone shape; no shared weights.
// The actor's parameter set also holds the state-independent log-std.
class ActorCritic {
 public:
  ActorCritic(const NetConfig& cfg, std::uint64_t seed);

  PolicyOutput evaluate(const ObsBatch& batch) const;
  ad::Vec values(const ObsBatch& batch) const;

  // Differentiable pieces for the PPO loss.
  ad::Var mean(ad::Tape& t, const ObsBatch& batch) const;
  ad::Var log_std(ad::Tape& t) const;  // 1 x action_dim, clamped
  ad::Var value(ad::Tape& t, const ObsBatch& batch) const;  // B x 1

  Network& actor() { return actor_; }
  Network& critic() { return critic_; }
  const Network& actor() const { return actor_; }
  const Network& critic() const { return critic_; }
  const NetConfig& config() const { return cfg_; }

 private:
  NetConfig cfg_;
  Network actor_;
  Network critic_;
  ad::Parameter* log_std_ = nullptr;
};

inline constexpr double kMinLogStd = -5.0;
inline constexpr double kMaxLogStd = 1.0;

struct SampledActions {
  ad::Mat actions;    // B x action_dim, unclamped
  ad::Vec log_prob;   // B
};

// Diagonal Gaussian draw; the log-density is of the pre-clamp sample.
SampledActions sample_action(const PolicyOutput& out, std::mt19937_64& rng);
// Same arithmetic as the training path.
ad::Vec gaussian_log_prob(const ad::Mat& mean, const ad::Vec& log_std,
                          const ad::Mat& actions);

}  // namespace coopcarry

#endif  // COOPCARRY_POLICY_HPP_
