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

// Masked adversarial motion priors.
//
// Motion features (heading frame, one agent, one instant):
//   0 forward speed      1 lateral speed (+ left)   2 heading rate
//   3 left hand z        4 right hand z
//   5 left hand forward  6 left hand lateral
//   7 right hand forward 8 right hand lateral
//   9 mean hand speed
// The masked view keeps indices 0..2 and drops every hand-derived entry.
// Discriminators score a transition (features at t, features at t+1).

#ifndef COOPCARRY_STYLE_HPP_
#define COOPCARRY_STYLE_HPP_

#include <array>
#include <cstdint>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

#include "coopcarry/autodiff.hpp"
#include "coopcarry/nn.hpp"
#include "coopcarry/world.hpp"

namespace coopcarry {

inline constexpr int kFullFeatureDim = 10;
inline constexpr int kMaskedFeatureDim = 3;
inline constexpr std::array<int, kMaskedFeatureDim> kMaskedIndices = {0, 1, 2};

struct MotionFeatures {
  std::array<double, kFullFeatureDim> full{};

  std::array<double, kMaskedFeatureDim> masked() const;
};

struct TransitionPair {
  MotionFeatures current;
  MotionFeatures next;

  // Discriminator inputs: [current, next] concatenated.
  std::array<double, 2 * kFullFeatureDim> full_input() const;
  std::array<double, 2 * kMaskedFeatureDim> masked_input() const;
};

MotionFeatures extract_features(const AgentState& s);
TransitionPair extract_transition(const AgentState& at_t,
                                  const AgentState& at_t1);

// -- reference motions --------------------------------------------------------

enum class ReferenceKind {
  kWalkForward,
  kWalkBackward,
  kSideStepLeft,
  kSideStepRight,
  kLowerHands,
  kRaiseHands,
};
inline constexpr int kReferenceKindCount = 6;

std::string to_string(ReferenceKind kind);
ReferenceKind reference_kind_from_string(const std::string& name);

inline constexpr double kRefMinSpeed = 1.0;
inline constexpr double kRefMaxSpeed = 2.5;
inline constexpr double kRefLowHandZ = 0.65;
inline constexpr double kRefHighHandZ = 1.1;

struct ReferenceClip {
  std::string name;
  double dt = 1.0 / 30.0;
  std::vector<AgentState> states;  // empty for imported feature-only clips
  std::vector<MotionFeatures> features;
};

// Scripted clip. Walking clips move at a constant speed drawn from
// [1.0, 2.5] m/s; hand clips sweep both hands between 0.65 and 1.1 m with a
// whole number of steps so finite differences are exact.
ReferenceClip generate_reference(ReferenceKind kind, int steps, double dt,
                                 std::mt19937_64& rng);

class ReferenceLibrary {
 public:
  // `clips_per_kind` clips of every kind, `steps` states each.
  static ReferenceLibrary scripted(std::uint64_t seed, int clips_per_kind = 8,
                                   int steps = 60, double dt = 1.0 / 30.0);

  void add(ReferenceClip clip);
  const std::vector<ReferenceClip>& clips() const { return clips_; }

  // Uniform transitions drawn from clips whose name is in `names`. Rows are
  // discriminator inputs (full or masked view).
  ad::Mat sample(const std::vector<std::string>& names, int count, bool masked,
                 std::mt19937_64& rng) const;
  // Every transition from the selected clips.
  ad::Mat all_transitions(const std::vector<std::string>& names,
                          bool masked) const;

  // JSON-lines: {"name": ..., "dt": ..., "features": [[10 reals], ...]}.
  void write_jsonl(std::ostream& out) const;
  static ReferenceLibrary read_jsonl(std::istream& in);

 private:
  std::vector<ReferenceClip> clips_;
};

// Reference sets per discriminator and training stage. The full-body
// discriminator only sees forward and sideways walking; the masked one
// also gets hand lowering/raising, and backward walking once transport is on.
std::vector<std::string> full_reference_set();
std::vector<std::string> masked_reference_set(bool full_task);

// -- discriminator ------------------------------------------------------------

class Discriminator {
 public:
  Discriminator(int input_dim, std::vector<int> hidden, std::uint64_t seed);

  // Per-column standardization applied before the MLP; frozen once set.
  void set_normalizer(const ad::Vec& mean, const ad::Vec& std);
  void fit_normalizer(const ad::Mat& reference);

  ad::Vec logits(const ad::Mat& inputs) const;
  ad::Vec probabilities(const ad::Mat& inputs) const;

  // -E_ref[log D] - E_policy[log(1 - D)], written with softplus on logits.
  // Gradients are accumulated into params().
  double loss_and_grad(const ad::Mat& reference, const ad::Mat& policy);
  // Fraction classified correctly at threshold 0.5.
  double accuracy(const ad::Mat& reference, const ad::Mat& policy) const;

  int input_dim() const { return input_dim_; }
  const std::vector<int>& hidden() const { return hidden_; }
  ad::ParamSet& params() { return params_; }
  const ad::ParamSet& params() const { return params_; }
  const ad::Vec& norm_mean() const { return mean_; }
  const ad::Vec& norm_std() const { return std_; }

 private:
  ad::Var forward(ad::Tape& t, const ad::Mat& inputs) const;

  int input_dim_;
  std::vector<int> hidden_;
  ad::ParamSet params_;
  nn::Mlp mlp_;
  ad::Vec mean_, std_;
};

// BCE written on probabilities, each clamped to [1e-7, 1 - 1e-7].
double discriminator_loss(const ad::Vec& d_reference, const ad::Vec& d_policy);

// -log(1 - clamp(D, 0, 1 - 1e-4)).
double style_reward(double d);
double sigmoid(double x);
// sigma(alpha) * r_mask + (1 - sigma(alpha)) * r_full.
double blend(double r_mask, double r_full, double alpha);

struct CombineWeights {
  double task = 0.5;
  double style = 0.5;
};
double combined_reward(double r_task, double r_style,
                       const CombineWeights& w = {});

}  // namespace coopcarry

#endif  // COOPCARRY_STYLE_HPP_
