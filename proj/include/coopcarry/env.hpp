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

// Desk-scale cooperative carrying environment.
//
// Agents are planar point bodies with a heading and two velocity-commanded
// hands carried in the body frame. The table is quasi-static: it rests on the
// floor under static friction until every agent holds it with both hands,
// then follows the mean hand height and, once lifted clear, the agents'
// mean planar motion plus a least-squares yaw.

#ifndef COOPCARRY_ENV_HPP_
#define COOPCARRY_ENV_HPP_

#include <array>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "coopcarry/geometry.hpp"
#include "coopcarry/rewards.hpp"
#include "coopcarry/style.hpp"
#include "coopcarry/world.hpp"

namespace coopcarry {

inline constexpr int kActionDim = 9;
inline constexpr int kProprioDim = 14;
inline constexpr int kTargetDim = 3;
inline constexpr int kTeammateDim = 9;
inline constexpr int kMaxTeamSize = 16;
inline constexpr double kOutOfBounds = 20.0;

struct EnvConfig {
  int team_size = 2;
  TableSpec table = TableSpec::square(1.6);
  int episode_len = 600;
  double dt = 1.0 / 30.0;
  double spawn_radius = 8.0;
  double target_min = 3.0;
  double target_max = 10.0;
  std::uint64_t seed = 0;
  Stage stage = Stage::kFullTask;
  RewardWeights weights;

  void validate() const;
  // Agents needed to lift the table; four under a 5x load.
  int required_lifters() const;
};

// Per-agent observation, every spatial quantity in the agent's heading frame
// (origin at the root on the floor, x along the heading, z up).
struct Observation {
  std::array<double, kProprioDim> proprio{};
  // Object token input: center (3), contact points from the one nearest the
  // root counterclockwise (3 * n_contact), hand-nearest points (6).
  std::vector<double> object;
  std::array<double, kTargetDim> target{};
  std::vector<double> teammates;  // kTeammateDim per teammate
  bool mask_target = false;

  int teammate_count() const {
    return static_cast<int>(teammates.size()) / kTeammateDim;
  }
};

enum class TerminationReason { kNone, kTimeout, kOutOfBounds, kNonFinite };
std::string to_string(TerminationReason r);

struct StepOutcome {
  std::vector<Observation> observations;
  std::vector<RewardBreakdown> rewards;
  std::vector<TransitionPair> style;
  bool terminated = false;
  TerminationReason reason = TerminationReason::kNone;
};

class Env {
 public:
  explicit Env(EnvConfig config);

  // Resets to a fresh episode drawn from `seed`.
  void reset(std::uint64_t seed);
  StepOutcome step(std::span<const double> actions);

  Observation observe(int agent) const;
  std::vector<Observation> observe_all() const;
  std::vector<RewardBreakdown> rewards() const;

  const WorldState& state() const { return state_; }
  // Replaces the state (tests, checkpoint restore). Clears termination.
  void set_state(const WorldState& state);
  const EnvConfig& config() const { return config_; }
  const TableGeometry& geometry() const { return geom_; }
  bool terminated() const { return terminated_; }
  TerminationReason termination_reason() const { return reason_; }

  // (1 - d) / 0.2 with d the root distance to the nearest perimeter sample.
  double interaction_indicator(int agent) const;

 private:
  EnvConfig config_;
  TableGeometry geom_;
  WorldState state_;
  bool terminated_ = false;
  TerminationReason reason_ = TerminationReason::kNone;
};

Observation build_observation(const WorldState& world,
                              const TableGeometry& geom, int agent,
                              Stage stage);

double interaction_indicator(const WorldState& world, const TableGeometry& geom,
                             int agent);

std::pair<bool, TerminationReason> check_termination(const WorldState& world,
                                                     int episode_len);

}  // namespace coopcarry

#endif  // COOPCARRY_ENV_HPP_
