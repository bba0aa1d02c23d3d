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

// Evaluation metrics (success rate, distance to target, cooperative time
// ratio, mean absolute jerk), the controllers that can be evaluated, and the
// batch runner over a (team size, table shape) grid.

#ifndef COOPCARRY_METRICS_HPP_
#define COOPCARRY_METRICS_HPP_

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "coopcarry/env.hpp"
#include "coopcarry/geometry.hpp"
#include "coopcarry/policy.hpp"
#include "coopcarry/world.hpp"

namespace coopcarry {

// Reported distance for successful episodes.
inline constexpr double kSuccessDistance = 0.03;

// What the metrics need from one simulation step.
struct StepRecord {
  double target_distance = 0.0;
  bool all_gripped = false;       // every agent grips with both hands
  bool contact_one_hand = false;  // every agent has a hand within 0.04 m
  bool contact_both_hands = false;
  std::vector<Point3> contact_points;  // world frame

  static StepRecord from(const WorldState& w, const TableGeometry& geom);
};

struct SuccessDistance {
  bool success = false;
  double d_final = 0.0;
};

// Throws kInvalidArgument on an empty trajectory.
SuccessDistance success_and_distance(std::span<const StepRecord> steps);

// Inclusive step range from the first all-grip step to the putdown trigger
// (first later step closer than 0.03 m to the target) or the last step.
struct TransportWindow {
  int begin = 0;
  int end = -1;
  int size() const { return end >= begin ? end - begin + 1 : 0; }
};

TransportWindow transport_window(std::span<const StepRecord> steps);

double cooperative_time_ratio(std::span<const StepRecord> steps,
                              bool both_hands = false);

// Magnitude of the four-point third difference of every contact point,
// averaged over points and window positions, over dt^3. Empty when the
// window spans fewer than four steps.
std::optional<double> mean_abs_jerk(std::span<const StepRecord> steps,
                                    double dt);

struct EpisodeMetrics {
  bool success = false;
  double d_final = 0.0;
  double t_coop = 0.0;
  std::optional<double> jerk;
  int team_size = 0;
  TableShape shape = TableShape::kSquare;
  std::uint64_t seed = 0;
  int steps = 0;
  TerminationReason termination = TerminationReason::kNone;
};

EpisodeMetrics compute_episode_metrics(std::span<const StepRecord> steps,
                                       double dt, bool both_hands = false);

// Something that produces a joint action for every agent of an Env.
class Controller {
 public:
  virtual ~Controller() = default;
  virtual void reset(const Env& env) { (void)env; }
  // team_size * kActionDim values.
  virtual std::vector<double> act(const Env& env) = 0;
};

using ControllerFactory = std::function<std::unique_ptr<Controller>()>;

class ZeroController : public Controller {
 public:
  std::vector<double> act(const Env& env) override;
};

// Uniform actions in [-1, 1]^9. Reset restarts the stream from the
// controller seed combined with the episode seed.
class RandomController : public Controller {
 public:
  explicit RandomController(std::uint64_t seed) : seed_(seed), rng_(seed) {}
  void reset(const Env& env) override;
  std::vector<double> act(const Env& env) override;

 private:
  std::uint64_t seed_;
  std::mt19937_64 rng_;
};

// Deterministic mean actions of a trained actor.
class PolicyController : public Controller {
 public:
  PolicyController(std::shared_ptr<const ActorCritic> model,
                   std::shared_ptr<const ObsNormalizer> normalizer)
      : model_(std::move(model)), normalizer_(std::move(normalizer)) {}
  std::vector<double> act(const Env& env) override;

 private:
  std::shared_ptr<const ActorCritic> model_;
  std::shared_ptr<const ObsNormalizer> normalizer_;
};

// Scripted centralized controller for the surrogate dynamics. Agents are
// assigned perimeter slots at equal angular spacing around the table, walk
// to them, bring both hands onto the contact points two samples to either
// side, lift together, carry along the straight line to the target at a
// shared rate-limited velocity, then lower the table and release.
class OracleController : public Controller {
 public:
  enum class Phase { kApproach, kReach, kLift, kCarry, kPutdown };

  void reset(const Env& env) override;
  std::vector<double> act(const Env& env) override;

  Phase phase() const { return phase_; }
  // Perimeter index each agent is assigned to.
  const std::vector<int>& slots() const { return slot_index_; }

 private:
  struct Slot {
    Point2 stand;          // table frame
    double facing = 0.0;   // table frame
    int left = 0, right = 0;
  };

  void advance_phase(const Env& env);

  Phase phase_ = Phase::kApproach;
  std::vector<Slot> slot_;
  std::vector<int> slot_index_;
  Point2 carry_velocity_;
};

// Unit-load tables used for evaluation grids: round 2.0 m, square 1.6 m,
// rectangle 2.0 x 1.2 m.
TableSpec standard_table(TableShape shape);

// Seed of episode `index` in grid cell (team_size, shape).
std::uint64_t episode_seed(std::uint64_t base, int team_size, TableShape shape,
                           int index);

struct Trajectory {
  TableSpec table;
  double dt = 1.0 / 30.0;
  std::vector<WorldState> states;  // initial state first
};

struct EpisodeRun {
  EpisodeMetrics metrics;
  Trajectory trajectory;  // filled when requested
};

EpisodeRun run_episode(const EnvConfig& config, std::uint64_t seed,
                       Controller& controller, bool keep_trajectory = false,
                       bool both_hands = false);

struct EvalConfig {
  std::vector<int> team_sizes = {2, 4, 8};
  std::vector<TableShape> shapes = {TableShape::kRound, TableShape::kSquare,
                                    TableShape::kRectangle};
  int episodes = 100;
  std::uint64_t seed = 0;
  // Template for every cell; team size and table shape are overridden, the
  // load factor and everything else are kept.
  EnvConfig env;
  bool both_hands = false;

  void validate() const;
};

struct AggregateRow {
  int team_size = 0;
  TableShape shape = TableShape::kSquare;
  int episodes = 0;
  double success_rate = 0.0;  // percent
  double mean_d = 0.0;
  double mean_t_coop = 0.0;   // percent
  double mean_jerk = 0.0;     // over episodes with a defined jerk; NaN if none
  int jerk_episodes = 0;
};

struct AggregateReport {
  std::vector<AggregateRow> rows;
  std::vector<EpisodeMetrics> episodes;  // grid order, then seed index
};

AggregateRow aggregate(std::span<const EpisodeMetrics> episodes);

AggregateReport evaluate(const ControllerFactory& factory,
                         const EvalConfig& config);

std::string report_csv(const AggregateReport& report);
std::string report_json(const AggregateReport& report);
std::string episodes_jsonl(const AggregateReport& report);
// One episode as a single-line JSON object.
std::string episode_json(const EpisodeMetrics& e);

}  // namespace coopcarry

#endif  // COOPCARRY_METRICS_HPP_
