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

#include "coopcarry/env.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "coopcarry/error.hpp"

namespace coopcarry {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kAccelGain = 4.0;
constexpr double kDrag = 0.5;
constexpr double kTurnGain = 2.0;
constexpr double kHandGain = 1.5;
constexpr double kLiftClearance = 0.06;
constexpr double kSettleSpeed = 0.5;
constexpr double kMinSpawnArc = 0.5;
constexpr int kSpawnTries = 10000;

bool finite(Point2 p) { return std::isfinite(p.x) && std::isfinite(p.y); }
bool finite(Point3 p) {
  return std::isfinite(p.x) && std::isfinite(p.y) && std::isfinite(p.z);
}

Point3 clamp_hand(Point3 h, Point3 shoulder) {
  h.z = std::clamp(h.z, kHandMinZ, kHandMaxZ);
  const Point3 d = h - shoulder;
  const double r = d.norm();
  if (r > kHandReach) h = shoulder + d * (kHandReach / r);
  return h;
}

bool contacts_hold(const WorldState& w, const TableGeometry& geom) {
  const std::vector<Point3> cps = contact_points_world(geom, w.table);
  for (const AgentState& a : w.agents) {
    if (!contact(a.hands, cps).both_gripped()) return false;
  }
  return !w.agents.empty();
}

}  // namespace

void EnvConfig::validate() const {
  if (team_size < 1 || team_size > kMaxTeamSize) {
    fail(ErrorCode::kConfig, "team_size must be in [1, 16]");
  }
  if (episode_len <= 0) fail(ErrorCode::kConfig, "episode_len must be positive");
  if (!(dt > 0.0)) fail(ErrorCode::kConfig, "dt must be positive");
  if (!(target_min > 0.0) || !(target_max >= target_min)) {
    fail(ErrorCode::kConfig, "target distance range must satisfy 0 < min <= max");
  }
  coopcarry::validate(table);
  const TableGeometry geom = TableGeometry::build(table);
  if (!(spawn_radius > geom.half_extent() + 1.0)) {
    fail(ErrorCode::kConfig, "spawn_radius must exceed the table half-extent + 1 m");
  }
  const double ws[] = {weights.walk_pos, weights.walk_vel, weights.face_ang,
                       weights.form,     weights.hand_cov, weights.contact,
                       weights.lift_cov, weights.transport, weights.align,
                       weights.put,      weights.k_theta};
  for (double w : ws) {
    if (!(w >= 0.0)) fail(ErrorCode::kConfig, "reward weights must be >= 0");
  }
}

int EnvConfig::required_lifters() const {
  return std::max(1, static_cast<int>(std::ceil(0.8 * table.mass_scale - 1e-12)));
}

std::string to_string(TerminationReason r) {
  switch (r) {
    case TerminationReason::kNone: return "none";
    case TerminationReason::kTimeout: return "timeout";
    case TerminationReason::kOutOfBounds: return "out-of-bounds";
    case TerminationReason::kNonFinite: return "non-finite";
  }
  return "unknown";
}

Env::Env(EnvConfig config) : config_(std::move(config)) {
  config_.validate();
  geom_ = TableGeometry::build(config_.table);
  reset(config_.seed);
}

void Env::reset(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int n = config_.team_size;
  const double radius = config_.spawn_radius;

  std::vector<double> angles(n);
  bool placed = false;
  for (int attempt = 0; attempt < kSpawnTries && !placed; ++attempt) {
    for (double& a : angles) a = kTwoPi * unit(rng);
    placed = true;
    for (int i = 0; i < n && placed; ++i) {
      for (int j = i + 1; j < n; ++j) {
        double gap = std::fabs(angles[i] - angles[j]);
        gap = std::min(gap, kTwoPi - gap);
        if (gap * radius < kMinSpawnArc) {
          placed = false;
          break;
        }
      }
    }
  }
  if (!placed) {
    fail(ErrorCode::kState, "spawn: no placement with 0.5 m separation after 10^4 draws");
  }

  WorldState w;
  for (double a : angles) {
    AgentState s;
    s.root = {radius * std::cos(a), radius * std::sin(a)};
    s.heading = std::atan2(-s.root.y, -s.root.x);
    s.hands = rest_hands(s.root, s.heading);
    w.agents.push_back(s);
  }
  w.table.z = config_.table.tabletop_height;
  const double dist =
      config_.target_min + (config_.target_max - config_.target_min) * unit(rng);
  const double dir = kTwoPi * unit(rng);
  w.target = {dist * std::cos(dir), dist * std::sin(dir)};
  state_ = std::move(w);
  terminated_ = false;
  reason_ = TerminationReason::kNone;
}

void Env::set_state(const WorldState& state) {
  if (state.team_size() < 1 || state.team_size() > kMaxTeamSize) {
    fail(ErrorCode::kInvalidArgument, "set_state: team size must be in [1, 16]");
  }
  state_ = state;
  config_.team_size = state.team_size();
  terminated_ = false;
  reason_ = TerminationReason::kNone;
}

StepOutcome Env::step(std::span<const double> actions) {
  if (terminated_) fail(ErrorCode::kState, "step after termination; call reset");
  const int n = state_.team_size();
  if (static_cast<int>(actions.size()) != n * kActionDim) {
    fail(ErrorCode::kInvalidArgument,
         "step expects " + std::to_string(n * kActionDim) + " action values");
  }
  for (double a : actions) {
    if (!std::isfinite(a)) fail(ErrorCode::kInvalidArgument, "non-finite action");
  }
  const double dt = config_.dt;
  const double rest_z = config_.table.tabletop_height;
  const bool team_large_enough = n >= config_.required_lifters();
  const bool holding = team_large_enough && contacts_hold(state_, geom_);
  const bool carrying = holding && state_.table.z >= rest_z + kLiftClearance;

  const WorldState before = state_;
  for (int i = 0; i < n; ++i) {
    AgentState& s = state_.agents[i];
    double a[kActionDim];
    for (int k = 0; k < kActionDim; ++k) {
      a[k] = std::clamp(actions[i * kActionDim + k], -1.0, 1.0);
    }
    const Point2 accel =
        rotate({kAccelGain * a[0], kAccelGain * a[1]}, s.heading) - s.velocity * kDrag;
    const Point2 old_root = s.root;
    const double old_heading = s.heading;
    s.velocity += accel * dt;
    s.root += s.velocity * dt;
    s.heading_rate = kTurnGain * a[2];
    s.heading = wrap_angle(s.heading + s.heading_rate * dt);
    for (int j = 0; j < 2; ++j) {
      const Point3 old = s.hands[j];
      const Point2 offset = rotate(old.xy() - old_root, -old_heading);
      const Point2 cmd{kHandGain * a[3 + 3 * j], kHandGain * a[4 + 3 * j]};
      const Point2 xy = s.root + rotate(offset + cmd * dt, s.heading);
      Point3 h{xy.x, xy.y, old.z + kHandGain * a[5 + 3 * j] * dt};
      h = clamp_hand(h, s.shoulder());
      s.hands[j] = h;
      s.hand_velocities[j] = (h - old) * (1.0 / dt);
    }
  }

  TableState& table = state_.table;
  if (holding) {
    double mean_z = 0.0;
    for (const AgentState& s : state_.agents) mean_z += s.hands[0].z + s.hands[1].z;
    table.z = std::clamp(mean_z / (2.0 * n), rest_z, kTableMaxZ);
  } else {
    table.z = std::max(rest_z, table.z - kSettleSpeed * dt);
  }
  if (carrying) {
    Point2 v_mean;
    for (const AgentState& s : state_.agents) v_mean += s.velocity;
    v_mean = v_mean / n;
    const Point2 c0 = table.pose.position;
    const Point2 c1 = c0 + v_mean * dt;
    double sum_cross = 0.0, sum_dot = 0.0;
    for (int i = 0; i < n; ++i) {
      const Point2 p = before.agents[i].root - c0;
      const Point2 q = state_.agents[i].root - c1;
      sum_cross += p.cross(q);
      sum_dot += p.dot(q);
    }
    const double dyaw =
        (sum_cross == 0.0 && sum_dot == 0.0) ? 0.0 : std::atan2(sum_cross, sum_dot);
    table.velocity = v_mean;
    table.yaw_rate = dyaw / dt;
    table.pose.position = c1;
    table.pose.yaw = wrap_angle(table.pose.yaw + dyaw);
  } else {
    table.velocity = {};
    table.yaw_rate = 0.0;
  }
  table.gripped = team_large_enough && table.z >= rest_z + kLiftClearance &&
                  contacts_hold(state_, geom_);
  ++state_.step;

  StepOutcome out;
  const auto [done, reason] = check_termination(state_, config_.episode_len);
  terminated_ = done;
  reason_ = reason;
  out.terminated = done;
  out.reason = reason;
  if (reason != TerminationReason::kNonFinite) {
    out.rewards = rewards();
    out.observations = observe_all();
  }
  out.style.reserve(n);
  for (int i = 0; i < n; ++i) {
    out.style.push_back(extract_transition(before.agents[i], state_.agents[i]));
  }
  return out;
}

Observation Env::observe(int agent) const {
  return build_observation(state_, geom_, agent, config_.stage);
}

std::vector<Observation> Env::observe_all() const {
  std::vector<Observation> out;
  out.reserve(state_.agents.size());
  for (int i = 0; i < state_.team_size(); ++i) out.push_back(observe(i));
  return out;
}

std::vector<RewardBreakdown> Env::rewards() const {
  return compute_rewards(state_, geom_, config_.weights, config_.stage);
}

double Env::interaction_indicator(int agent) const {
  return coopcarry::interaction_indicator(state_, geom_, agent);
}

Observation build_observation(const WorldState& world,
                              const TableGeometry& geom, int agent,
                              Stage stage) {
  const int n = world.team_size();
  if (agent < 0 || agent >= n) {
    fail(ErrorCode::kInvalidArgument, "observation: agent index out of range");
  }
  const AgentState& me = world.agents[agent];
  const Pose2 frame{me.root, me.heading};
  const TableState& table = world.table;
  const std::vector<Point3> cps = contact_points_world(geom, table);

  Observation o;
  const Point2 v = frame.dir_to_local(me.velocity);
  const Point2 hl = frame.to_local(me.hands[kLeft].xy());
  const Point2 hr = frame.to_local(me.hands[kRight].xy());
  const double putdown_phase =
      (world.target - table.pose.position).norm() < kPutdownDistance ? 1.0 : 0.0;
  o.proprio = {v.x,
               v.y,
               me.heading_rate,
               hl.x,
               hl.y,
               me.hands[kLeft].z,
               hr.x,
               hr.y,
               me.hands[kRight].z,
               me.hand_velocities[kLeft].z,
               me.hand_velocities[kRight].z,
               (table.pose.position - me.root).norm(),
               all_gripped(world, geom) ? 1.0 : 0.0,
               putdown_phase};

  const int nc = static_cast<int>(cps.size());
  o.object.reserve(3 + 3 * nc + 6);
  const Point2 center = frame.to_local(table.pose.position);
  o.object.insert(o.object.end(), {center.x, center.y, table.z});
  const int first =
      nearest_perimeter_point(table.pose.to_local(me.root), geom.sampling).index;
  for (int k = 0; k < nc; ++k) {
    const Point3& p = cps[(first + k) % nc];
    const Point2 q = frame.to_local(p.xy());
    o.object.insert(o.object.end(), {q.x, q.y, p.z});
  }
  for (int j = 0; j < 2; ++j) {
    const NearestContact c = nearest_contact(me.hands[j], cps);
    const Point2 q = frame.to_local(c.point.xy());
    o.object.insert(o.object.end(), {q.x, q.y, c.point.z});
  }

  if (stage == Stage::kFormationOnly) {
    o.mask_target = true;
  } else {
    const Point2 t = frame.to_local(world.target);
    o.target = {t.x, t.y, putdown_phase};
  }

  auto polar = [&](Point2 p) {
    const Point2 d = p - table.pose.position;
    return (d.x == 0.0 && d.y == 0.0) ? 0.0 : std::atan2(d.y, d.x);
  };
  const double my_angle = polar(me.root);
  o.teammates.reserve(static_cast<size_t>(n - 1) * kTeammateDim);
  for (int j = 0; j < n; ++j) {
    if (j == agent) continue;
    const AgentState& other = world.agents[j];
    const Point2 rel = frame.to_local(other.root);
    const double d = other.heading - me.heading;
    const double c = std::cos(d), s = std::sin(d);
    o.teammates.insert(o.teammates.end(),
                       {rel.x, rel.y, c, s, 0.0, -s, c, 0.0,
                        wrap_angle(polar(other.root) - my_angle)});
  }
  return o;
}

double interaction_indicator(const WorldState& world, const TableGeometry& geom,
                             int agent) {
  if (agent < 0 || agent >= world.team_size()) {
    fail(ErrorCode::kInvalidArgument, "interaction indicator: agent out of range");
  }
  const Point2 local = world.table.pose.to_local(world.agents[agent].root);
  const double d = nearest_perimeter_point(local, geom.sampling).distance;
  return (1.0 - d) / 0.2;
}

std::pair<bool, TerminationReason> check_termination(const WorldState& world,
                                                     int episode_len) {
  const TableState& t = world.table;
  bool ok = finite(t.pose.position) && std::isfinite(t.pose.yaw) &&
            std::isfinite(t.z) && finite(world.target);
  for (const AgentState& a : world.agents) {
    ok = ok && finite(a.root) && finite(a.velocity) && std::isfinite(a.heading) &&
         finite(a.hands[0]) && finite(a.hands[1]);
  }
  if (!ok) return {true, TerminationReason::kNonFinite};
  for (const AgentState& a : world.agents) {
    if ((a.root - t.pose.position).norm() > kOutOfBounds) {
      return {true, TerminationReason::kOutOfBounds};
    }
  }
  if (world.step >= episode_len) return {true, TerminationReason::kTimeout};
  return {false, TerminationReason::kNone};
}

}  // namespace coopcarry
