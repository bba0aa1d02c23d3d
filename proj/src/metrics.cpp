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

#include "coopcarry/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "coopcarry/error.hpp"
#include "coopcarry/parallel.hpp"
#include "coopcarry/rewards.hpp"
#include "json.hpp"

namespace coopcarry {
namespace {

using json = nlohmann::json;

// Oracle gains. Approach uses a critically damped PD on the slot position;
// carry tracks a shared reference velocity whose rate of change is bounded
// so that no agent's acceleration command saturates.
constexpr double kApproachGain = 1.5;
constexpr double kVelocityGain = 6.0;
constexpr double kApproachSpeed = 3.0;
constexpr double kCarrySpeed = 1.5;
constexpr double kCarryGain = 1.5;
constexpr double kCarryRamp = 2.0;
constexpr double kFormationGain = 2.0;
constexpr double kTurnRate = 3.0;
constexpr double kLiftHeight = 0.95;
constexpr double kLiftRate = 0.3;
constexpr double kHandTolerance = 0.005;
constexpr double kSettleDistance = 0.05;
constexpr double kSettleSpeed = 0.1;
constexpr double kSettleHeading = 0.05;
constexpr double kCarrySettleSpeed = 0.05;

// Surrogate actuation constants, mirrored from the environment.
constexpr double kAccelGain = 4.0;
constexpr double kDrag = 0.5;
constexpr double kTurnGain = 2.0;
constexpr double kHandGain = 1.5;
constexpr double kLiftClearance = 0.06;

Point2 clamp_norm(Point2 v, double max_norm) {
  const double n = v.norm();
  return n > max_norm ? v * (max_norm / n) : v;
}

double clamp1(double x) { return std::clamp(x, -1.0, 1.0); }

// First hit of the ray origin + t * dir (t > 0) with a closed ring.
Point2 ray_hit(std::span<const Point2> ring, Point2 origin, Point2 dir) {
  double best = std::numeric_limits<double>::infinity();
  const size_t m = ring.size();
  for (size_t i = 0; i < m; ++i) {
    const Point2 a = ring[i];
    const Point2 e = ring[(i + 1) % m] - a;
    const double denom = dir.cross(e);
    if (denom == 0.0) continue;
    const Point2 ao = a - origin;
    const double t = ao.cross(e) / denom;
    const double s = ao.cross(dir) / denom;
    if (t > 0.0 && s >= 0.0 && s <= 1.0) best = std::min(best, t);
  }
  if (!std::isfinite(best)) {
    fail(ErrorCode::kInternal, "oracle: ray does not meet the table boundary");
  }
  return origin + dir * best;
}

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

StepRecord StepRecord::from(const WorldState& w, const TableGeometry& geom) {
  StepRecord r;
  r.target_distance = (w.table.pose.position - w.target).norm();
  r.contact_points = contact_points_world(geom, w.table);
  bool one = !w.agents.empty(), both = !w.agents.empty();
  for (const AgentState& a : w.agents) {
    const ContactState c = contact(a.hands, r.contact_points);
    one = one && (c.hands[0].grip || c.hands[1].grip);
    both = both && c.both_gripped();
  }
  r.contact_one_hand = one;
  r.contact_both_hands = both;
  r.all_gripped = both;
  return r;
}

SuccessDistance success_and_distance(std::span<const StepRecord> steps) {
  if (steps.empty()) fail(ErrorCode::kInvalidArgument, "empty trajectory");
  double min_d = std::numeric_limits<double>::infinity();
  for (const StepRecord& s : steps) min_d = std::min(min_d, s.target_distance);
  if (min_d <= kSuccessDistance) return {true, kSuccessDistance};
  return {false, steps.back().target_distance};
}

TransportWindow transport_window(std::span<const StepRecord> steps) {
  const int n = static_cast<int>(steps.size());
  TransportWindow w;
  int first = -1;
  for (int t = 0; t < n; ++t) {
    if (steps[t].all_gripped) {
      first = t;
      break;
    }
  }
  if (first < 0) return w;
  w.begin = first;
  w.end = n - 1;
  for (int t = first; t < n; ++t) {
    if (steps[t].target_distance < kPutdownDistance) {
      w.end = t;
      break;
    }
  }
  return w;
}

double cooperative_time_ratio(std::span<const StepRecord> steps, bool both_hands) {
  const TransportWindow w = transport_window(steps);
  if (w.size() == 0) return 0.0;
  int in_contact = 0;
  for (int t = w.begin; t <= w.end; ++t) {
    const StepRecord& s = steps[t];
    if (both_hands ? s.contact_both_hands : s.contact_one_hand) ++in_contact;
  }
  return static_cast<double>(in_contact) / w.size();
}

std::optional<double> mean_abs_jerk(std::span<const StepRecord> steps, double dt) {
  if (!(dt > 0.0)) fail(ErrorCode::kInvalidArgument, "jerk: dt must be positive");
  const TransportWindow w = transport_window(steps);
  if (w.size() < 4) return std::nullopt;
  const size_t n_points = steps[w.begin].contact_points.size();
  if (n_points == 0) return std::nullopt;
  double total = 0.0;
  long count = 0;
  for (int t = w.begin; t + 3 <= w.end; ++t) {
    const auto& p0 = steps[t].contact_points;
    const auto& p1 = steps[t + 1].contact_points;
    const auto& p2 = steps[t + 2].contact_points;
    const auto& p3 = steps[t + 3].contact_points;
    if (p1.size() != n_points || p2.size() != n_points || p3.size() != n_points) {
      fail(ErrorCode::kInvalidArgument, "jerk: contact point count changes");
    }
    for (size_t k = 0; k < n_points; ++k) {
      const Point3 d = (p3[k] - p0[k]) - (p2[k] - p1[k]) * 3.0;
      total += d.norm();
      ++count;
    }
  }
  return total / static_cast<double>(count) / (dt * dt * dt);
}

EpisodeMetrics compute_episode_metrics(std::span<const StepRecord> steps,
                                       double dt, bool both_hands) {
  EpisodeMetrics m;
  const SuccessDistance sd = success_and_distance(steps);
  m.success = sd.success;
  m.d_final = sd.d_final;
  m.t_coop = cooperative_time_ratio(steps, both_hands);
  m.jerk = mean_abs_jerk(steps, dt);
  return m;
}

std::vector<double> ZeroController::act(const Env& env) {
  return std::vector<double>(
      static_cast<size_t>(env.state().team_size()) * kActionDim, 0.0);
}

void RandomController::reset(const Env& env) {
  // Each episode gets its own action stream, fixed by the controller seed and
  // the episode seed.
  rng_.seed(seed_ ^ (env.config().seed * 0x9e3779b97f4a7c15ULL));
}

std::vector<double> RandomController::act(const Env& env) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> a(static_cast<size_t>(env.state().team_size()) * kActionDim);
  for (double& x : a) x = u(rng_);
  return a;
}

std::vector<double> PolicyController::act(const Env& env) {
  const std::vector<Observation> obs = env.observe_all();
  const ObsBatch batch = normalizer_->apply(ObsBatch::from(obs));
  const PolicyOutput out = model_->evaluate(batch);
  std::vector<double> a(static_cast<size_t>(out.mean.size()));
  for (int i = 0; i < out.mean.rows(); ++i) {
    for (int k = 0; k < out.mean.cols(); ++k) {
      a[static_cast<size_t>(i) * kActionDim + k] = out.mean(i, k);
    }
  }
  return a;
}

void OracleController::reset(const Env& env) {
  const WorldState& w = env.state();
  const TableGeometry& geom = env.geometry();
  const int n = w.team_size();
  const int nc = geom.sampling.size();

  // Slots at equal angles from the table origin, starting straight below.
  std::vector<Slot> slots(n);
  std::vector<int> slot_k(n);
  for (int k = 0; k < n; ++k) {
    const double phi = -std::numbers::pi / 2.0 + 2.0 * std::numbers::pi * k / n;
    const Point2 hit = ray_hit(geom.boundary, {0.0, 0.0}, unit_heading(phi));
    const NearestPoint np = nearest_perimeter_point(hit, geom.sampling);
    const Point2 normal = geom.sampling.inward_normals[np.index];
    slots[k].stand = geom.sampling.points[np.index] - normal * kGapTarget;
    slots[k].facing = std::atan2(normal.y, normal.x);
    slots[k].left = (np.index - 2 + nc) % nc;
    slots[k].right = (np.index + 2) % nc;
    slot_k[k] = np.index;
  }

  // Cyclic assignment in angular order that minimizes total angular travel.
  std::vector<double> alpha(n);
  for (int i = 0; i < n; ++i) {
    const Point2 p = w.table.pose.to_local(w.agents[i].root);
    alpha[i] = std::atan2(p.y, p.x);
  }
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return alpha[a] < alpha[b]; });
  std::vector<double> slot_angle(n);
  for (int k = 0; k < n; ++k) {
    slot_angle[k] = std::atan2(slots[k].stand.y, slots[k].stand.x);
  }
  std::vector<int> slot_order(n);
  for (int k = 0; k < n; ++k) slot_order[k] = k;
  std::stable_sort(slot_order.begin(), slot_order.end(),
                   [&](int a, int b) { return slot_angle[a] < slot_angle[b]; });
  int best_shift = 0;
  double best_cost = std::numeric_limits<double>::infinity();
  for (int s = 0; s < n; ++s) {
    double cost = 0.0;
    for (int j = 0; j < n; ++j) {
      cost += std::fabs(
          wrap_angle(slot_angle[slot_order[(j + s) % n]] - alpha[order[j]]));
    }
    if (cost < best_cost - 1e-12) {
      best_cost = cost;
      best_shift = s;
    }
  }
  slot_.assign(n, Slot{});
  slot_index_.assign(n, 0);
  for (int j = 0; j < n; ++j) {
    const int k = slot_order[(j + best_shift) % n];
    slot_[order[j]] = slots[k];
    slot_index_[order[j]] = slot_k[k];
  }
  phase_ = Phase::kApproach;
  carry_velocity_ = {};
}

void OracleController::advance_phase(const Env& env) {
  const WorldState& w = env.state();
  const TableGeometry& geom = env.geometry();
  const int n = w.team_size();
  const double rest_z = env.config().table.tabletop_height;
  switch (phase_) {
    case Phase::kApproach: {
      bool settled = true;
      for (int i = 0; i < n && settled; ++i) {
        const AgentState& a = w.agents[i];
        const Point2 s = w.table.pose.to_world(slot_[i].stand);
        const double heading = w.table.pose.yaw + slot_[i].facing;
        settled = (s - a.root).norm() < kSettleDistance &&
                  a.velocity.norm() < kSettleSpeed &&
                  std::fabs(wrap_angle(heading - a.heading)) < kSettleHeading;
      }
      if (settled) phase_ = Phase::kReach;
      break;
    }
    case Phase::kReach: {
      const std::vector<Point3> cps = contact_points_world(geom, w.table);
      bool placed = true;
      for (int i = 0; i < n && placed; ++i) {
        const AgentState& a = w.agents[i];
        placed = (a.hands[kLeft] - cps[slot_[i].left]).norm() < kHandTolerance &&
                 (a.hands[kRight] - cps[slot_[i].right]).norm() < kHandTolerance;
      }
      if (placed) phase_ = Phase::kLift;
      break;
    }
    case Phase::kLift: {
      bool still = w.table.z >= std::max(kLiftHeight - 0.02, rest_z + kLiftClearance);
      for (int i = 0; i < n && still; ++i) {
        still = w.agents[i].velocity.norm() < kCarrySettleSpeed;
      }
      if (still) phase_ = Phase::kCarry;
      break;
    }
    case Phase::kCarry:
      if ((w.table.pose.position - w.target).norm() < kPutdownDistance) {
        phase_ = Phase::kPutdown;
      }
      break;
    case Phase::kPutdown:
      break;
  }
}

std::vector<double> OracleController::act(const Env& env) {
  const WorldState& w = env.state();
  const int n = w.team_size();
  if (static_cast<int>(slot_.size()) != n) reset(env);
  advance_phase(env);

  const TableGeometry& geom = env.geometry();
  const double dt = env.config().dt;
  const double rest_z = env.config().table.tabletop_height;
  const Pose2& pose = w.table.pose;
  const bool carrying_phase = phase_ == Phase::kCarry || phase_ == Phase::kPutdown;

  Point2 next_carry = carry_velocity_;
  if (carrying_phase) {
    Point2 desired;
    if (phase_ == Phase::kCarry) {
      const Point2 to_target = w.target - pose.position;
      const double dist = to_target.norm();
      if (dist > 0.0) {
        desired = to_target * (std::min(kCarrySpeed, kCarryGain * dist) / dist);
      }
    }
    next_carry = carry_velocity_ + clamp_norm(desired - carry_velocity_, kCarryRamp * dt);
  }

  std::vector<double> actions(static_cast<size_t>(n) * kActionDim, 0.0);
  std::vector<Point2> new_root(n), new_velocity(n);
  std::vector<double> new_heading(n);
  for (int i = 0; i < n; ++i) {
    const AgentState& a = w.agents[i];
    double* out = &actions[static_cast<size_t>(i) * kActionDim];
    const Point2 stand = pose.to_world(slot_[i].stand);
    Point2 accel;
    if (carrying_phase) {
      accel = (next_carry - carry_velocity_) / dt + a.velocity * kDrag +
              (carry_velocity_ - a.velocity) * kVelocityGain +
              (stand - a.root) * kFormationGain;
    } else {
      const Point2 v_des = clamp_norm((stand - a.root) * kApproachGain, kApproachSpeed);
      accel = (v_des - a.velocity) * kVelocityGain + a.velocity * kDrag;
    }
    const Point2 local = rotate(accel, -a.heading) / kAccelGain;
    out[0] = clamp1(local.x);
    out[1] = clamp1(local.y);
    const double heading_goal = pose.yaw + slot_[i].facing;
    out[2] = clamp1(kTurnRate * wrap_angle(heading_goal - a.heading) / kTurnGain);

    new_velocity[i] = a.velocity +
        (rotate({kAccelGain * out[0], kAccelGain * out[1]}, a.heading) -
         a.velocity * kDrag) * dt;
    new_root[i] = a.root + new_velocity[i] * dt;
    new_heading[i] = wrap_angle(a.heading + kTurnGain * out[2] * dt);
  }

  if (phase_ == Phase::kApproach) {
    carry_velocity_ = next_carry;
    return actions;
  }

  // Table pose after this step, so the hands land on where the contact
  // points will be.
  TableState next_table = w.table;
  const bool table_moves = n >= env.config().required_lifters() &&
                           w.table.z >= rest_z + kLiftClearance &&
                           all_gripped(w, geom);
  if (table_moves) {
    Point2 mean_v;
    for (const Point2& v : new_velocity) mean_v += v;
    next_table.pose.position += mean_v / n * dt;
  }
  const std::vector<Point3> cps = contact_points_world(geom, next_table);

  for (int i = 0; i < n; ++i) {
    const AgentState& a = w.agents[i];
    double* out = &actions[static_cast<size_t>(i) * kActionDim];
    const int targets[2] = {slot_[i].left, slot_[i].right};
    for (int j = 0; j < 2; ++j) {
      const Point3 goal = cps[targets[j]];
      const Point2 offset = rotate(a.hands[j].xy() - a.root, -a.heading);
      const Point2 wanted = rotate(goal.xy() - new_root[i], -new_heading[i]);
      const Point2 cmd = (wanted - offset) / (kHandGain * dt);
      out[3 + 3 * j] = clamp1(cmd.x);
      out[4 + 3 * j] = clamp1(cmd.y);
      const double z = a.hands[j].z;
      double vz = 0.0;
      switch (phase_) {
        case Phase::kReach:
          vz = clamp1((w.table.z - z) / (kHandGain * dt));
          break;
        case Phase::kLift:
        case Phase::kCarry:
          vz = std::clamp((kLiftHeight - z) / (kHandGain * dt),
                          -kLiftRate / kHandGain, kLiftRate / kHandGain);
          break;
        case Phase::kPutdown:
          vz = std::clamp((kPutdownHandZ - z) / (kHandGain * dt),
                          -kLiftRate / kHandGain, kLiftRate / kHandGain);
          break;
        case Phase::kApproach:
          break;
      }
      out[5 + 3 * j] = vz;
    }
  }
  carry_velocity_ = next_carry;
  return actions;
}

TableSpec standard_table(TableShape shape) {
  switch (shape) {
    case TableShape::kRound: return TableSpec::round(2.0);
    case TableShape::kSquare: return TableSpec::square(1.6);
    case TableShape::kRectangle: return TableSpec::rectangle(2.0, 1.2);
    case TableShape::kPolygon: break;
  }
  fail(ErrorCode::kInvalidArgument, "no standard table for shape " + to_string(shape));
}

std::uint64_t episode_seed(std::uint64_t base, int team_size, TableShape shape,
                           int index) {
  std::uint64_t h = splitmix(base);
  h = splitmix(h ^ static_cast<std::uint64_t>(team_size));
  h = splitmix(h ^ static_cast<std::uint64_t>(static_cast<int>(shape)));
  return splitmix(h ^ static_cast<std::uint64_t>(index));
}

EpisodeRun run_episode(const EnvConfig& config, std::uint64_t seed,
                       Controller& controller, bool keep_trajectory,
                       bool both_hands) {
  EnvConfig cfg = config;
  cfg.seed = seed;
  Env env(cfg);
  env.reset(seed);
  controller.reset(env);

  EpisodeRun run;
  std::vector<StepRecord> records;
  records.reserve(static_cast<size_t>(cfg.episode_len) + 1);
  records.push_back(StepRecord::from(env.state(), env.geometry()));
  if (keep_trajectory) {
    run.trajectory.table = cfg.table;
    run.trajectory.dt = cfg.dt;
    run.trajectory.states.push_back(env.state());
  }
  while (!env.terminated()) {
    const std::vector<double> a = controller.act(env);
    env.step(a);
    if (env.termination_reason() == TerminationReason::kNonFinite) break;
    records.push_back(StepRecord::from(env.state(), env.geometry()));
    if (keep_trajectory) run.trajectory.states.push_back(env.state());
  }

  run.metrics = compute_episode_metrics(records, cfg.dt, both_hands);
  run.metrics.team_size = cfg.team_size;
  run.metrics.shape = cfg.table.shape;
  run.metrics.seed = seed;
  run.metrics.steps = env.state().step;
  run.metrics.termination = env.termination_reason();
  return run;
}

void EvalConfig::validate() const {
  if (team_sizes.empty()) fail(ErrorCode::kConfig, "eval: team_sizes is empty");
  for (int n : team_sizes) {
    if (n < 1 || n > kMaxTeamSize) {
      fail(ErrorCode::kConfig, "eval: team sizes must be in [1, 16]");
    }
  }
  if (shapes.empty()) fail(ErrorCode::kConfig, "eval: shapes is empty");
  for (TableShape s : shapes) {
    if (s == TableShape::kPolygon) {
      fail(ErrorCode::kConfig, "eval: polygon tables have no standard size");
    }
  }
  if (episodes < 1) fail(ErrorCode::kConfig, "eval: episodes must be positive");
}

AggregateRow aggregate(std::span<const EpisodeMetrics> episodes) {
  AggregateRow row;
  if (episodes.empty()) return row;
  row.team_size = episodes.front().team_size;
  row.shape = episodes.front().shape;
  row.episodes = static_cast<int>(episodes.size());
  double successes = 0.0, d = 0.0, t = 0.0, j = 0.0;
  for (const EpisodeMetrics& e : episodes) {
    successes += e.success ? 1.0 : 0.0;
    d += e.d_final;
    t += e.t_coop;
    if (e.jerk) {
      j += *e.jerk;
      ++row.jerk_episodes;
    }
  }
  const double count = static_cast<double>(episodes.size());
  row.success_rate = 100.0 * successes / count;
  row.mean_d = d / count;
  row.mean_t_coop = 100.0 * t / count;
  row.mean_jerk = row.jerk_episodes > 0 ? j / row.jerk_episodes
                                        : std::numeric_limits<double>::quiet_NaN();
  return row;
}

AggregateReport evaluate(const ControllerFactory& factory, const EvalConfig& config) {
  config.validate();
  struct Job {
    EnvConfig env;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (int n : config.team_sizes) {
    for (TableShape shape : config.shapes) {
      EnvConfig cfg = config.env;
      cfg.team_size = n;
      cfg.table = standard_table(shape);
      cfg.table.mass_scale = config.env.table.mass_scale;
      cfg.table.n_contact = config.env.table.n_contact;
      cfg.validate();
      for (int e = 0; e < config.episodes; ++e) {
        jobs.push_back({cfg, episode_seed(config.seed, n, shape, e)});
      }
    }
  }

  AggregateReport report;
  report.episodes.resize(jobs.size());
  parallel_for(static_cast<int>(jobs.size()), [&](int idx) {
    std::unique_ptr<Controller> controller = factory();
    try {
      report.episodes[idx] =
          run_episode(jobs[idx].env, jobs[idx].seed, *controller, false,
                      config.both_hands)
              .metrics;
    } catch (const Error& e) {
      throw Error(e.code(), std::string(e.what()) + " (episode seed " +
                                std::to_string(jobs[idx].seed) + ")");
    }
  });

  const size_t per_cell = static_cast<size_t>(config.episodes);
  for (size_t start = 0; start < report.episodes.size(); start += per_cell) {
    report.rows.push_back(aggregate(
        std::span<const EpisodeMetrics>(report.episodes).subspan(start, per_cell)));
  }
  return report;
}

std::string report_csv(const AggregateReport& report) {
  std::ostringstream os;
  os.precision(10);
  os << "team_size,shape,episodes,success_rate,mean_d,mean_t_coop,mean_jerk\n";
  for (const AggregateRow& r : report.rows) {
    os << r.team_size << ',' << to_string(r.shape) << ',' << r.episodes << ','
       << r.success_rate << ',' << r.mean_d << ',' << r.mean_t_coop << ',';
    if (std::isfinite(r.mean_jerk)) os << r.mean_jerk;
    os << '\n';
  }
  return os.str();
}

std::string report_json(const AggregateReport& report) {
  json rows = json::array();
  for (const AggregateRow& r : report.rows) {
    rows.push_back({{"team_size", r.team_size},
                    {"shape", to_string(r.shape)},
                    {"episodes", r.episodes},
                    {"success_rate", r.success_rate},
                    {"mean_d", r.mean_d},
                    {"mean_t_coop", r.mean_t_coop},
                    {"mean_jerk", number_or_null(r.mean_jerk)},
                    {"jerk_episodes", r.jerk_episodes}});
  }
  return json{{"rows", rows}}.dump(2) + "\n";
}

std::string episode_json(const EpisodeMetrics& e) {
  const json j{{"team_size", e.team_size},
               {"shape", to_string(e.shape)},
               {"seed", e.seed},
               {"success", e.success},
               {"d_final", e.d_final},
               {"t_coop", e.t_coop},
               {"jerk", e.jerk ? json(*e.jerk) : json(nullptr)},
               {"steps", e.steps},
               {"termination", to_string(e.termination)}};
  return j.dump();
}

std::string episodes_jsonl(const AggregateReport& report) {
  std::string out;
  for (const EpisodeMetrics& e : report.episodes) out += episode_json(e) + "\n";
  return out;
}

}  // namespace coopcarry
