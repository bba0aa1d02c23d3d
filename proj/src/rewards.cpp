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

#include "coopcarry/rewards.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "coopcarry/error.hpp"

namespace coopcarry {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
// Squared-gap band; the slack keeps d = 0.5 inside despite rounding of
// (0.5 - 0.3)^2.
constexpr double kGapBand = 0.04 + 1e-12;

double relu(double x) { return std::max(0.0, x); }

// Angle in [0, 2pi) measured counterclockwise from a to b.
double ccw_gap(double a, double b) {
  double g = std::fmod(b - a, kTwoPi);
  if (g < 0.0) g += kTwoPi;
  return g;
}

}  // namespace

std::string to_string(Stage stage) {
  return stage == Stage::kFormationOnly ? "formation-only" : "full-task";
}

Stage stage_from_string(const std::string& name) {
  if (name == "formation-only") return Stage::kFormationOnly;
  if (name == "full-task") return Stage::kFullTask;
  fail(ErrorCode::kInvalidArgument, "unknown stage '" + name + "'");
}

std::vector<Point3> contact_points_world(const TableGeometry& geom,
                                         const TableState& table) {
  std::vector<Point3> out;
  out.reserve(geom.sampling.points.size());
  for (const Point2& p : geom.sampling.points) {
    const Point2 w = table.pose.to_world(p);
    out.push_back({w.x, w.y, table.z});
  }
  return out;
}

NearestContact nearest_contact(Point3 hand, std::span<const Point3> points) {
  NearestContact best;
  double best_d = std::numeric_limits<double>::infinity();
  for (size_t k = 0; k < points.size(); ++k) {
    const double d = (hand - points[k]).norm();
    if (d < best_d) {
      best_d = d;
      best.index = static_cast<int>(k);
    }
  }
  best.point = points[best.index];
  best.distance = best_d;
  return best;
}

double angular_spread(std::span<const Point2> roots, Point2 center, int i,
                      double k_theta) {
  const int m = static_cast<int>(roots.size());
  if (m < 1 || i < 0 || i >= m) {
    fail(ErrorCode::kInvalidArgument, "angular_spread: bad agent index");
  }
  if (m == 1) return 1.0;
  auto polar = [&](Point2 p) {
    const Point2 d = p - center;
    return (d.x == 0.0 && d.y == 0.0) ? 0.0 : std::atan2(d.y, d.x);
  };
  const double phi_i = polar(roots[i]);
  double gap_ccw = kTwoPi, gap_cw = kTwoPi;
  for (int j = 0; j < m; ++j) {
    if (j == i) continue;
    const double phi_j = polar(roots[j]);
    gap_ccw = std::min(gap_ccw, ccw_gap(phi_i, phi_j));
    gap_cw = std::min(gap_cw, ccw_gap(phi_j, phi_i));
  }
  const double ideal = kTwoPi / m;
  const double e_ccw = gap_ccw - ideal, e_cw = gap_cw - ideal;
  return std::exp(-k_theta * 0.5 * (e_ccw * e_ccw + e_cw * e_cw));
}

double formation(double r_ang, double r_cov) {
  return 0.25 * r_ang + 0.75 * r_cov;
}

double walk_position(double d) {
  const double delta = (d - kGapTarget) * (d - kGapTarget);
  return delta <= kGapBand ? 1.0 : std::exp(-2.0 * delta);
}

double walk_velocity(Point2 v, Point2 u_star, double delta_gap) {
  const double s = u_star.dot(v);
  if (s <= 0.0) return 0.0;
  if (delta_gap <= kGapBand) return 1.0;
  const double dev = relu(1.5 - s) + relu(s - 2.5);
  return std::exp(-2.0 * dev * dev);
}

double walk_facing(Point2 f, Point2 u_star, Point2 c_star, double d,
                   bool transport_active) {
  if (transport_active) return 1.0;
  return d <= kNearTable ? relu(u_star.dot(f)) : relu(c_star.dot(f));
}

HandPreparation hand_preparation(const std::array<Point3, 2>& hands,
                                 std::span<const Point3> contact_points,
                                 bool gate) {
  HandPreparation out;
  for (const Point3& h : hands) {
    const NearestContact nc = nearest_contact(h, contact_points);
    out.prox += 0.5 * std::exp(-5.0 * nc.distance);
    // Coincident hand: direction undefined, scored as level.
    const double cos_theta =
        nc.distance > 0.0 ? (h.z - nc.point.z) / nc.distance : 0.0;
    out.above += 0.5 * (cos_theta > 0.0 ? std::exp(-3.0 * cos_theta) : 1.0);
  }
  const double d_xy = (hands[kLeft].xy() - hands[kRight].xy()).norm();
  const double dev = relu(0.4 - d_xy) + relu(d_xy - 0.6);
  out.sep = std::exp(-5.0 * dev * dev);
  const double dz = hands[kLeft].z - hands[kRight].z;
  out.same_z = std::exp(-20.0 * dz * dz);
  out.hand = gate ? out.prox * out.above * out.sep * out.same_z : 0.0;
  return out;
}

ContactState contact(const std::array<Point3, 2>& hands,
                     std::span<const Point3> contact_points) {
  ContactState c;
  for (int j = 0; j < 2; ++j) {
    const NearestContact nc = nearest_contact(hands[j], contact_points);
    HandContact& hc = c.hands[j];
    hc.index = nc.index;
    hc.distance = nc.distance;
    hc.gamma = relu(1.0 - nc.distance / kContactFalloff);
    hc.grip = nc.distance < kGripDistance;
    hc.contact_z = nc.point.z;
  }
  c.r_contact = std::min(c.hands[0].gamma, c.hands[1].gamma);
  return c;
}

double lift(const ContactState& c, double z_target) {
  double r = 0.0;
  for (const HandContact& h : c.hands) {
    if (h.grip) r += 0.5 * std::exp(-5.0 * std::abs(h.contact_z - z_target));
  }
  return r;
}

double transport(Point2 x_obj, Point2 x_tar, bool all_gripped) {
  if (!all_gripped) return 0.0;
  return std::exp(-0.15 * (x_tar - x_obj).squared_norm());
}

double alignment(std::span<const Point2> roots,
                 std::span<const Point2> facings, Point2 x_obj, Point2 x_tar,
                 bool all_gripped) {
  if (!all_gripped) return 0.0;
  const Point2 to_target = x_tar - x_obj;
  const double dist = to_target.norm();
  if (dist < kAlignNear) return 1.0;
  size_t farthest = 0;
  double far_d = -1.0;
  for (size_t i = 0; i < roots.size(); ++i) {
    const double d = (x_tar - roots[i]).norm();
    if (d > far_d) {
      far_d = d;
      farthest = i;
    }
  }
  return relu((to_target / dist).dot(facings[farthest]));
}

PutdownTerms putdown(const std::array<Point3, 2>& hands, const ContactState& c,
                     Point2 root_velocity) {
  PutdownTerms t;
  if (c.hands[0].distance > kReleaseDistance &&
      c.hands[1].distance > kReleaseDistance) {
    t.release = 1.0;
  } else {
    t.release = std::min(std::exp(-5.0 * std::abs(hands[0].z - kPutdownHandZ)),
                         std::exp(-5.0 * std::abs(hands[1].z - kPutdownHandZ)));
  }
  t.vel = std::exp(-2.0 * root_velocity.norm());
  t.put = 0.8 * t.release + 0.2 * t.vel;
  return t;
}

double total_task(const RewardBreakdown& b, const RewardWeights& w) {
  return w.walk_pos * b.walk_pos + w.walk_vel * b.walk_vel +
         w.face_ang * std::sqrt(b.walk_face * b.ang) + w.form * b.form +
         w.hand_cov * (b.hand.hand * b.cov) + w.contact * b.contact +
         w.lift_cov * (b.lift * b.cov) + w.transport * b.transport +
         w.align * b.align + w.put * b.put.put;
}

double approach_angle(Point2 x_root, Point2 x_obj, Point2 p_des) {
  const Point2 a = x_root - x_obj, p = p_des - x_obj;
  if (a.norm() == 0.0 || p.norm() == 0.0) {
    fail(ErrorCode::kInvalidArgument,
         "approach_angle: agent or designated point coincides with object");
  }
  return ((a / a.norm()).dot(p / p.norm()) + 1.0) / 2.0;
}

bool all_gripped(const WorldState& world, const TableGeometry& geom) {
  const std::vector<Point3> cps = contact_points_world(geom, world.table);
  for (const AgentState& a : world.agents) {
    if (!contact(a.hands, cps).both_gripped()) return false;
  }
  return !world.agents.empty();
}

std::vector<RewardBreakdown> compute_rewards(const WorldState& world,
                                             const TableGeometry& geom,
                                             const RewardWeights& weights,
                                             Stage stage) {
  const int n = world.team_size();
  const Pose2& pose = world.table.pose;
  const std::vector<Point3> cps = contact_points_world(geom, world.table);

  std::vector<Point2> roots(n), facings(n);
  std::vector<ContactState> contacts(n);
  bool gripped = n > 0;
  for (int i = 0; i < n; ++i) {
    roots[i] = world.agents[i].root;
    facings[i] = world.agents[i].facing();
    contacts[i] = contact(world.agents[i].hands, cps);
    gripped = gripped && contacts[i].both_gripped();
  }

  const Coverage cov = coverage_for_roots(roots, geom, pose);
  const Point2 x_obj = pose.position;
  const double target_dist = (world.target - x_obj).norm();
  const bool putdown_active = target_dist < kPutdownDistance;
  const bool full = stage == Stage::kFullTask;

  std::vector<RewardBreakdown> out(n);
  for (int i = 0; i < n; ++i) {
    const AgentState& a = world.agents[i];
    RewardBreakdown& b = out[i];
    const NearestPoint np =
        nearest_perimeter_point(pose.to_local(a.root), geom.sampling);
    const Point2 u_star = pose.dir_to_world(np.normal);
    const double d = np.distance;
    const double delta_gap = (d - kGapTarget) * (d - kGapTarget);
    const Point2 to_center = x_obj - a.root;
    const double center_dist = to_center.norm();
    const Point2 c_star =
        center_dist > 0.0 ? to_center / center_dist : Point2{};
    const bool near = d <= kNearTable;

    b.walk_pos = walk_position(d);
    b.walk_vel = walk_velocity(a.velocity, u_star, delta_gap);
    b.walk_face = walk_facing(facings[i], u_star, c_star, d, gripped);
    b.ang = angular_spread(roots, x_obj, i, weights.k_theta);
    b.cov = cov.r_cov;
    b.form = formation(b.ang, b.cov);
    b.hand = hand_preparation(a.hands, cps, near);
    b.contact = near ? contacts[i].r_contact : 0.0;
    b.lift = near ? lift(contacts[i]) : 0.0;
    if (full) {
      b.transport = transport(x_obj, world.target, gripped);
      b.align = alignment(roots, facings, x_obj, world.target, gripped);
      if (putdown_active) b.put = putdown(a.hands, contacts[i], a.velocity);
    }
    b.task = total_task(b, weights);
  }
  return out;
}

}  // namespace coopcarry
