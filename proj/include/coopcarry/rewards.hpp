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

// Task rewards for cooperative carrying. Each component lies in [0, 1]; the
// aggregate r_task is a fixed weighted sum with three multiplicative
// couplings (facing x spread, hand x coverage, lift x coverage).

#ifndef COOPCARRY_REWARDS_HPP_
#define COOPCARRY_REWARDS_HPP_

#include <array>
#include <span>
#include <vector>

#include "coopcarry/geometry.hpp"
#include "coopcarry/world.hpp"

namespace coopcarry {

enum class Stage { kFormationOnly, kFullTask };

std::string to_string(Stage stage);
Stage stage_from_string(const std::string& name);

struct RewardWeights {
  double walk_pos = 0.2;
  double walk_vel = 0.4;
  double face_ang = 0.2;
  double form = 0.6;
  double hand_cov = 0.7;
  double contact = 0.7;
  double lift_cov = 0.7;
  double transport = 1.0;
  double align = 0.4;
  double put = 1.0;
  double k_theta = 2.0;  // angular-spread sharpness
};

inline constexpr double kGapTarget = 0.3;
inline constexpr double kNearTable = 1.0;
inline constexpr double kGripDistance = 0.04;
inline constexpr double kContactFalloff = 0.06;
inline constexpr double kLiftTarget = 0.94;
inline constexpr double kPutdownDistance = 0.03;
inline constexpr double kPutdownHandZ = 0.65;
inline constexpr double kReleaseDistance = 0.07;
inline constexpr double kAlignNear = 0.5;

struct HandContact {
  int index = 0;          // nearest contact point
  double distance = 0.0;  // 3D
  double gamma = 0.0;     // max(0, 1 - d / 0.06)
  bool grip = false;      // d < 0.04
  double contact_z = 0.0; // height of the assigned contact point
};

struct ContactState {
  std::array<HandContact, 2> hands;
  double r_contact = 0.0;

  bool both_gripped() const { return hands[0].grip && hands[1].grip; }
};

struct HandPreparation {
  double prox = 0.0, above = 0.0, sep = 0.0, same_z = 0.0;
  double hand = 0.0;  // product, zero outside the gate
};

struct PutdownTerms {
  double release = 0.0, vel = 0.0, put = 0.0;
};

struct RewardBreakdown {
  double walk_pos = 0.0, walk_vel = 0.0, walk_face = 0.0;
  double ang = 0.0, cov = 0.0, form = 0.0;
  HandPreparation hand;
  double contact = 0.0;
  double lift = 0.0;
  double transport = 0.0;
  double align = 0.0;
  PutdownTerms put;
  double task = 0.0;
};

double angular_spread(std::span<const Point2> roots, Point2 center, int i,
                      double k_theta);
double formation(double r_ang, double r_cov);
double walk_position(double d);
double walk_velocity(Point2 v, Point2 u_star, double delta_gap);
double walk_facing(Point2 f, Point2 u_star, Point2 c_star, double d,
                   bool transport_active);
HandPreparation hand_preparation(const std::array<Point3, 2>& hands,
                                 std::span<const Point3> contact_points,
                                 bool gate);
ContactState contact(const std::array<Point3, 2>& hands,
                     std::span<const Point3> contact_points);
double lift(const ContactState& c, double z_target = kLiftTarget);
double transport(Point2 x_obj, Point2 x_tar, bool all_gripped);
// Facing of the agent whose root is farthest from the target decides.
double alignment(std::span<const Point2> roots,
                 std::span<const Point2> facings, Point2 x_obj, Point2 x_tar,
                 bool all_gripped);
PutdownTerms putdown(const std::array<Point3, 2>& hands,
                     const ContactState& c, Point2 root_velocity);
double total_task(const RewardBreakdown& b, const RewardWeights& w);
// Throws when the agent or the designated point coincides with the object.
double approach_angle(Point2 x_root, Point2 x_obj, Point2 p_des);

// Every agent's breakdown for a world snapshot. Formation-only zeroes the
// transport, alignment and putdown rewards.
std::vector<RewardBreakdown> compute_rewards(const WorldState& world,
                                             const TableGeometry& geom,
                                             const RewardWeights& weights,
                                             Stage stage);

// True when every agent grips with both hands.
bool all_gripped(const WorldState& world, const TableGeometry& geom);

}  // namespace coopcarry

#endif  // COOPCARRY_REWARDS_HPP_
