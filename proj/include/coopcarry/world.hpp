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

#ifndef COOPCARRY_WORLD_HPP_
#define COOPCARRY_WORLD_HPP_

#include <array>
#include <span>
#include <vector>

#include "coopcarry/geometry.hpp"

namespace coopcarry {

inline constexpr int kLeft = 0;
inline constexpr int kRight = 1;
inline constexpr double kShoulderHeight = 1.3;
inline constexpr double kHandReach = 0.9;
inline constexpr double kHandMinZ = 0.3;
inline constexpr double kHandMaxZ = 1.4;
inline constexpr double kTableMaxZ = 1.2;

// Neutral hand offset in the heading frame: forward, lateral (+ left), height.
inline constexpr double kRestHandForward = 0.3;
inline constexpr double kRestHandLateral = 0.25;
inline constexpr double kRestHandHeight = 1.0;

struct AgentState {
  Point2 root;
  double heading = 0.0;
  Point2 velocity;
  double heading_rate = 0.0;
  std::array<Point3, 2> hands;  // world frame, [left, right]
  std::array<Point3, 2> hand_velocities;

  Point2 facing() const { return unit_heading(heading); }
  Point3 shoulder() const { return {root.x, root.y, kShoulderHeight}; }
};

struct TableState {
  Pose2 pose;
  double z = 0.82;
  Point2 velocity;
  double yaw_rate = 0.0;
  bool gripped = false;
};

// Single source of truth for reward evaluation and trajectory dumps.
struct WorldState {
  std::vector<AgentState> agents;
  TableState table;
  Point2 target;
  int step = 0;

  int team_size() const { return static_cast<int>(agents.size()); }
};

// Perimeter samples at the current table pose; z is the lower-edge height.
std::vector<Point3> contact_points_world(const TableGeometry& geom,
                                         const TableState& table);

struct NearestContact {
  int index = 0;
  Point3 point;
  double distance = 0.0;
};

NearestContact nearest_contact(Point3 hand, std::span<const Point3> points);

// Neutral hand placement for a root at the given heading, [left, right].
inline std::array<Point3, 2> rest_hands(Point2 root, double heading) {
  std::array<Point3, 2> out;
  for (int j = 0; j < 2; ++j) {
    const double side = j == kLeft ? 1.0 : -1.0;
    const Point2 p =
        root + rotate({kRestHandForward, side * kRestHandLateral}, heading);
    out[j] = {p.x, p.y, kRestHandHeight};
  }
  return out;
}

}  // namespace coopcarry

#endif  // COOPCARRY_WORLD_HPP_
