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


#include <cmath>
#include <numbers>
#include <random>

#include "coopcarry/error.hpp"
#include "coopcarry/rewards.hpp"
#include "doctest.h"

using namespace coopcarry;

namespace {

constexpr double kTol = 1e-9;
constexpr double kPi = std::numbers::pi;

std::vector<Point3> flat_contacts() {
  // Two contact points at table height, 0.5 m apart.
  return {{0.0, 0.25, 0.82}, {0.0, -0.25, 0.82}, {3.0, 3.0, 0.82}};
}

}  // namespace

TEST_CASE("angular spread") {
  const std::vector<Point2> opposite = {{1, 0}, {-1, 0}};
  CHECK(std::fabs(angular_spread(opposite, {}, 0, 2.0) - 1.0) < kTol);
  const std::vector<Point2> three = {{1, 0}, {0, 1}, {-1, 0}};
  CHECK(std::fabs(angular_spread(three, {}, 1, 2.0) - std::exp(-(kPi / 6) * (kPi / 6) * 2.0)) < kTol);
  CHECK(std::fabs(angular_spread(three, {}, 1, 2.0) - 0.5779) < 1e-4);
  const std::vector<Point2> solo = {{4, 1}};
  CHECK(angular_spread(solo, {}, 0, 2.0) == 1.0);
  std::vector<Point2> rotated;
  for (Point2 p : three) rotated.push_back(rotate(p, 0.7));
  CHECK(std::fabs(angular_spread(rotated, {}, 1, 2.0) - angular_spread(three, {}, 1, 2.0)) < kTol);
  const std::vector<Point2> at_center = {{0, 0}, {-1, 0}};
  CHECK(std::isfinite(angular_spread(at_center, {}, 0, 2.0)));
}

TEST_CASE("formation and walking terms") {
  CHECK(formation(1, 1) == 1.0);
  CHECK(formation(1, 0) == 0.25);
  CHECK(std::fabs(formation(0.5779, 0.375) - 0.4258) < 1e-4);

  CHECK(walk_position(0.3) == 1.0);
  CHECK(walk_position(0.5) == 1.0);
  CHECK(std::fabs(walk_position(1.3) - std::exp(-2.0)) < kTol);

  const Point2 u{1, 0};
  CHECK(walk_velocity({-1, 0}, u, 1.0) == 0.0);
  CHECK(walk_velocity({2, 0}, u, 1.0) == 1.0);
  CHECK(std::fabs(walk_velocity({1, 0}, u, 1.0) - std::exp(-0.5)) < kTol);
  CHECK(walk_velocity({0.1, 0}, u, 0.01) == 1.0);

  CHECK(walk_facing(u, u, {0, 1}, 0.5, false) == 1.0);
  CHECK(walk_facing({1, 0}, u, {0, 1}, 2.0, false) == 0.0);
  CHECK(walk_facing({0, -1}, u, {0, 1}, 2.0, true) == 1.0);
}

TEST_CASE("hand preparation") {
  const auto cps = flat_contacts();
  const std::array<Point3, 2> on = {cps[0], cps[1]};
  CHECK(std::fabs(hand_preparation(on, cps, true).hand - 1.0) < kTol);

  const std::array<Point3, 2> out = {Point3{-0.2, 0.25, 0.82}, Point3{-0.2, -0.25, 0.82}};
  const HandPreparation hp = hand_preparation(out, cps, true);
  CHECK(std::fabs(hp.prox - std::exp(-1.0)) < kTol);
  CHECK(std::fabs(hp.hand - std::exp(-1.0)) < kTol);

  const std::array<Point3, 2> above = {Point3{0, 0.25, 1.02}, cps[1]};
  CHECK(std::fabs(hand_preparation(above, cps, true).above - 0.5 * (std::exp(-3.0) + 1.0)) < kTol);
  CHECK(std::fabs(hand_preparation(above, cps, true).above - 0.5249) < 1e-4);

  CHECK(hand_preparation(on, cps, false).hand == 0.0);
}

TEST_CASE("contact and lift") {
  const auto cps = flat_contacts();
  const ContactState both = contact({cps[0], cps[1]}, cps);
  CHECK(both.r_contact == 1.0);
  CHECK(both.both_gripped());
  const ContactState half = contact({Point3{-0.03, 0.25, 0.82}, cps[1]}, cps);
  CHECK(std::fabs(half.r_contact - 0.5) < kTol);
  const ContactState none = contact({Point3{-0.06, 0.25, 0.82}, cps[1]}, cps);
  CHECK(none.r_contact == 0.0);
  CHECK_FALSE(none.hands[0].grip);

  ContactState lifted;
  lifted.hands[0] = {0, 0.0, 1.0, true, 0.94};
  lifted.hands[1] = {1, 0.0, 1.0, true, 0.94};
  CHECK(std::fabs(lift(lifted) - 1.0) < kTol);
  lifted.hands[1].grip = false;
  CHECK(std::fabs(lift(lifted) - 0.5) < kTol);
  lifted.hands[0].contact_z = lifted.hands[1].contact_z = 0.74;
  lifted.hands[1].grip = true;
  CHECK(std::fabs(lift(lifted) - std::exp(-1.0)) < kTol);
}

TEST_CASE("transport, alignment, putdown") {
  CHECK(transport({0, 0}, {2, 0}, false) == 0.0);
  CHECK(transport({1, 1}, {1, 1}, true) == 1.0);
  CHECK(std::fabs(transport({0, 0}, {2, 0}, true) - std::exp(-0.6)) < kTol);

  const std::vector<Point2> roots = {{-1, 0}, {1, 0}};
  const std::vector<Point2> facings = {{1, 0}, {0, 1}};
  CHECK(alignment(roots, facings, {0, 0}, {0.3, 0}, true) == 1.0);
  CHECK(std::fabs(alignment(roots, facings, {0, 0}, {3, 0}, true) - 1.0) < kTol);
  CHECK(alignment(roots, facings, {0, 0}, {3, 0}, false) == 0.0);
  CHECK(alignment(roots, facings, {0, 0}, {0, 0}, true) == 1.0);

  const auto cps = flat_contacts();
  const std::array<Point3, 2> away = {Point3{-1, 0, 0.65}, Point3{-1, 1, 0.65}};
  CHECK(std::fabs(putdown(away, contact(away, cps), {}).put - 1.0) < kTol);
  const std::array<Point3, 2> low = {Point3{0, 0.25, 0.65}, Point3{0, -0.25, 0.65}};
  CHECK(std::fabs(putdown(low, contact(low, cps), {}).put - 1.0) < kTol);
  const std::array<Point3, 2> high = {Point3{0, 0.25, 0.85}, Point3{0, -0.25, 0.85}};
  CHECK(std::fabs(putdown(high, contact(high, cps), {0.5, 0}).put - std::exp(-1.0)) < kTol);
}

TEST_CASE("total task reward") {
  RewardBreakdown ones;
  ones.walk_pos = ones.walk_vel = ones.walk_face = ones.ang = ones.cov = ones.form = 1;
  ones.hand.hand = ones.contact = ones.lift = ones.transport = ones.align = 1;
  ones.put.put = 1;
  CHECK(std::fabs(total_task(ones, {}) - 5.9) < kTol);
  CHECK(total_task(RewardBreakdown{}, {}) == 0.0);
  RewardBreakdown b;
  b.walk_face = 1.0;
  b.ang = 0.25;
  b.form = formation(0.25, 0.0);
  CHECK(std::fabs(total_task(b, {}) - 0.1375) < kTol);

  // Linear in an uncoupled component.
  RewardBreakdown c = ones;
  c.contact = 0.3;
  const double t1 = total_task(c, {});
  c.contact = 0.8;
  CHECK(std::fabs(total_task(c, {}) - t1 - 0.7 * 0.5) < kTol);
}

TEST_CASE("approach angle") {
  CHECK(std::fabs(approach_angle({2, 0}, {0, 0}, {1, 0}) - 1.0) < kTol);
  CHECK(std::fabs(approach_angle({-2, 0}, {0, 0}, {1, 0})) < kTol);
  CHECK(std::fabs(approach_angle({0, 2}, {0, 0}, {1, 0}) - 0.5) < kTol);
  CHECK_THROWS_AS(approach_angle({0, 0}, {0, 0}, {1, 0}), Error);
}

TEST_CASE("world-level rewards: bounds, gates and invariance") {
  const TableGeometry g = TableGeometry::build(TableSpec::rectangle(2.0, 1.2));
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-3.0, 3.0), z(0.3, 1.4), a(-kPi, kPi);
  for (int trial = 0; trial < 300; ++trial) {
    WorldState w;
    const int n = 1 + trial % 5;
    for (int i = 0; i < n; ++i) {
      AgentState s;
      s.root = {u(rng), u(rng)};
      s.heading = a(rng);
      s.velocity = {u(rng), u(rng)};
      s.hands = {Point3{u(rng) / 3, u(rng) / 3, z(rng)}, Point3{u(rng) / 3, u(rng) / 3, z(rng)}};
      w.agents.push_back(s);
    }
    w.table.pose = {{u(rng) * 0.1, u(rng) * 0.1}, a(rng)};
    w.table.z = 0.82 + 0.1 * std::fabs(u(rng));
    w.target = w.table.pose.position + Point2{u(rng) * 0.01, u(rng) * 0.01};
    for (Stage st : {Stage::kFormationOnly, Stage::kFullTask}) {
      const auto rs = compute_rewards(w, g, {}, st);
      const bool gripped = all_gripped(w, g);
      for (const RewardBreakdown& r : rs) {
        for (double v : {r.walk_pos, r.walk_vel, r.walk_face, r.ang, r.cov, r.form,
                         r.hand.hand, r.contact, r.lift, r.transport, r.align, r.put.put}) {
          CHECK(v >= 0.0);
          CHECK(v <= 1.0);
        }
        CHECK(r.task >= 0.0);
        CHECK(r.task <= 5.9 + 1e-12);
        if (!gripped) {
          CHECK(r.transport == 0.0);
          CHECK(r.align == 0.0);
        }
        if (st == Stage::kFormationOnly) {
          CHECK(r.transport == 0.0);
          CHECK(r.align == 0.0);
          CHECK(r.put.put == 0.0);
        }
      }
      // Planar rigid transform of the whole scene.
      const Pose2 T{{u(rng), u(rng)}, a(rng)};
      WorldState m = w;
      for (AgentState& s : m.agents) {
        s.root = T.to_world(s.root);
        s.heading += T.yaw;
        s.velocity = T.dir_to_world(s.velocity);
        for (Point3& h : s.hands) {
          const Point2 p = T.to_world(h.xy());
          h = {p.x, p.y, h.z};
        }
      }
      m.table.pose = {T.to_world(w.table.pose.position), w.table.pose.yaw + T.yaw};
      m.target = T.to_world(w.target);
      const auto rm = compute_rewards(m, g, {}, st);
      for (size_t i = 0; i < rs.size(); ++i) CHECK(std::fabs(rm[i].task - rs[i].task) < 1e-9);
    }
  }
}
