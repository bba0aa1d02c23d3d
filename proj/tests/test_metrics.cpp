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
#include <random>
#include <vector>

#include "coopcarry/error.hpp"
#include "coopcarry/metrics.hpp"
#include "doctest.h"

using namespace coopcarry;

namespace {

std::vector<StepRecord> moving_points(int steps, double dt, auto position) {
  std::vector<StepRecord> out(steps);
  for (int k = 0; k < steps; ++k) {
    StepRecord& r = out[k];
    r.target_distance = 5.0;
    r.all_gripped = true;
    r.contact_one_hand = r.contact_both_hands = true;
    const double t = k * dt;
    for (int p = 0; p < 3; ++p) r.contact_points.push_back(position(t, p));
  }
  return out;
}

}  // namespace

TEST_CASE("success uses the closest approach") {
  std::vector<StepRecord> steps(5);
  const double d[] = {5.0, 2.0, 0.02, 0.5, 0.7};
  for (int k = 0; k < 5; ++k) steps[k].target_distance = d[k];
  SuccessDistance s = success_and_distance(steps);
  CHECK(s.success);
  CHECK(s.d_final == kSuccessDistance);

  steps[2].target_distance = 0.2;
  s = success_and_distance(steps);
  CHECK_FALSE(s.success);
  CHECK(s.d_final == 0.7);

  std::vector<StepRecord> still(10);
  for (StepRecord& r : still) r.target_distance = 5.0;
  s = success_and_distance(still);
  CHECK_FALSE(s.success);
  CHECK(s.d_final == 5.0);

  CHECK_THROWS_AS(success_and_distance(std::vector<StepRecord>{}), Error);
}

TEST_CASE("shrinking distances never undoes a success") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 0.5);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<StepRecord> steps(20);
    for (StepRecord& r : steps) r.target_distance = u(rng);
    const bool before = success_and_distance(steps).success;
    for (StepRecord& r : steps) r.target_distance *= 0.9;
    if (before) CHECK(success_and_distance(steps).success);
  }
}

TEST_CASE("cooperative time counts contact steps inside the window") {
  std::vector<StepRecord> steps(110);
  for (int k = 0; k < 110; ++k) {
    steps[k].target_distance = 4.0;
    steps[k].all_gripped = k >= 10;
    steps[k].contact_one_hand = k >= 10 && (k - 10) % 4 != 3;
  }
  const TransportWindow w = transport_window(steps);
  CHECK(w.begin == 10);
  CHECK(w.end == 109);
  CHECK(cooperative_time_ratio(steps) == doctest::Approx(0.75));
  CHECK(cooperative_time_ratio(steps, true) == 0.0);

  for (StepRecord& r : steps) r.all_gripped = false;
  CHECK(cooperative_time_ratio(steps) == 0.0);
  for (StepRecord& r : steps) r.all_gripped = r.contact_one_hand = true;
  CHECK(cooperative_time_ratio(steps) == 1.0);
}

TEST_CASE("the window closes at the putdown trigger") {
  std::vector<StepRecord> steps(50);
  for (int k = 0; k < 50; ++k) {
    steps[k].target_distance = k < 30 ? 1.0 : 0.01;
    steps[k].all_gripped = k >= 5;
    steps[k].contact_one_hand = k < 30;
  }
  const TransportWindow w = transport_window(steps);
  CHECK(w.begin == 5);
  CHECK(w.end == 30);
  CHECK(cooperative_time_ratio(steps) == doctest::Approx(25.0 / 26.0));
}

TEST_CASE("jerk of a cubic path is six") {
  const double dt = 1.0 / 30.0;
  const auto steps = moving_points(60, dt, [](double t, int p) {
    return Point3{t * t * t + p, 0.5 * p, 0.82};
  });
  const auto j = mean_abs_jerk(steps, dt);
  REQUIRE(j.has_value());
  CHECK(*j == doctest::Approx(6.0).epsilon(1e-6));
}

TEST_CASE("jerk vanishes for static and uniform motion") {
  const double dt = 1.0 / 30.0;
  const auto still = moving_points(40, dt, [](double, int p) { return Point3{1.0 * p, 2.0, 0.82}; });
  CHECK(*mean_abs_jerk(still, dt) == 0.0);
  const auto line = moving_points(40, dt, [](double t, int p) {
    return Point3{0.7 * t + p, -0.4 * t, 0.82};
  });
  CHECK(*mean_abs_jerk(line, dt) < 1e-9);
}

TEST_CASE("adding a constant velocity leaves jerk unchanged") {
  const double dt = 1.0 / 30.0;
  auto wobble = [](double t, int p) {
    return Point3{std::sin(3.0 * t) + p, std::cos(2.0 * t), 0.82 + 0.01 * t * t};
  };
  const auto a = moving_points(50, dt, wobble);
  const auto b = moving_points(50, dt, [&](double t, int p) {
    Point3 q = wobble(t, p);
    q.x += 1.3 * t;
    q.y -= 0.6 * t;
    return q;
  });
  CHECK(*mean_abs_jerk(a, dt) == doctest::Approx(*mean_abs_jerk(b, dt)).epsilon(1e-6));
}

TEST_CASE("jerk needs four window steps") {
  const double dt = 1.0 / 30.0;
  auto steps = moving_points(10, dt, [](double t, int) { return Point3{t, 0.0, 0.82}; });
  for (int k = 0; k < 7; ++k) steps[k].all_gripped = false;
  CHECK_FALSE(mean_abs_jerk(steps, dt).has_value());
}

TEST_CASE("oracle carries every standard table") {
  EvalConfig cfg;
  cfg.team_sizes = {2, 4, 8};
  cfg.episodes = 4;
  const AggregateReport rep =
      evaluate([] { return std::make_unique<OracleController>(); }, cfg);
  REQUIRE(rep.rows.size() == 9);
  for (const AggregateRow& r : rep.rows) {
    CHECK(r.success_rate == 100.0);
    CHECK(r.mean_d == kSuccessDistance);
    CHECK(r.mean_t_coop > 0.0);
    CHECK(r.mean_t_coop <= 100.0);
    CHECK(r.jerk_episodes == 4);
  }
}

TEST_CASE("heavy tables defeat small teams") {
  EvalConfig cfg;
  cfg.team_sizes = {2, 4, 8};
  cfg.shapes = {TableShape::kSquare};
  cfg.episodes = 3;
  cfg.env.table.mass_scale = 5.0;
  const AggregateReport rep =
      evaluate([] { return std::make_unique<OracleController>(); }, cfg);
  REQUIRE(rep.rows.size() == 3);
  CHECK(rep.rows[0].success_rate == 0.0);
  CHECK(rep.rows[1].success_rate == 100.0);
  CHECK(rep.rows[2].success_rate == 100.0);
}

TEST_CASE("zero actions never succeed and reports are reproducible") {
  EvalConfig cfg;
  cfg.team_sizes = {2};
  cfg.shapes = {TableShape::kRound};
  cfg.episodes = 5;
  cfg.env.episode_len = 60;
  auto factory = [] { return std::make_unique<ZeroController>(); };
  const AggregateReport a = evaluate(factory, cfg);
  const AggregateReport b = evaluate(factory, cfg);
  CHECK(a.rows[0].success_rate == 0.0);
  CHECK(a.rows[0].mean_t_coop == 0.0);
  CHECK(a.rows[0].jerk_episodes == 0);
  CHECK(std::isnan(a.rows[0].mean_jerk));
  double mean_target = 0.0;
  for (const EpisodeMetrics& e : a.episodes) {
    EnvConfig c = cfg.env;
    c.team_size = 2;
    c.table = standard_table(TableShape::kRound);
    Env probe(c);
    probe.reset(e.seed);
    mean_target += probe.state().target.norm() / a.episodes.size();
  }
  CHECK(a.rows[0].mean_d == doctest::Approx(mean_target));
  CHECK(report_csv(a) == report_csv(b));
  CHECK(report_json(a) == report_json(b));
  CHECK(episodes_jsonl(a) == episodes_jsonl(b));
}

TEST_CASE("report csv layout") {
  EvalConfig cfg;
  cfg.team_sizes = {2, 4};
  cfg.shapes = {TableShape::kSquare};
  cfg.episodes = 1;
  cfg.env.episode_len = 20;
  const AggregateReport rep =
      evaluate([] { return std::make_unique<RandomController>(3); }, cfg);
  const std::string csv = report_csv(rep);
  int lines = 0;
  for (char c : csv) lines += c == '\n';
  CHECK(lines == 3);
  CHECK(csv.rfind("team_size,shape,", 0) == 0);
}

TEST_CASE("eval config validation") {
  EvalConfig cfg;
  cfg.episodes = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = EvalConfig{};
  cfg.team_sizes = {};
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = EvalConfig{};
  cfg.team_sizes = {17};
  CHECK_THROWS_AS(cfg.validate(), Error);
}
