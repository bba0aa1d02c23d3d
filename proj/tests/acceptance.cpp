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

// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero when any selected criterion fails.
//
//   acceptance            all criteria
//   acceptance 1 4 7      only the listed ones
//   acceptance --skip 11  everything except the listed ones

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "coopcarry/geometry.hpp"
#include "coopcarry/metrics.hpp"
#include "coopcarry/nn.hpp"
#include "coopcarry/policy.hpp"
#include "coopcarry/rewards.hpp"
#include "coopcarry/serialize.hpp"
#include "coopcarry/style.hpp"
#include "coopcarry/train.hpp"
#include "support.hpp"

using namespace coopcarry;

namespace {

constexpr double kPi = std::numbers::pi;

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) detail = what;
    pass = pass && ok;
  }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// -- 1 ---------------------------------------------------------------------------

Outcome reward_examples() {
  const std::vector<Point3> cps = {{0.0, 0.25, 0.82}, {0.0, -0.25, 0.82}, {3.0, 3.0, 0.82}};
  const std::vector<Point2> three = {{1, 0}, {0, 1}, {-1, 0}};
  const std::vector<Point2> opposite = {{1, 0}, {-1, 0}};
  const Point2 u{1, 0};
  const std::array<Point3, 2> on = {cps[0], cps[1]};
  const std::array<Point3, 2> out = {Point3{-0.2, 0.25, 0.82}, Point3{-0.2, -0.25, 0.82}};
  const std::array<Point3, 2> above = {Point3{0, 0.25, 1.02}, cps[1]};
  const std::array<Point3, 2> half = {Point3{-0.03, 0.25, 0.82}, cps[1]};
  const std::array<Point3, 2> high = {Point3{0, 0.25, 0.85}, Point3{0, -0.25, 0.85}};
  const std::array<Point3, 2> low = {Point3{0, 0.25, 0.65}, Point3{0, -0.25, 0.65}};
  ContactState lifted;
  lifted.hands[0] = {0, 0.0, 1.0, true, 0.94};
  lifted.hands[1] = {1, 0.0, 1.0, true, 0.94};
  ContactState sagging = lifted;
  sagging.hands[0].contact_z = sagging.hands[1].contact_z = 0.74;
  ContactState one_grip = lifted;
  one_grip.hands[1].grip = false;
  RewardBreakdown ones;
  ones.walk_pos = ones.walk_vel = ones.walk_face = ones.ang = ones.cov = ones.form = 1;
  ones.hand.hand = ones.contact = ones.lift = ones.transport = ones.align = 1;
  ones.put.put = 1;
  RewardBreakdown partial;
  partial.walk_face = 1.0;
  partial.ang = 0.25;
  partial.form = formation(0.25, 0.0);
  const std::vector<Point2> roots = {{-1, 0}, {1, 0}};
  const std::vector<Point2> facings = {{1, 0}, {0, 1}};

  const TableGeometry sq = TableGeometry::build(TableSpec::square(1.6));
  const std::vector<Point2> mids = {{0, -1.1}, {1.1, 0}, {0, 1.1}, {-1.1, 0}};
  const std::vector<Point2> bottom = {{-0.4, -1.1}, {0.4, -1.1}};

  struct Example {
    const char* name;
    double got, want;
  };
  const std::vector<Example> ex = {
      {"angular spread, opposite pair", angular_spread(opposite, {}, 0, 2.0), 1.0},
      {"angular spread, quarter gaps", angular_spread(three, {}, 1, 2.0),
       std::exp(-(kPi / 6) * (kPi / 6) * 2.0)},
      {"formation(1, 1)", formation(1, 1), 1.0},
      {"formation(1, 0)", formation(1, 0), 0.25},
      {"walk_pos(0.3)", walk_position(0.3), 1.0},
      {"walk_pos(0.5)", walk_position(0.5), 1.0},
      {"walk_pos(1.3)", walk_position(1.3), std::exp(-2.0)},
      {"walk_vel backwards", walk_velocity({-1, 0}, u, 1.0), 0.0},
      {"walk_vel saturated", walk_velocity({2, 0}, u, 1.0), 1.0},
      {"walk_vel 1 m/s at gap 1", walk_velocity({1, 0}, u, 1.0), std::exp(-0.5)},
      {"walk_face aligned", walk_facing(u, u, {0, 1}, 0.5, false), 1.0},
      {"hand prep on contacts", hand_preparation(on, cps, true).hand, 1.0},
      {"hand prep 0.2 m out", hand_preparation(out, cps, true).hand, std::exp(-1.0)},
      {"hand prep one hand high", hand_preparation(above, cps, true).above,
       0.5 * (std::exp(-3.0) + 1.0)},
      {"contact both hands", contact(on, cps).r_contact, 1.0},
      {"contact one hand half way", contact(half, cps).r_contact, 0.5},
      {"lift at target", lift(lifted), 1.0},
      {"lift one grip", lift(one_grip), 0.5},
      {"lift 0.2 m low", lift(sagging), std::exp(-1.0)},
      {"transport at 2 m", transport({0, 0}, {2, 0}, true), std::exp(-0.6)},
      {"transport ungripped", transport({0, 0}, {2, 0}, false), 0.0},
      {"alignment near target", alignment(roots, facings, {0, 0}, {0.3, 0}, true), 1.0},
      {"putdown released low", putdown(low, contact(low, cps), {}).put, 1.0},
      {"putdown still high", putdown(high, contact(high, cps), {0.5, 0}).put, std::exp(-1.0)},
      {"total task all ones", total_task(ones, {}), 5.9},
      {"total task partial", total_task(partial, {}), 0.1375},
      {"approach angle opposite", approach_angle({2, 0}, {0, 0}, {1, 0}), 1.0},
      {"approach angle side", approach_angle({0, 2}, {0, 0}, {1, 0}), 0.5},
      {"r_cov square midpoints", coverage_for_roots(mids, sq, {}).r_cov, 1.0},
      {"r_cov two on one edge", coverage_for_roots(bottom, sq, {}).r_cov, 0.375},
  };
  Outcome o;
  for (const Example& e : ex) {
    o.require(std::fabs(e.got - e.want) <= 1e-9,
              std::string(e.name) + fmt(": got %.12g", e.got) + fmt(" want %.12g", e.want));
  }
  if (o.pass) o.detail = std::to_string(ex.size()) + " worked examples within 1e-9";
  return o;
}

// -- 2 ---------------------------------------------------------------------------

Outcome coverage_oracle() {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> ang(-kPi, kPi), rad(0.9, 3.0), u(-6.0, 6.0);
  std::uniform_int_distribution<int> count(1, 8);
  const TableSpec specs[] = {TableSpec::round(2.0), TableSpec::square(1.6),
                             TableSpec::rectangle(2.0, 1.2)};
  Outcome o;
  double worst = 0.0, worst_rigid = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const TableGeometry g = TableGeometry::build(specs[trial % 3]);
    std::vector<Point2> roots(count(rng));
    for (Point2& r : roots) r = unit_heading(ang(rng)) * rad(rng);
    const Coverage got = coverage_for_roots(roots, g, {});
    const Coverage oracle = testing::dense_coverage(support_for_roots(roots, g, {}), g);
    worst = std::max(worst, std::fabs(got.r_cov - oracle.r_cov));

    const Pose2 pose{{u(rng), u(rng)}, ang(rng)};
    std::vector<Point2> moved;
    for (Point2 r : roots) moved.push_back(pose.to_world(r));
    worst_rigid = std::max(worst_rigid, std::fabs(coverage_for_roots(moved, g, pose).r_cov - got.r_cov));
  }
  o.require(worst < 1e-6, fmt("oracle gap %.3g", worst));
  o.require(worst_rigid < 1e-9, fmt("rigid-motion gap %.3g", worst_rigid));
  if (o.pass) {
    o.detail = "1000 configs, oracle gap " + fmt("%.2g", worst) + ", rigid gap " +
               fmt("%.2g", worst_rigid);
  }
  return o;
}

// -- 3 ---------------------------------------------------------------------------

Outcome hull_brute_force() {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_int_distribution<int> count(1, 50);
  Outcome o;
  auto less = [](Point2 a, Point2 b) { return a.x < b.x || (a.x == b.x && a.y < b.y); };
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<Point2> pts(count(rng));
    for (Point2& p : pts) p = {u(rng), u(rng)};
    std::vector<Point2> got = convex_hull(pts).vertices;
    std::sort(got.begin(), got.end(), less);
    std::vector<Point2> want = testing::brute_force_hull(pts);
    if (want.empty()) {
      // One or two points have no strict edges.
      std::vector<Point2> s = pts;
      std::sort(s.begin(), s.end(), less);
      s.erase(std::unique(s.begin(), s.end()), s.end());
      want = s.size() == 1 ? s : std::vector<Point2>{s.front(), s.back()};
    }
    o.require(got == want, "set " + std::to_string(trial) + " differs from brute force");
  }
  if (o.pass) o.detail = "1000 sets of 1..50 points";
  return o;
}

// -- 4 ---------------------------------------------------------------------------

Outcome principal_axes_check() {
  Outcome o;
  const auto rect = density_samples(TableSpec::rectangle(2.0, 1.2));
  const PrincipalAxes a = principal_axes(rect, planar_com(rect));
  const double angle = std::fabs(std::atan2(a.u1.y, a.u1.x));
  o.require(!a.isotropic && std::min(angle, kPi - angle) < 1e-9,
            fmt("rectangle long axis off by %.3g rad", angle));
  for (const TableSpec& spec : {TableSpec::square(1.6), TableSpec::round(2.0)}) {
    const auto s = density_samples(spec);
    const PrincipalAxes iso = principal_axes(s, planar_com(s));
    o.require(iso.isotropic && iso.u1 == Point2{1, 0} && iso.u2 == Point2{0, 1},
              to_string(spec.shape) + " did not take the isotropic tie-break");
  }
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> ang(-kPi, kPi);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const double th = ang(rng);
    std::vector<WeightedPoint> rot = rect;
    for (auto& s : rot) s.p = rotate(s.p, th);
    const PrincipalAxes r = principal_axes(rot, planar_com(rot));
    worst = std::max(worst, 1.0 - std::fabs(r.u1.dot(rotate(a.u1, th))));
  }
  o.require(worst < 1e-6, fmt("rotation equivariance gap %.3g", worst));
  if (o.pass) o.detail = "long axis, tie-break and 100 rotations" + fmt(" (gap %.2g)", worst);
  return o;
}

// -- 5 ---------------------------------------------------------------------------

Outcome permutation_invariance() {
  Outcome o;
  std::mt19937_64 rng(5);
  const NetConfig cfg = testing::tiny_net();
  ActorCritic ac(cfg, 5);
  double worst = 0.0;
  for (int n = 2; n <= 8; ++n) {
    for (int rep = 0; rep < 5; ++rep) {
      const Observation obs = testing::random_observation(rng, 8, n - 1);
      worst = std::max(worst, testing::permutation_gap(ac, obs, rng));
    }
  }
  o.require(worst < 1e-6, fmt("permutation gap %.3g", worst));
  for (int k = 0; k <= 15; ++k) {
    const ObsBatch b =
        ObsBatch::from(std::vector<Observation>{testing::random_observation(rng, 8, k)});
    const PolicyOutput out = ac.evaluate(b);
    o.require(out.mean.rows() == 1 && out.mean.cols() == kActionDim && out.value.size() == 1 &&
                  out.mean.allFinite() && out.value.allFinite(),
              "shape sweep failed at " + std::to_string(k) + " teammates");
  }
  if (o.pass) o.detail = "n = 2..8, gap " + fmt("%.2g", worst) + "; 0..15 teammates";
  return o;
}

// -- 6 ---------------------------------------------------------------------------

Outcome gradient_check() {
  Outcome o;
  // A 1e-6 step keeps central differences from straddling ReLU kinks.
  double worst = 0.0;
  long checked = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    const NetConfig cfg = testing::tiny_net();
    ActorCritic ac(cfg, seed);
    std::vector<Observation> obs;
    for (int i = 0; i < 3; ++i) obs.push_back(testing::random_observation(rng, 8, (i + seed) % 4));
    const ObsBatch b = ObsBatch::from(obs);
    const ad::Mat actions = ad::uniform_init(3, cfg.action_dim, 1.0, rng);
    const ad::Mat w = ad::uniform_init(3, cfg.action_dim, 1.0, rng);
    ac.actor().params().zero_grad();
    ac.critic().params().zero_grad();
    testing::policy_probe_loss(ac, b, actions, w, true);
    const auto r = testing::finite_difference_check(
        {&ac.actor().params(), &ac.critic().params()},
        [&] { return testing::policy_probe_loss(ac, b, actions, w, false); }, 1e-6);
    worst = std::max(worst, r.max_rel_error);
    checked += r.checked;
  }
  o.require(worst < 1e-4, fmt("max relative error %.3g", worst));
  if (o.pass) {
    o.detail = "20 seeds, " + std::to_string(checked) + " scalars, max rel error " +
               fmt("%.2g", worst);
  }
  return o;
}

// -- 7 ---------------------------------------------------------------------------

Outcome gae_oracle() {
  Outcome o;
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> len(1, 64);
  std::normal_distribution<double> g(0.0, 2.0);
  std::bernoulli_distribution cut(0.08);
  double worst = 0.0;
  for (int s = 0; s < 1000; ++s) {
    const int n = len(rng);
    std::vector<double> r(n), v(n);
    auto done = std::make_unique<bool[]>(n);
    for (int i = 0; i < n; ++i) {
      r[i] = g(rng);
      v[i] = g(rng);
      done[i] = cut(rng);
    }
    const double last = g(rng);
    const GaeResult fast = compute_gae(r, v, std::span<const bool>(done.get(), n), last, 0.99, 0.95);
    for (int t = 0; t < n; ++t) {
      double a = 0.0, weight = 1.0;
      for (int k = t; k < n; ++k) {
        const double next = k + 1 < n ? v[k + 1] : last;
        a += weight * (r[k] + (done[k] ? 0.0 : 0.99 * next) - v[k]);
        if (done[k]) break;
        weight *= 0.99 * 0.95;
      }
      worst = std::max(worst, std::fabs(a - fast.advantages[t]));
    }
  }
  o.require(worst < 1e-9, fmt("oracle gap %.3g", worst));
  const std::vector<double> r{1.0, 1.0}, v{0.0, 0.0};
  const bool d[] = {false, true};
  const double a0 = compute_gae(r, v, d, 0.0, 0.99, 0.95).advantages[0];
  o.require(std::fabs(a0 - 1.9405) < 1e-12, fmt("worked example A0 = %.12g", a0));
  if (o.pass) o.detail = "1000 sequences, gap " + fmt("%.2g", worst) + "; A0 = " + fmt("%.4f", a0);
  return o;
}

// -- 8 ---------------------------------------------------------------------------

Outcome team_size_normalization() {
  Outcome o;
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<int> size(2, 8);
  std::normal_distribution<double> g(0.0, 1.0);
  double worst_mean = 0.0, worst_std = 0.0;
  for (int batch = 0; batch < 50; ++batch) {
    std::vector<double> a;
    std::vector<int> n;
    for (int i = 0; i < 400; ++i) {
      n.push_back(size(rng));
      a.push_back(3.0 * n.back() + n.back() * n.back() * g(rng));
    }
    a.push_back(17.0);
    n.push_back(11);
    const auto groups = normalize_advantages_per_team_size(a, n);
    o.require(a.back() == 0.0, "single-element group not mapped to 0");
    for (const auto& [team, grp] : groups) {
      if (grp.indices.size() < 2) continue;
      double m = 0.0, var = 0.0;
      for (int i : grp.indices) m += a[i];
      m /= grp.indices.size();
      for (int i : grp.indices) var += (a[i] - m) * (a[i] - m);
      worst_mean = std::max(worst_mean, std::fabs(m));
      worst_std = std::max(worst_std, std::fabs(std::sqrt(var / grp.indices.size()) - 1.0));
    }
  }
  o.require(worst_mean < 1e-9, fmt("group mean %.3g", worst_mean));
  o.require(worst_std < 1e-6, fmt("group std off by %.3g", worst_std));

  std::vector<double> grouped{1.0, 3.0, 10.0, 30.0}, pooled = grouped;
  const std::vector<int> sizes{2, 2, 4, 4}, one(4, 2);
  normalize_advantages_per_team_size(grouped, sizes);
  normalize_advantages_per_team_size(pooled, one);
  double diff = 0.0;
  for (int i = 0; i < 4; ++i) diff = std::max(diff, std::fabs(grouped[i] - pooled[i]));
  o.require(std::fabs(grouped[0] + 1.0) < 1e-7 && std::fabs(grouped[3] - 1.0) < 1e-7,
            "constructed batch did not map to +-1");
  o.require(diff > 0.1, fmt("grouped and pooled differ by only %.3g", diff));
  if (o.pass) {
    o.detail = "mean " + fmt("%.2g", worst_mean) + ", std gap " + fmt("%.2g", worst_std) +
               ", pooled differs by " + fmt("%.3f", diff);
  }
  return o;
}

// -- 9 ---------------------------------------------------------------------------

Outcome masked_amp() {
  Outcome o;
  const double hi = std::fabs(blend(1.0, 0.0, 10.0) - 1.0);
  const double lo = std::fabs(blend(1.0, 0.0, -10.0));
  o.require(hi < 1e-4 && lo < 1e-4, fmt("blend endpoint error %.3g", std::max(hi, lo)));

  std::mt19937_64 rng(9);
  std::normal_distribution<double> g(0.0, 0.3);
  Discriminator d_mask(2 * kMaskedFeatureDim, {1024, 512}, 9);
  AgentState a;
  a.root = {0.3, -2.0};
  a.heading = 0.8;
  a.velocity = {1.2, 0.4};
  a.hands = rest_hands(a.root, a.heading);
  AgentState b = a;
  b.root += a.velocity * (1.0 / 30.0);
  auto score = [&](const AgentState& s0, const AgentState& s1) {
    const auto in = extract_transition(s0, s1).masked_input();
    ad::Mat m(1, 2 * kMaskedFeatureDim);
    for (int k = 0; k < 2 * kMaskedFeatureDim; ++k) m(0, k) = in[k];
    return d_mask.probabilities(m)[0];
  };
  const double base = score(a, b);
  for (int trial = 0; trial < 100; ++trial) {
    AgentState a2 = a, b2 = b;
    for (int j = 0; j < 2; ++j) {
      a2.hands[j] = a2.hands[j] + Point3{g(rng), g(rng), g(rng)};
      b2.hands[j] = b2.hands[j] + Point3{g(rng), g(rng), g(rng)};
      b2.hand_velocities[j] = Point3{g(rng), g(rng), g(rng)};
    }
    o.require(score(a2, b2) == base, "masked discriminator reacted to a hand-only change");
  }

  const auto t0 = std::chrono::steady_clock::now();
  const testing::SeparableRun run = testing::train_separable_discriminator({1024, 512}, 500, 0.95, 9);
  const double secs = seconds_since(t0);
  o.require(run.accuracy >= 0.95, fmt("accuracy %.3f after 500 updates", run.accuracy));
  o.require(secs < 120.0, fmt("discriminator training took %.1f s", secs));
  if (o.pass) {
    o.detail = "endpoints " + fmt("%.1e", std::max(hi, lo)) + ", mask exact, " +
               fmt("%.1f%%", 100.0 * run.accuracy) + " after " + std::to_string(run.updates) +
               " updates";
  }
  return o;
}

// -- 10 --------------------------------------------------------------------------

Outcome oracle_harness() {
  Outcome o;
  auto oracle = [] { return std::make_unique<OracleController>(); };
  EvalConfig cfg;
  cfg.team_sizes = {2, 4, 8};
  cfg.episodes = 100;
  const AggregateReport rep = evaluate(oracle, cfg);
  double min_coop = 100.0;
  for (const AggregateRow& r : rep.rows) {
    const std::string cell = "n=" + std::to_string(r.team_size) + " " + to_string(r.shape);
    o.require(r.success_rate == 100.0, cell + fmt(": SR %.1f%%", r.success_rate));
    o.require(std::fabs(r.mean_d - kSuccessDistance) < 1e-12, cell + fmt(": d %.4f", r.mean_d));
    min_coop = std::min(min_coop, r.mean_t_coop);
  }
  for (const EpisodeMetrics& e : rep.episodes) {
    o.require(e.t_coop >= 0.95, fmt("episode t_coop %.3f", e.t_coop));
    o.require(e.jerk.has_value() && std::isfinite(*e.jerk), "episode without a finite jerk");
  }

  EvalConfig heavy = cfg;
  heavy.env.table.mass_scale = 5.0;
  heavy.team_sizes = {2, 8};
  const AggregateReport h = evaluate(oracle, heavy);
  std::map<int, double> sr;
  std::map<int, int> cells;
  for (const AggregateRow& r : h.rows) {
    sr[r.team_size] += r.success_rate;
    cells[r.team_size] += 1;
  }
  o.require(sr[2] == 0.0, fmt("mass 5, n=2 SR %.1f%%", sr[2] / cells[2]));
  o.require(sr[8] == 100.0 * cells[8], fmt("mass 5, n=8 SR %.1f%%", sr[8] / cells[8]));
  if (o.pass) {
    o.detail = "9 cells x 100 episodes at SR 100%, min mean t_coop " + fmt("%.1f%%", min_coop) +
               "; mass 5: n=2 0%, n=8 100%";
  }
  return o;
}

// -- 11 --------------------------------------------------------------------------

// Mean task return over the team sizes that finished episodes this iteration,
// present only when every size did.
std::optional<double> fresh_mean_return(const IterationStats& s) {
  double sum = 0.0;
  for (const TeamSizeStats& t : s.per_team_size) {
    if (t.episodes == 0) return std::nullopt;
    sum += t.mean_task_return;
  }
  return sum / static_cast<double>(s.per_team_size.size());
}

Outcome learning_signal() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  std::string detail;
  for (std::uint64_t seed : {0, 1, 2}) {
    RunConfig cfg = RunConfig::desk_preset();
    cfg.seed = seed;
    cfg.iterations = 300;
    const double baseline = random_policy_task_return(cfg, 4);
    Trainer trainer(cfg);
    int hit = -1;
    double best = 0.0;
    for (int it = 0; it < cfg.iterations && hit < 0; ++it) {
      const auto r = trainer.iterate();
      if (const auto m = fresh_mean_return(r)) {
        best = std::max(best, *m / baseline);
        if (*m >= 2.0 * baseline) hit = it;
      }
    }
    o.require(hit >= 0, "seed " + std::to_string(seed) + fmt(" peaked at %.2fx random", best));
    detail += (detail.empty() ? "" : ", ") + std::string("seed ") + std::to_string(seed) +
              (hit >= 0 ? " 2x at iter " + std::to_string(hit) : " failed");
    std::fflush(stdout);
  }
  const double secs = seconds_since(t0);
  o.require(secs < 1200.0, fmt("took %.0f s", secs));
  if (o.pass) o.detail = detail + fmt(" (%.0f s total)", secs);
  return o;
}

// -- 12 --------------------------------------------------------------------------

Outcome metric_oracles() {
  Outcome o;
  std::vector<StepRecord> steps(100);
  for (int k = 0; k < 100; ++k) {
    steps[k].target_distance = 4.0;
    steps[k].all_gripped = true;
    steps[k].contact_one_hand = k % 4 != 3;
  }
  const double coop = cooperative_time_ratio(steps);
  o.require(std::fabs(coop - 0.75) < 1e-9, fmt("t_coop %.12g", coop));

  const double dt = 1.0 / 30.0;
  auto path = [&](auto position) {
    std::vector<StepRecord> out(90);
    for (int k = 0; k < 90; ++k) {
      out[k].target_distance = 4.0;
      out[k].all_gripped = true;
      out[k].contact_points = {position(k * dt)};
    }
    return out;
  };
  const double cubic = *mean_abs_jerk(path([](double t) { return Point3{t * t * t, 0.0, 0.82}; }), dt);
  const double line =
      *mean_abs_jerk(path([](double t) { return Point3{1.5 * t, -0.5 * t, 0.82}; }), dt);
  o.require(std::fabs(cubic - 6.0) < 1e-9, fmt("cubic jerk %.12g", cubic));
  o.require(std::fabs(line) < 1e-9, fmt("uniform-motion jerk %.3g", line));
  if (o.pass) {
    o.detail = fmt("t_coop %.12g", coop) + fmt(", cubic |J| %.12g", cubic) +
               fmt(", uniform |J| %.2g", line);
  }
  return o;
}

struct Criterion {
  int id;
  const char* name;
  double budget_s;  // wall-clock limit; 0 means none beyond the check itself
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all = {
      {1, "reward formula exactness", 1.0, reward_examples},
      {2, "coverage oracle and rigid invariance", 30.0, coverage_oracle},
      {3, "convex hull vs brute force", 10.0, hull_brute_force},
      {4, "principal axes", 0.0, principal_axes_check},
      {5, "policy permutation invariance", 0.0, permutation_invariance},
      {6, "full-stack gradient check", 60.0, gradient_check},
      {7, "GAE vs naive oracle", 0.0, gae_oracle},
      {8, "team-size advantage normalization", 0.0, team_size_normalization},
      {9, "masked AMP machinery", 0.0, masked_amp},
      {10, "oracle controller harness", 300.0, oracle_harness},
      {11, "desk-scale learning signal", 0.0, learning_signal},
      {12, "metric oracles", 0.0, metric_oracles},
  };
  std::set<int> picked, skipped;
  bool skip_mode = false;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--skip") {
      skip_mode = true;
    } else {
      (skip_mode ? skipped : picked).insert(std::atoi(a.c_str()));
    }
  }
  int failures = 0;
  for (const Criterion& c : all) {
    if (!picked.empty() && !picked.count(c.id)) continue;
    if (skipped.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out.pass = false;
      out.detail = std::string("exception: ") + e.what();
    }
    const double secs = seconds_since(t0);
    if (c.budget_s > 0.0 && secs >= c.budget_s) {
      out.pass = false;
      out.detail += fmt(" [over the %.0f s budget]", c.budget_s);
    }
    failures += out.pass ? 0 : 1;
    std::printf("%s  %2d  %-38s %8.2f s  %s\n", out.pass ? "PASS" : "FAIL", c.id, c.name, secs,
                out.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
