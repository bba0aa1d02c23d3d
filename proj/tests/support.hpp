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


// Helpers shared by the unit tests and the acceptance binary.

#ifndef COOPCARRY_TESTS_SUPPORT_HPP_
#define COOPCARRY_TESTS_SUPPORT_HPP_

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "coopcarry/autodiff.hpp"
#include "coopcarry/env.hpp"
#include "coopcarry/policy.hpp"
#include "coopcarry/style.hpp"
#include "coopcarry/train.hpp"

namespace coopcarry::testing {

inline Observation random_observation(std::mt19937_64& rng, int n_contact,
                                      int teammates, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Observation o;
  for (double& v : o.proprio) v = g(rng);
  o.object.resize(NetConfig::object_dim_for(n_contact));
  for (double& v : o.object) v = g(rng);
  for (double& v : o.target) v = g(rng);
  o.teammates.resize(static_cast<size_t>(teammates) * kTeammateDim);
  for (double& v : o.teammates) v = g(rng);
  return o;
}

inline NetConfig tiny_net(int n_contact = 8) {
  NetConfig c;
  c.d_model = 8;
  c.tokenizer_hidden = {12};
  c.stacks = 2;
  c.heads = 2;
  c.ff_width = 16;
  c.head_hidden = {16, 12};
  c.object_dim = NetConfig::object_dim_for(n_contact);
  return c;
}

// Scalar loss touching the actor mean, log-std and critic value.
inline double policy_probe_loss(const ActorCritic& ac, const ObsBatch& b,
                                const ad::Mat& actions, const ad::Mat& w_mean,
                                bool backward) {
  ad::Tape t;
  ad::Var mean = ac.mean(t, b);
  ad::Var lp = ad::gaussian_log_prob(mean, ac.log_std(t), actions);
  ad::Var v = ac.value(t, b);
  ad::Var l = ad::add(ad::add(ad::mean(lp), ad::mean(ad::square(v))),
                      ad::weighted_sum(mean, w_mean));
  if (backward) t.backward(l);
  return l.scalar();
}

// Copy of `o` with its teammate tokens reordered by a random permutation.
inline Observation permute_teammates(const Observation& o, std::mt19937_64& rng) {
  Observation p = o;
  std::vector<int> perm(o.teammate_count());
  for (size_t k = 0; k < perm.size(); ++k) perm[k] = static_cast<int>(k);
  std::shuffle(perm.begin(), perm.end(), rng);
  for (size_t k = 0; k < perm.size(); ++k) {
    std::copy_n(o.teammates.begin() + perm[k] * kTeammateDim, kTeammateDim,
                p.teammates.begin() + k * kTeammateDim);
  }
  return p;
}

// Largest change in mean, value and parameter gradients when the teammate
// tokens of a single observation are permuted.
inline double permutation_gap(ActorCritic& ac, const Observation& o, std::mt19937_64& rng) {
  const Observation p = permute_teammates(o, rng);
  const ObsBatch bo = ObsBatch::from(std::vector<Observation>{o});
  const ObsBatch bp = ObsBatch::from(std::vector<Observation>{p});
  const PolicyOutput a = ac.evaluate(bo), c = ac.evaluate(bp);
  double gap = (a.mean - c.mean).cwiseAbs().maxCoeff();
  gap = std::max(gap, std::fabs(a.value(0) - c.value(0)));

  const ad::Mat actions = ad::uniform_init(1, ac.config().action_dim, 1.0, rng);
  const ad::Mat w = ad::uniform_init(1, ac.config().action_dim, 1.0, rng);
  auto grads = [&](const ObsBatch& b) {
    ac.actor().params().zero_grad();
    ac.critic().params().zero_grad();
    policy_probe_loss(ac, b, actions, w, true);
    std::vector<ad::Mat> g;
    for (ad::ParamSet* ps : {&ac.actor().params(), &ac.critic().params()}) {
      for (const ad::Parameter& q : ps->items()) g.push_back(q.grad);
    }
    return g;
  };
  const auto ga = grads(bo), gp = grads(bp);
  for (size_t k = 0; k < ga.size(); ++k) {
    if (ga[k].size() == 0 && gp[k].size() == 0) continue;
    gap = std::max(gap, (ga[k] - gp[k]).cwiseAbs().maxCoeff());
  }
  return gap;
}

// A run small enough for a few iterations inside a unit test.
inline RunConfig tiny_run(std::uint64_t seed = 0) {
  RunConfig c = RunConfig::desk_preset();
  c.net = tiny_net();
  c.env.episode_len = 12;
  c.env.spawn_radius = 3.0;
  c.ppo.n_envs = 3;
  c.ppo.horizon = 8;
  c.ppo.minibatch = 16;
  c.ppo.epochs = 2;
  c.ppo.disc_hidden = {8};
  c.ppo.disc_batch = 16;
  c.seed = seed;
  c.iterations = 3;
  return c;
}

struct SeparableRun {
  int updates = 0;        // updates performed
  double accuracy = 0.0;  // on a held-out batch after the last update
  double first_loss = 0.0;
  double last_loss = 0.0;
};

// Reference rows sit on one side of a random hyperplane with margin, policy
// rows on the other. Trains until held-out accuracy reaches `target` or
// `max_updates` have run.
inline SeparableRun train_separable_discriminator(std::vector<int> hidden, int max_updates,
                                                  double target, std::uint64_t seed) {
  constexpr int kDim = 2 * kFullFeatureDim;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  ad::Vec w(kDim);
  for (int k = 0; k < kDim; ++k) w[k] = g(rng);
  w.normalize();
  auto batch = [&](int rows, double side) {
    ad::Mat m(rows, kDim);
    for (int i = 0; i < rows; ++i) {
      for (int k = 0; k < kDim; ++k) m(i, k) = g(rng);
      const double along = m.row(i).dot(w);
      m.row(i) += (side * (0.5 + std::fabs(along)) - along) * w.transpose();
    }
    return m;
  };
  Discriminator d(kDim, std::move(hidden), seed + 1);
  d.fit_normalizer(batch(512, 1.0));
  nn::Adam opt(d.params(), {1e-3, 0.9, 0.999, 1e-8, 0.0});
  const ad::Mat test_ref = batch(256, 1.0), test_pol = batch(256, -1.0);
  SeparableRun out;
  for (out.updates = 0; out.updates < max_updates;) {
    d.params().zero_grad();
    const double loss = d.loss_and_grad(batch(64, 1.0), batch(64, -1.0));
    opt.step();
    if (out.updates == 0) out.first_loss = loss;
    out.last_loss = loss;
    ++out.updates;
    out.accuracy = d.accuracy(test_ref, test_pol);
    if (out.accuracy >= target) break;
  }
  return out;
}

struct GradCheck {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  long checked = 0;
};

// Central differences over every scalar of `params`. `loss` must rebuild the
// forward pass from the current parameter values; `analytic` is the gradient
// snapshot taken before perturbation. The relative error uses
// |a - n| / max(|a|, |n|, floor).
inline GradCheck finite_difference_check(
    std::vector<ad::ParamSet*> params, const std::function<double()>& loss,
    double h = 1e-4, double floor = 1e-3) {
  GradCheck out;
  for (ad::ParamSet* ps : params) {
    for (ad::Parameter& p : ps->items()) {
      const ad::Mat analytic =
          p.grad.size() ? p.grad : ad::Mat::Zero(p.value.rows(), p.value.cols());
      for (Eigen::Index i = 0; i < p.value.size(); ++i) {
        const double keep = p.value.data()[i];
        p.value.data()[i] = keep + h;
        const double up = loss();
        p.value.data()[i] = keep - h;
        const double down = loss();
        p.value.data()[i] = keep;
        const double numeric = (up - down) / (2.0 * h);
        const double a = analytic.data()[i];
        const double err = std::fabs(a - numeric);
        out.max_abs_error = std::max(out.max_abs_error, err);
        out.max_rel_error = std::max(
            out.max_rel_error, err / std::max({std::fabs(a), std::fabs(numeric), floor}));
        ++out.checked;
      }
    }
  }
  return out;
}

// Extreme points by the O(n^3) edge test: (i, j) is a hull edge when every
// other point lies strictly left of i -> j. Returned sorted by (x, y).
inline std::vector<Point2> brute_force_hull(const std::vector<Point2>& pts) {
  std::vector<Point2> out;
  const size_t n = pts.size();
  auto orient = [](Point2 a, Point2 b, Point2 c) { return (b - a).cross(c - a); };
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      bool edge = true;
      for (size_t k = 0; k < n && edge; ++k) {
        if (k == i || k == j) continue;
        edge = orient(pts[i], pts[j], pts[k]) > 0.0;
      }
      if (edge) {
        out.push_back(pts[i]);
        out.push_back(pts[j]);
      }
    }
  }
  auto less = [](Point2 a, Point2 b) { return a.x < b.x || (a.x == b.x && a.y < b.y); };
  std::sort(out.begin(), out.end(), less);
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

// Support value max <p - c, u> by dense sampling of every hull edge.
inline double dense_support(const ConvexPolygon& poly, Point2 c, Point2 u,
                            int per_edge = 10000) {
  double best = -1e300;
  const auto& v = poly.vertices;
  const size_t m = v.size();
  const size_t edges = m == 1 ? 1 : (m == 2 ? 1 : m);
  for (size_t e = 0; e < edges; ++e) {
    const Point2 a = v[e], b = v[(e + 1) % m];
    for (int s = 0; s <= per_edge; ++s) {
      const Point2 p = a + (b - a) * (static_cast<double>(s) / per_edge);
      best = std::max(best, (p - c).dot(u));
    }
  }
  return best;
}

// Coverage recomputed from dense samples of the support hull and the table
// boundary, independent of the vertex-based implementation.
inline Coverage dense_coverage(const ConvexPolygon& support, const TableGeometry& geom,
                               int per_edge = 10000) {
  const PrincipalFrame& f = geom.frame;
  const ConvexPolygon boundary{geom.boundary, ConvexPolygon::Kind::kPolygon};
  auto extent = [&](Point2 u) { return dense_support(boundary, f.com, u, per_edge / 50); };
  Coverage c;
  c.d1_pos = dense_support(support, f.com, f.u1, per_edge);
  c.d1_neg = dense_support(support, f.com, -f.u1, per_edge);
  c.d2_pos = dense_support(support, f.com, f.u2, per_edge);
  c.d2_neg = dense_support(support, f.com, -f.u2, per_edge);
  auto g = [](double dp, double lp, double dn, double ln) {
    return std::clamp(std::min(std::max(0.0, dp) / lp, std::max(0.0, dn) / ln), 0.0, 1.0);
  };
  c.g1 = g(c.d1_pos, extent(f.u1), c.d1_neg, extent(-f.u1));
  c.g2 = g(c.d2_pos, extent(f.u2), c.d2_neg, extent(-f.u2));
  c.r_cov = 0.5 * (c.g1 + c.g2);
  return c;
}

}  // namespace coopcarry::testing

#endif  // COOPCARRY_TESTS_SUPPORT_HPP_
