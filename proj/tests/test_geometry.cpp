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
#include "coopcarry/geometry.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace coopcarry;
using doctest::Approx;

namespace {

constexpr double kPi = std::numbers::pi;

double sampled_perimeter(const PerimeterSampling& s) {
  double total = 0.0;
  for (int k = 0; k < s.size(); ++k) {
    total += (s.points[(k + 1) % s.size()] - s.points[k]).norm();
  }
  return total;
}

}  // namespace

TEST_CASE("perimeter sampling spacing and normals") {
  const PerimeterSampling round = sample_perimeter(TableSpec::round(2.0));
  CHECK(round.size() == 64);
  CHECK(round.arc_spacing == Approx(2.0 * kPi / 64).epsilon(1e-12));
  for (int k = 0; k < round.size(); ++k) {
    const Point2 expected = -round.points[k] / round.points[k].norm();
    CHECK((round.inward_normals[k] - expected).norm() < 1e-12);
  }
  CHECK(round.points[0].x == Approx(1.0));
  CHECK(round.points[0].y == Approx(0.0));

  const PerimeterSampling sq = sample_perimeter(TableSpec::square(1.6));
  CHECK(sq.arc_spacing == Approx(0.1).epsilon(1e-12));
  CHECK(sq.points[0].x == Approx(-0.8));
  CHECK(sq.points[0].y == Approx(-0.8));
  CHECK(sq.points[1].x == Approx(-0.7));
  CHECK(std::fabs(sampled_perimeter(sq) - 6.4) < 1e-9 * 6.4);
  for (int k = 0; k < sq.size(); ++k) {
    CHECK(sq.inward_normals[k].norm() == Approx(1.0).epsilon(1e-12));
    // Inward: stepping along the normal moves toward the center.
    CHECK((sq.points[k] + sq.inward_normals[k] * 0.01).norm() < sq.points[k].norm());
  }

  const PerimeterSampling rect = sample_perimeter(TableSpec::rectangle(2.0, 1.2));
  CHECK(std::fabs(sampled_perimeter(rect) - 6.4) < 1e-9 * 6.4);
  for (int k = 0; k < rect.size(); ++k) {
    const double step = (rect.points[(k + 1) % 64] - rect.points[k]).norm();
    // Corners shorten the chord; straight runs are exact.
    CHECK(step <= 0.1 + 1e-12);
  }
}

TEST_CASE("polygon tables") {
  const TableSpec hex = TableSpec::polygon(
      {{1, 0}, {0.5, 0.8}, {-0.5, 0.8}, {-1, 0}, {-0.5, -0.8}, {0.5, -0.8}});
  const TableGeometry g = TableGeometry::build(hex);
  CHECK(g.sampling.size() == 64);
  CHECK(hull_contains(g.boundary_hull, g.frame.com));

  const TableSpec bowtie = TableSpec::polygon({{0, 0}, {1, 1}, {1, 0}, {0, 1}});
  CHECK_THROWS_AS(sample_perimeter(bowtie), Error);
  TableSpec few = TableSpec::square(1.0);
  few.n_contact = 4;
  CHECK_THROWS_AS(validate(few), Error);
}

TEST_CASE("convex hull basics and brute-force agreement") {
  const std::vector<Point2> sq = {{0, 0}, {1, 0}, {1, 1}, {0, 1}, {0.5, 0.5}};
  const ConvexPolygon h = convex_hull(sq);
  CHECK(h.kind == ConvexPolygon::Kind::kPolygon);
  CHECK(h.vertices.size() == 4);
  CHECK(h.signed_area() == Approx(1.0));

  const std::vector<Point2> line = {{0, 0}, {1, 1}, {2, 2}};
  const ConvexPolygon seg = convex_hull(line);
  CHECK(seg.kind == ConvexPolygon::Kind::kSegment);
  CHECK(seg.vertices.front() == Point2{0, 0});
  CHECK(seg.vertices.back() == Point2{2, 2});

  const std::vector<Point2> one = {{3, 4}};
  CHECK(convex_hull(one).kind == ConvexPolygon::Kind::kPoint);
  CHECK_THROWS_AS(convex_hull(std::vector<Point2>{}), Error);

  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Point2> pts(3 + trial % 48);
    for (Point2& p : pts) p = {u(rng), u(rng)};
    const ConvexPolygon hull = convex_hull(pts);
    std::vector<Point2> got = hull.vertices;
    std::sort(got.begin(), got.end(),
              [](Point2 a, Point2 b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
    CHECK(got == testing::brute_force_hull(pts));
    CHECK(hull.signed_area() >= 0.0);
  }
}

TEST_CASE("planar center of mass") {
  const std::vector<WeightedPoint> two = {{{0, 0}, 1.0}, {{1, 0}, 3.0}};
  const Point2 c = planar_com(two);
  CHECK(c.x == Approx(0.75).epsilon(1e-15));
  CHECK(c.y == Approx(0.0));

  const auto grid = density_samples(TableSpec::square(1.6));
  const Point2 center = planar_com(grid);
  CHECK(std::fabs(center.x) < 1e-12);
  CHECK(std::fabs(center.y) < 1e-12);

  std::vector<WeightedPoint> moved = two;
  for (auto& s : moved) s.p += Point2{2.0, -1.0};
  const Point2 cm = planar_com(moved);
  CHECK(cm.x == Approx(2.75));
  CHECK(cm.y == Approx(-1.0));

  const std::vector<WeightedPoint> bad = {{{0, 0}, 0.0}};
  CHECK_THROWS_AS(planar_com(bad), Error);
}

TEST_CASE("principal axes") {
  const auto rect = density_samples(TableSpec::rectangle(2.0, 1.2));
  const PrincipalAxes a = principal_axes(rect, planar_com(rect));
  CHECK_FALSE(a.isotropic);
  CHECK(std::fabs(std::atan2(a.u1.y, a.u1.x)) < 1e-9);
  CHECK(a.u1.dot(a.u2) == Approx(0.0));
  CHECK(a.lambda1 <= a.lambda2);

  for (const TableSpec& spec : {TableSpec::square(1.6), TableSpec::round(2.0)}) {
    const auto s = density_samples(spec);
    const PrincipalAxes iso = principal_axes(s, planar_com(s));
    CHECK(iso.isotropic);
    CHECK(iso.u1 == Point2{1, 0});
    CHECK(iso.u2 == Point2{0, 1});
  }

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> ang(-kPi, kPi);
  for (int trial = 0; trial < 20; ++trial) {
    const double th = ang(rng);
    std::vector<WeightedPoint> rot = rect;
    for (auto& s : rot) s.p = rotate(s.p, th);
    const PrincipalAxes r = principal_axes(rot, planar_com(rot));
    const Point2 expected = rotate(a.u1, th);
    CHECK(std::fabs(std::fabs(r.u1.dot(expected)) - 1.0) < 1e-6);

    // Eigenpairs reconstruct the summed inertia.
    double ixx = 0, iyy = 0, ixy = 0;
    const Point2 c = planar_com(rot);
    for (const auto& s : rot) {
      const Point2 d = s.p - c;
      ixx += s.w * d.y * d.y;
      iyy += s.w * d.x * d.x;
      ixy -= s.w * d.x * d.y;
    }
    const double rxx = r.lambda1 * r.u1.x * r.u1.x + r.lambda2 * r.u2.x * r.u2.x;
    const double ryy = r.lambda1 * r.u1.y * r.u1.y + r.lambda2 * r.u2.y * r.u2.y;
    const double rxy = r.lambda1 * r.u1.x * r.u1.y + r.lambda2 * r.u2.x * r.u2.y;
    const double scale = ixx + iyy;
    CHECK(std::fabs(rxx - ixx) < 1e-9 * scale);
    CHECK(std::fabs(ryy - iyy) < 1e-9 * scale);
    CHECK(std::fabs(rxy - ixy) < 1e-9 * scale);
  }
}

TEST_CASE("boundary extents") {
  const TableGeometry round = TableGeometry::build(TableSpec::round(2.0));
  CHECK(round.frame.extents.pos1 == Approx(1.0).epsilon(1e-12));
  CHECK(round.frame.extents.neg1 == Approx(1.0).epsilon(1e-12));
  CHECK(round.frame.extents.pos2 == Approx(1.0).epsilon(1e-12));
  CHECK(round.frame.extents.neg2 == Approx(1.0).epsilon(1e-12));

  const TableGeometry sq = TableGeometry::build(TableSpec::square(1.6));
  CHECK(sq.frame.extents.pos1 == Approx(0.8).epsilon(1e-12));
  CHECK(sq.frame.extents.neg2 == Approx(0.8).epsilon(1e-12));

  const TableGeometry rect = TableGeometry::build(TableSpec::rectangle(2.0, 1.2));
  CHECK(rect.frame.extents.pos1 == Approx(1.0).epsilon(1e-12));
  CHECK(rect.frame.extents.neg1 == Approx(1.0).epsilon(1e-12));
  CHECK(rect.frame.extents.pos2 == Approx(0.6).epsilon(1e-12));
  CHECK(rect.frame.extents.neg2 == Approx(0.6).epsilon(1e-12));

  CHECK_THROWS_AS(boundary_extents(sq.boundary_hull, {5, 5}, {1, 0}, {0, 1}), Error);
}

TEST_CASE("nearest perimeter point") {
  const PerimeterSampling round = sample_perimeter(TableSpec::round(2.0));
  const NearestPoint np = nearest_perimeter_point({3.0, 0.0}, round);
  CHECK(np.index == 0);
  CHECK(np.distance == Approx(2.0));
  CHECK(nearest_perimeter_point(round.points[17], round).distance == 0.0);

  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int i = 0; i < 200; ++i) {
    const Point2 x{u(rng), u(rng)};
    const NearestPoint got = nearest_perimeter_point(x, round);
    int best = 0;
    for (int k = 1; k < 64; ++k) {
      if ((x - round.points[k]).norm() < (x - round.points[best]).norm()) best = k;
    }
    CHECK(got.index == best);
  }
}

TEST_CASE("support polygon and axis coverage examples") {
  const TableGeometry sq = TableGeometry::build(TableSpec::square(1.6));
  const std::vector<Point2> mids = {{0, -1.1}, {1.1, 0}, {0, 1.1}, {-1.1, 0}};
  const ConvexPolygon support = support_polygon(mids, sq.sampling);
  CHECK(support.vertices.size() == 8);
  for (Point2 p : {Point2{0.2, -0.8}, Point2{-0.2, 0.8}, Point2{0.8, 0.2}, Point2{-0.8, -0.2}}) {
    bool found = false;
    for (Point2 v : support.vertices) found = found || (v - p).norm() < 1e-12;
    CHECK(found);
  }
  const Coverage full = axis_coverage(support, sq.frame);
  CHECK(full.g1 == Approx(1.0).epsilon(1e-12));
  CHECK(full.g2 == Approx(1.0).epsilon(1e-12));
  CHECK(full.r_cov == Approx(1.0).epsilon(1e-12));

  const std::vector<Point2> bottom = {{-0.4, -1.1}, {0.4, -1.1}};
  const ConvexPolygon seg = support_polygon(bottom, sq.sampling);
  CHECK(seg.kind == ConvexPolygon::Kind::kSegment);
  const Coverage two = axis_coverage(seg, sq.frame);
  CHECK(std::fabs(two.g1 - 0.75) < 1e-9);
  CHECK(std::fabs(two.g2) < 1e-12);
  CHECK(std::fabs(two.r_cov - 0.375) < 1e-9);

  const std::vector<Point2> same = {{0.0, -1.1}, {0.0, -1.2}};
  CHECK(support_polygon(same, sq.sampling).kind == ConvexPolygon::Kind::kSegment);
  const std::vector<Point2> single = {{0.0, -1.1}};
  CHECK(support_polygon(single, sq.sampling).vertices.size() == 2);

  const std::vector<Point2> cluster = {{0.75, -1.0}, {0.8, -0.95}, {0.85, -0.9}};
  CHECK(coverage_for_roots(cluster, sq, {}).r_cov == 0.0);
}

TEST_CASE("coverage oracle, invariance, monotonicity") {
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> ang(-kPi, kPi), rad(1.0, 2.5), u(-5.0, 5.0);
  for (const TableSpec& spec :
       {TableSpec::round(2.0), TableSpec::square(1.6), TableSpec::rectangle(2.0, 1.2)}) {
    const TableGeometry g = TableGeometry::build(spec);
    for (int trial = 0; trial < 30; ++trial) {
      std::vector<Point2> roots(1 + trial % 6);
      for (Point2& r : roots) r = unit_heading(ang(rng)) * rad(rng);
      const Coverage got = coverage_for_roots(roots, g, {});
      const Coverage oracle = testing::dense_coverage(support_for_roots(roots, g, {}), g);
      CHECK(std::fabs(got.r_cov - oracle.r_cov) < 1e-6);
      CHECK(got.r_cov >= 0.0);
      CHECK(got.r_cov <= 1.0);

      const Pose2 pose{{u(rng), u(rng)}, ang(rng)};
      std::vector<Point2> moved;
      for (Point2 r : roots) moved.push_back(pose.to_world(r));
      CHECK(std::fabs(coverage_for_roots(moved, g, pose).r_cov - got.r_cov) < 1e-9);

      std::vector<Point2> more = roots;
      more.push_back(unit_heading(ang(rng)) * rad(rng));
      CHECK(coverage_for_roots(more, g, {}).r_cov >= got.r_cov - 1e-12);
    }
  }
}
