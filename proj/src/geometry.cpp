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

#include "coopcarry/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "coopcarry/error.hpp"

namespace coopcarry {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr int kRoundBoundaryVertices = 256;
constexpr double kDensityResolution = 0.05;
constexpr double kIsotropyTolerance = 1e-6;

double orient(Point2 a, Point2 b, Point2 c) { return (b - a).cross(c - a); }

// Canonical sign: the larger-magnitude component is positive, ties favor +x.
Point2 canonical_sign(Point2 u) {
  const double ax = std::abs(u.x), ay = std::abs(u.y);
  const bool flip = (ax >= ay) ? (u.x < 0.0) : (u.y < 0.0);
  return flip ? -u : u;
}

bool on_segment(Point2 a, Point2 b, Point2 p) {
  return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) &&
         std::min(a.y, b.y) <= p.y && p.y <= std::max(a.y, b.y);
}

bool segments_intersect(Point2 a, Point2 b, Point2 c, Point2 d) {
  const double o1 = orient(a, b, c), o2 = orient(a, b, d);
  const double o3 = orient(c, d, a), o4 = orient(c, d, b);
  if (((o1 > 0 && o2 < 0) || (o1 < 0 && o2 > 0)) &&
      ((o3 > 0 && o4 < 0) || (o3 < 0 && o4 > 0))) {
    return true;
  }
  if (o1 == 0 && on_segment(a, b, c)) return true;
  if (o2 == 0 && on_segment(a, b, d)) return true;
  if (o3 == 0 && on_segment(c, d, a)) return true;
  if (o4 == 0 && on_segment(c, d, b)) return true;
  return false;
}

double ring_signed_area(std::span<const Point2> ring) {
  double a = 0.0;
  for (size_t i = 0; i < ring.size(); ++i) {
    a += ring[i].cross(ring[(i + 1) % ring.size()]);
  }
  return 0.5 * a;
}

// Counterclockwise ring starting at the anchor used for contact indexing:
// the bottom-left corner (minimal x + y, lowest index on ties).
std::vector<Point2> anchored_ring(const TableSpec& spec) {
  std::vector<Point2> ring = boundary_polygon(spec);
  if (spec.shape == TableShape::kRound) return ring;
  size_t anchor = 0;
  for (size_t i = 1; i < ring.size(); ++i) {
    if (ring[i].x + ring[i].y < ring[anchor].x + ring[anchor].y) anchor = i;
  }
  std::rotate(ring.begin(), ring.begin() + static_cast<long>(anchor),
              ring.end());
  return ring;
}

}  // namespace

double wrap_angle(double a) {
  if (a > -kPi && a <= kPi) return a;
  a = std::fmod(a + kPi, 2.0 * kPi);
  if (a <= 0.0) a += 2.0 * kPi;
  return a - kPi;
}

std::string to_string(TableShape shape) {
  switch (shape) {
    case TableShape::kRound:
      return "round";
    case TableShape::kSquare:
      return "square";
    case TableShape::kRectangle:
      return "rectangle";
    case TableShape::kPolygon:
      return "polygon";
  }
  return "unknown";
}

TableShape table_shape_from_string(const std::string& name) {
  if (name == "round") return TableShape::kRound;
  if (name == "square") return TableShape::kSquare;
  if (name == "rectangle") return TableShape::kRectangle;
  if (name == "polygon") return TableShape::kPolygon;
  fail(ErrorCode::kInvalidArgument, "unknown table shape '" + name + "'");
}

TableSpec TableSpec::round(double diameter) {
  TableSpec s;
  s.shape = TableShape::kRound;
  s.diameter = diameter;
  return s;
}

TableSpec TableSpec::square(double side) {
  TableSpec s;
  s.shape = TableShape::kSquare;
  s.width = side;
  s.depth = side;
  return s;
}

TableSpec TableSpec::rectangle(double width, double depth) {
  TableSpec s;
  s.shape = TableShape::kRectangle;
  s.width = width;
  s.depth = depth;
  return s;
}

TableSpec TableSpec::polygon(std::vector<Point2> vertices) {
  TableSpec s;
  s.shape = TableShape::kPolygon;
  s.vertices = std::move(vertices);
  return s;
}

void validate(const TableSpec& spec) {
  auto bad = [](const std::string& what) {
    fail(ErrorCode::kInvalidGeometry, what);
  };
  switch (spec.shape) {
    case TableShape::kRound:
      if (!(spec.diameter > 0.0)) bad("round table diameter must be > 0");
      break;
    case TableShape::kSquare:
      if (!(spec.width > 0.0)) bad("square table side must be > 0");
      break;
    case TableShape::kRectangle:
      if (!(spec.width > 0.0) || !(spec.depth > 0.0)) {
        bad("rectangle table dimensions must be > 0");
      }
      break;
    case TableShape::kPolygon:
      if (spec.vertices.size() < 3) bad("polygon table needs >= 3 vertices");
      for (const Point2& v : spec.vertices) {
        if (!std::isfinite(v.x) || !std::isfinite(v.y)) {
          bad("polygon vertex is not finite");
        }
      }
      if (!is_simple_polygon(spec.vertices)) {
        bad("polygon boundary is not a simple closed curve");
      }
      break;
  }
  if (!(spec.tabletop_height > 0.0)) bad("tabletop_height must be > 0");
  if (!(spec.mass_scale > 0.0)) bad("mass_scale must be > 0");
  if (spec.n_contact < 8) bad("n_contact must be >= 8");
  for (const WeightedPoint& s : spec.density_samples) {
    if (!(s.w > 0.0)) bad("density sample weights must be > 0");
  }
}

double ConvexPolygon::signed_area() const {
  if (kind != Kind::kPolygon) return 0.0;
  return ring_signed_area(vertices);
}

PrincipalFrame PrincipalFrame::transformed(const Pose2& pose) const {
  PrincipalFrame f = *this;
  f.com = pose.to_world(com);
  f.u1 = pose.dir_to_world(u1);
  f.u2 = pose.dir_to_world(u2);
  return f;
}

std::vector<Point2> boundary_polygon(const TableSpec& spec) {
  switch (spec.shape) {
    case TableShape::kRound: {
      const double r = 0.5 * spec.diameter;
      std::vector<Point2> ring(kRoundBoundaryVertices);
      for (int k = 0; k < kRoundBoundaryVertices; ++k) {
        const double a = 2.0 * kPi * k / kRoundBoundaryVertices;
        ring[k] = {r * std::cos(a), r * std::sin(a)};
      }
      return ring;
    }
    case TableShape::kSquare:
    case TableShape::kRectangle: {
      const double hx = 0.5 * spec.width;
      const double hy = 0.5 * (spec.shape == TableShape::kSquare ? spec.width
                                                                 : spec.depth);
      return {{-hx, -hy}, {hx, -hy}, {hx, hy}, {-hx, hy}};
    }
    case TableShape::kPolygon: {
      std::vector<Point2> ring = spec.vertices;
      if (ring_signed_area(ring) < 0.0) std::reverse(ring.begin(), ring.end());
      return ring;
    }
  }
  return {};
}

bool is_simple_polygon(std::span<const Point2> ring) {
  const size_t n = ring.size();
  if (n < 3) return false;
  if (std::abs(ring_signed_area(ring)) <= 0.0) return false;
  for (size_t i = 0; i < n; ++i) {
    if (ring[i] == ring[(i + 1) % n]) return false;
  }
  for (size_t i = 0; i < n; ++i) {
    const Point2 a = ring[i], b = ring[(i + 1) % n];
    for (size_t j = i + 1; j < n; ++j) {
      const bool adjacent = (j == i + 1) || (i == 0 && j == n - 1);
      const Point2 c = ring[j], d = ring[(j + 1) % n];
      if (adjacent) {
        // Adjacent edges may only share their common vertex.
        const Point2 shared = (j == i + 1) ? b : a;
        const Point2 other_ab = (j == i + 1) ? a : b;
        const Point2 other_cd = (j == i + 1) ? d : c;
        if (orient(other_ab, shared, other_cd) == 0.0 &&
            (other_ab - shared).dot(other_cd - shared) > 0.0) {
          return false;
        }
        continue;
      }
      if (segments_intersect(a, b, c, d)) return false;
    }
  }
  return true;
}

bool point_in_polygon(std::span<const Point2> ring, Point2 p) {
  bool inside = false;
  const size_t n = ring.size();
  for (size_t i = 0, j = n - 1; i < n; j = i++) {
    const Point2 a = ring[i], b = ring[j];
    if ((a.y > p.y) != (b.y > p.y)) {
      const double x = (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x;
      if (p.x < x) inside = !inside;
    }
  }
  return inside;
}

PerimeterSampling sample_perimeter(const TableSpec& spec) {
  validate(spec);
  const int n = spec.n_contact;
  PerimeterSampling out;
  out.points.resize(n);
  out.inward_normals.resize(n);
  out.edge_height = spec.tabletop_height;

  if (spec.shape == TableShape::kRound) {
    const double r = 0.5 * spec.diameter;
    out.arc_spacing = 2.0 * kPi * r / n;
    for (int k = 0; k < n; ++k) {
      const double a = 2.0 * kPi * k / n;
      const Point2 radial{std::cos(a), std::sin(a)};
      out.points[k] = radial * r;
      out.inward_normals[k] = -radial;
    }
    return out;
  }

  const std::vector<Point2> ring = anchored_ring(spec);
  const size_t m = ring.size();
  std::vector<double> cum(m + 1, 0.0);
  std::vector<Point2> edge_normal(m);
  for (size_t i = 0; i < m; ++i) {
    const Point2 e = ring[(i + 1) % m] - ring[i];
    cum[i + 1] = cum[i] + e.norm();
    edge_normal[i] = (e / e.norm()).perp();
  }
  const double perimeter = cum[m];
  const double snap = 1e-9 * perimeter;
  out.arc_spacing = perimeter / n;

  size_t edge = 0;
  for (int k = 0; k < n; ++k) {
    const double s = perimeter * k / n;
    while (edge + 1 < m && cum[edge + 1] <= s + snap) ++edge;
    if (std::abs(s - cum[edge]) <= snap) {
      // Sample sits on a vertex: bisect the adjacent edge normals.
      const Point2 nsum = edge_normal[(edge + m - 1) % m] + edge_normal[edge];
      out.points[k] = ring[edge];
      out.inward_normals[k] = nsum / nsum.norm();
    } else {
      const double t = (s - cum[edge]) / (cum[edge + 1] - cum[edge]);
      const Point2 a = ring[edge], b = ring[(edge + 1) % m];
      out.points[k] = a + (b - a) * t;
      out.inward_normals[k] = edge_normal[edge];
    }
  }
  return out;
}

ConvexPolygon convex_hull(std::span<const Point2> points) {
  if (points.empty()) {
    fail(ErrorCode::kInvalidArgument, "convex_hull: empty input");
  }
  std::vector<Point2> pts(points.begin(), points.end());
  std::sort(pts.begin(), pts.end(), [](Point2 a, Point2 b) {
    return a.x < b.x || (a.x == b.x && a.y < b.y);
  });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());

  ConvexPolygon hull;
  if (pts.size() == 1) {
    hull.vertices = pts;
    hull.kind = ConvexPolygon::Kind::kPoint;
    return hull;
  }

  double span = 0.0;
  for (const Point2& p : pts) {
    span = std::max({span, std::abs(p.x - pts[0].x), std::abs(p.y - pts[0].y)});
  }
  const double eps = 1e-12 * span * span;

  std::vector<Point2> h(2 * pts.size());
  size_t k = 0;
  for (size_t i = 0; i < pts.size(); ++i) {
    while (k >= 2 && orient(h[k - 2], h[k - 1], pts[i]) <= eps) --k;
    h[k++] = pts[i];
  }
  for (size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && orient(h[k - 2], h[k - 1], pts[i]) <= eps) --k;
    h[k++] = pts[i];
  }
  h.resize(k - 1);

  if (h.size() <= 2) {
    hull.vertices = {pts.front(), pts.back()};
    hull.kind = ConvexPolygon::Kind::kSegment;
  } else {
    hull.vertices = std::move(h);
    hull.kind = ConvexPolygon::Kind::kPolygon;
  }
  return hull;
}

bool hull_contains(const ConvexPolygon& hull, Point2 p, double eps) {
  const auto& v = hull.vertices;
  switch (hull.kind) {
    case ConvexPolygon::Kind::kPoint:
      return (p - v[0]).norm() <= eps;
    case ConvexPolygon::Kind::kSegment: {
      const Point2 d = v[1] - v[0];
      const double len = d.norm();
      if (std::abs(d.cross(p - v[0])) > eps * len) return false;
      const double t = d.dot(p - v[0]) / (len * len);
      return t >= -eps && t <= 1.0 + eps;
    }
    case ConvexPolygon::Kind::kPolygon:
      for (size_t i = 0; i < v.size(); ++i) {
        const Point2 a = v[i], b = v[(i + 1) % v.size()];
        if ((b - a).cross(p - a) < -eps * (b - a).norm()) return false;
      }
      return true;
  }
  return false;
}

Point2 planar_com(std::span<const WeightedPoint> samples) {
  if (samples.empty()) fail(ErrorCode::kInvalidArgument, "planar_com: no samples");
  Point2 acc;
  double total = 0.0;
  for (const WeightedPoint& s : samples) {
    if (!(s.w > 0.0)) {
      fail(ErrorCode::kInvalidArgument, "planar_com: weights must be > 0");
    }
    acc += s.p * s.w;
    total += s.w;
  }
  if (!(total > 0.0)) {
    fail(ErrorCode::kInvalidArgument, "planar_com: zero total weight");
  }
  return acc / total;
}

PrincipalAxes principal_axes(std::span<const WeightedPoint> samples, Point2 c) {
  double ixx = 0.0, iyy = 0.0, ixy = 0.0;
  for (const WeightedPoint& s : samples) {
    const Point2 d = s.p - c;
    ixx += s.w * d.y * d.y;
    iyy += s.w * d.x * d.x;
    ixy -= s.w * d.x * d.y;
  }
  const double trace = ixx + iyy;
  if (!(trace > 0.0)) {
    fail(ErrorCode::kInvalidArgument, "principal_axes: all samples coincide");
  }

  PrincipalAxes out;
  const double mean = 0.5 * trace;
  const double radius = std::hypot(0.5 * (ixx - iyy), ixy);
  out.lambda1 = mean - radius;
  out.lambda2 = mean + radius;
  if (out.lambda2 - out.lambda1 < kIsotropyTolerance * trace) {
    out.isotropic = true;
    out.u1 = {1.0, 0.0};
    out.u2 = {0.0, 1.0};
    return out;
  }
  // Two candidate eigenvectors for lambda1; the longer one is better
  // conditioned.
  const Point2 va{ixy, out.lambda1 - ixx};
  const Point2 vb{out.lambda1 - iyy, ixy};
  const Point2 v = va.squared_norm() >= vb.squared_norm() ? va : vb;
  out.u1 = canonical_sign(v / v.norm());
  out.u2 = canonical_sign(out.u1.perp());
  return out;
}

Extents boundary_extents(const ConvexPolygon& boundary_hull, Point2 c,
                         Point2 u1, Point2 u2) {
  if (boundary_hull.kind != ConvexPolygon::Kind::kPolygon ||
      !hull_contains(boundary_hull, c)) {
    fail(ErrorCode::kInvalidGeometry,
         "boundary_extents: center of mass outside the boundary hull");
  }
  const double lowest = -std::numeric_limits<double>::infinity();
  Extents e{lowest, lowest, lowest, lowest};
  for (const Point2& p : boundary_hull.vertices) {
    const Point2 d = p - c;
    e.pos1 = std::max(e.pos1, d.dot(u1));
    e.neg1 = std::max(e.neg1, -d.dot(u1));
    e.pos2 = std::max(e.pos2, d.dot(u2));
    e.neg2 = std::max(e.neg2, -d.dot(u2));
  }
  if (!(e.pos1 > 0.0 && e.neg1 > 0.0 && e.pos2 > 0.0 && e.neg2 > 0.0)) {
    fail(ErrorCode::kInvalidGeometry,
         "boundary_extents: center of mass lies on the boundary");
  }
  return e;
}

NearestPoint nearest_perimeter_point(Point2 x, const PerimeterSampling& s) {
  NearestPoint best;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (int k = 0; k < s.size(); ++k) {
    const double d2 = (x - s.points[k]).squared_norm();
    if (d2 < best_d2) {
      best_d2 = d2;
      best.index = k;
    }
  }
  best.point = s.points[best.index];
  best.normal = s.inward_normals[best.index];
  best.distance = std::sqrt(best_d2);
  return best;
}

ConvexPolygon support_polygon(std::span<const Point2> roots,
                              const PerimeterSampling& s) {
  if (roots.empty()) {
    fail(ErrorCode::kInvalidArgument, "support_polygon: no agents");
  }
  const int n = s.size();
  std::vector<Point2> emitted;
  emitted.reserve(2 * roots.size());
  for (const Point2& r : roots) {
    const int k = nearest_perimeter_point(r, s).index;
    emitted.push_back(s.points[(k - 2 + n) % n]);
    emitted.push_back(s.points[(k + 2) % n]);
  }
  return convex_hull(emitted);
}

Coverage axis_coverage(const ConvexPolygon& support,
                       const PrincipalFrame& frame) {
  const double lowest = -std::numeric_limits<double>::infinity();
  Coverage cov{lowest, lowest, lowest, lowest};
  for (const Point2& p : support.vertices) {
    const Point2 d = p - frame.com;
    cov.d1_pos = std::max(cov.d1_pos, d.dot(frame.u1));
    cov.d1_neg = std::max(cov.d1_neg, -d.dot(frame.u1));
    cov.d2_pos = std::max(cov.d2_pos, d.dot(frame.u2));
    cov.d2_neg = std::max(cov.d2_neg, -d.dot(frame.u2));
  }
  auto ratio = [](double d, double l) { return std::max(0.0, d) / l; };
  const Extents& e = frame.extents;
  cov.g1 = std::clamp(
      std::min(ratio(cov.d1_pos, e.pos1), ratio(cov.d1_neg, e.neg1)), 0.0, 1.0);
  cov.g2 = std::clamp(
      std::min(ratio(cov.d2_pos, e.pos2), ratio(cov.d2_neg, e.neg2)), 0.0, 1.0);
  cov.r_cov = 0.5 * (cov.g1 + cov.g2);
  return cov;
}

std::vector<WeightedPoint> density_samples(const TableSpec& spec) {
  if (!spec.density_samples.empty()) return spec.density_samples;
  const std::vector<Point2> ring = boundary_polygon(spec);
  Point2 lo = ring[0], hi = ring[0];
  for (const Point2& p : ring) {
    lo = {std::min(lo.x, p.x), std::min(lo.y, p.y)};
    hi = {std::max(hi.x, p.x), std::max(hi.y, p.y)};
  }
  if (spec.shape == TableShape::kRound) {
    const double r = 0.5 * spec.diameter;
    lo = {-r, -r};
    hi = {r, r};
  }
  const int nx = std::max(1, static_cast<int>(std::ceil(
                                 (hi.x - lo.x) / kDensityResolution - 1e-9)));
  const int ny = std::max(1, static_cast<int>(std::ceil(
                                 (hi.y - lo.y) / kDensityResolution - 1e-9)));
  const double hx = (hi.x - lo.x) / nx, hy = (hi.y - lo.y) / ny;

  std::vector<WeightedPoint> out;
  out.reserve(static_cast<size_t>(nx) * ny);
  for (int i = 0; i < nx; ++i) {
    for (int j = 0; j < ny; ++j) {
      const Point2 p{lo.x + (i + 0.5) * hx, lo.y + (j + 0.5) * hy};
      bool inside = true;
      if (spec.shape == TableShape::kRound) {
        const double r = 0.5 * spec.diameter;
        inside = p.squared_norm() <= r * r;
      } else if (spec.shape == TableShape::kPolygon) {
        inside = point_in_polygon(ring, p);
      }
      if (inside) out.push_back({p, 1.0});
    }
  }
  if (out.empty()) {
    fail(ErrorCode::kInvalidGeometry, "table too small for density grid");
  }
  return out;
}

PrincipalFrame principal_frame(const TableSpec& spec) {
  const std::vector<WeightedPoint> samples = density_samples(spec);
  PrincipalFrame f;
  f.com = planar_com(samples);
  const PrincipalAxes axes = principal_axes(samples, f.com);
  f.u1 = axes.u1;
  f.u2 = axes.u2;
  f.lambda1 = axes.lambda1;
  f.lambda2 = axes.lambda2;
  f.isotropic = axes.isotropic;
  const ConvexPolygon hull = convex_hull(boundary_polygon(spec));
  f.extents = boundary_extents(hull, f.com, f.u1, f.u2);
  return f;
}

TableGeometry TableGeometry::build(const TableSpec& spec) {
  validate(spec);
  TableGeometry g;
  g.spec = spec;
  g.boundary = boundary_polygon(spec);
  g.boundary_hull = convex_hull(g.boundary);
  g.sampling = sample_perimeter(spec);
  g.frame = principal_frame(spec);
  return g;
}

double TableGeometry::half_extent() const {
  double r = 0.0;
  for (const Point2& p : boundary) r = std::max(r, p.norm());
  return r;
}

ConvexPolygon support_for_roots(std::span<const Point2> roots_world,
                                const TableGeometry& geom, const Pose2& pose) {
  std::vector<Point2> local;
  local.reserve(roots_world.size());
  for (const Point2& r : roots_world) local.push_back(pose.to_local(r));
  return support_polygon(local, geom.sampling);
}

Coverage coverage_for_roots(std::span<const Point2> roots_world,
                            const TableGeometry& geom, const Pose2& pose) {
  return axis_coverage(support_for_roots(roots_world, geom, pose), geom.frame);
}

}  // namespace coopcarry
