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

// Planar geometry for table formations: perimeter sampling, convex hulls,
// mass-weighted principal axes and the support-polygon coverage measure.
//
// Everything here is a pure function of its arguments. Table-local
// quantities (perimeter samples, principal frame) are computed once in the
// table frame and mapped to the world with a Pose2.

#ifndef COOPCARRY_GEOMETRY_HPP_
#define COOPCARRY_GEOMETRY_HPP_

#include <cmath>
#include <span>
#include <string>
#include <vector>

namespace coopcarry {

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  Point2 operator+(Point2 o) const { return {x + o.x, y + o.y}; }
  Point2 operator-(Point2 o) const { return {x - o.x, y - o.y}; }
  Point2 operator-() const { return {-x, -y}; }
  Point2 operator*(double s) const { return {x * s, y * s}; }
  Point2 operator/(double s) const { return {x / s, y / s}; }
  Point2& operator+=(Point2 o) {
    x += o.x;
    y += o.y;
    return *this;
  }
  bool operator==(const Point2&) const = default;

  double dot(Point2 o) const { return x * o.x + y * o.y; }
  double cross(Point2 o) const { return x * o.y - y * o.x; }
  double norm() const { return std::hypot(x, y); }
  double squared_norm() const { return x * x + y * y; }
  // Counterclockwise quarter turn.
  Point2 perp() const { return {-y, x}; }
};

inline Point2 operator*(double s, Point2 p) { return p * s; }

struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  Point3 operator+(Point3 o) const { return {x + o.x, y + o.y, z + o.z}; }
  Point3 operator-(Point3 o) const { return {x - o.x, y - o.y, z - o.z}; }
  Point3 operator*(double s) const { return {x * s, y * s, z * s}; }
  bool operator==(const Point3&) const = default;
  double dot(Point3 o) const { return x * o.x + y * o.y + z * o.z; }
  double norm() const { return std::sqrt(x * x + y * y + z * z); }
  Point2 xy() const { return {x, y}; }
};

inline Point2 unit_heading(double yaw) { return {std::cos(yaw), std::sin(yaw)}; }

inline Point2 rotate(Point2 p, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  return {c * p.x - s * p.y, s * p.x + c * p.y};
}

// Wraps to (-pi, pi].
double wrap_angle(double a);

// Planar rigid transform: world = R(yaw) * local + position.
struct Pose2 {
  Point2 position;
  double yaw = 0.0;

  Point2 to_world(Point2 local) const { return rotate(local, yaw) + position; }
  Point2 to_local(Point2 world) const { return rotate(world - position, -yaw); }
  Point2 dir_to_world(Point2 d) const { return rotate(d, yaw); }
  Point2 dir_to_local(Point2 d) const { return rotate(d, -yaw); }
};

enum class TableShape { kRound, kSquare, kRectangle, kPolygon };

std::string to_string(TableShape shape);
TableShape table_shape_from_string(const std::string& name);

struct WeightedPoint {
  Point2 p;
  double w = 1.0;
};

struct TableSpec {
  TableShape shape = TableShape::kSquare;
  double diameter = 2.0;  // round
  double width = 1.6;     // square side, rectangle extent along x
  double depth = 1.6;     // rectangle extent along y
  std::vector<Point2> vertices;  // polygon boundary, table frame
  double tabletop_height = 0.82;
  double mass_scale = 1.0;
  // Optional explicit mass samples; empty means a uniform grid.
  std::vector<WeightedPoint> density_samples;
  int n_contact = 64;

  static TableSpec round(double diameter);
  static TableSpec square(double side);
  static TableSpec rectangle(double width, double depth);
  static TableSpec polygon(std::vector<Point2> vertices);
};

// Throws kInvalidGeometry with a description of the first violated rule.
void validate(const TableSpec& spec);

struct PerimeterSampling {
  std::vector<Point2> points;          // counterclockwise, table frame
  std::vector<Point2> inward_normals;  // unit
  double arc_spacing = 0.0;
  double edge_height = 0.0;

  int size() const { return static_cast<int>(points.size()); }
};

struct ConvexPolygon {
  enum class Kind { kPoint, kSegment, kPolygon };

  std::vector<Point2> vertices;  // counterclockwise
  Kind kind = Kind::kPoint;

  bool degenerate() const { return kind != Kind::kPolygon; }
  double signed_area() const;
};

struct PrincipalAxes {
  Point2 u1;  // smallest eigenvalue
  Point2 u2;
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  bool isotropic = false;
};

struct Extents {
  double pos1 = 0.0, neg1 = 0.0;  // along +u1, -u1
  double pos2 = 0.0, neg2 = 0.0;  // along +u2, -u2
};

struct PrincipalFrame {
  Point2 com;
  Point2 u1, u2;
  double lambda1 = 0.0, lambda2 = 0.0;
  bool isotropic = false;
  Extents extents;

  PrincipalFrame transformed(const Pose2& pose) const;
};

struct Coverage {
  double d1_pos = 0.0, d1_neg = 0.0, d2_pos = 0.0, d2_neg = 0.0;
  double g1 = 0.0, g2 = 0.0;
  double r_cov = 0.0;
};

struct NearestPoint {
  int index = 0;
  Point2 point;
  Point2 normal;
  double distance = 0.0;
};

// Closed boundary polygon in the table frame, counterclockwise. Round tables
// are approximated by a regular 256-gon with a vertex at angle zero.
std::vector<Point2> boundary_polygon(const TableSpec& spec);

bool is_simple_polygon(std::span<const Point2> ring);
bool point_in_polygon(std::span<const Point2> ring, Point2 p);

PerimeterSampling sample_perimeter(const TableSpec& spec);

ConvexPolygon convex_hull(std::span<const Point2> points);

// True when p is inside the hull or on its boundary (within eps).
bool hull_contains(const ConvexPolygon& hull, Point2 p, double eps = 1e-12);

Point2 planar_com(std::span<const WeightedPoint> samples);

PrincipalAxes principal_axes(std::span<const WeightedPoint> samples, Point2 c);

Extents boundary_extents(const ConvexPolygon& boundary_hull, Point2 c,
                         Point2 u1, Point2 u2);

NearestPoint nearest_perimeter_point(Point2 x, const PerimeterSampling& s);

// Each root is projected to its nearest perimeter index k and replaced by the
// samples at k-2 and k+2; the result is their hull.
ConvexPolygon support_polygon(std::span<const Point2> roots,
                              const PerimeterSampling& s);

Coverage axis_coverage(const ConvexPolygon& support,
                       const PrincipalFrame& frame);

// Explicit samples when given, else a 0.05 m cell-center grid clipped to the
// boundary.
std::vector<WeightedPoint> density_samples(const TableSpec& spec);

PrincipalFrame principal_frame(const TableSpec& spec);

// Static per-table geometry in the table frame.
struct TableGeometry {
  TableSpec spec;
  std::vector<Point2> boundary;
  ConvexPolygon boundary_hull;
  PerimeterSampling sampling;
  PrincipalFrame frame;

  static TableGeometry build(const TableSpec& spec);

  // Largest distance from the table origin to the boundary.
  double half_extent() const;
};

// r_cov for agent roots given in the world frame.
Coverage coverage_for_roots(std::span<const Point2> roots_world,
                            const TableGeometry& geom, const Pose2& pose);

// Support hull in the table frame, for diagnostics.
ConvexPolygon support_for_roots(std::span<const Point2> roots_world,
                                const TableGeometry& geom, const Pose2& pose);

}  // namespace coopcarry

#endif  // COOPCARRY_GEOMETRY_HPP_
