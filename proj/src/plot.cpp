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

#include "coopcarry/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <sstream>
#include <vector>

#include "coopcarry/error.hpp"
#include "coopcarry/geometry.hpp"
#include "coopcarry/train.hpp"

namespace coopcarry {
namespace {

constexpr double kCanvas = 800.0;
constexpr double kMargin = 40.0;

const char* const kPalette[] = {"#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
                                "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#393b79"};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  // Avoid "-0.000", which would make equal pictures differ.
  if (std::string(buf) == "-0.000") return "0.000";
  return buf;
}

struct Box {
  double x0 = std::numeric_limits<double>::infinity(), y0 = x0;
  double x1 = -x0, y1 = -x0;
  void add(Point2 p) {
    x0 = std::min(x0, p.x);
    y0 = std::min(y0, p.y);
    x1 = std::max(x1, p.x);
    y1 = std::max(y1, p.y);
  }
};

// Maps data coordinates onto the canvas, y up. `uniform` keeps the aspect ratio.
struct View {
  double sx = 1.0, sy = 1.0, ox = 0.0, oy = 0.0;
  View(const Box& b, bool uniform) {
    const double w = std::max(b.x1 - b.x0, 1e-9), h = std::max(b.y1 - b.y0, 1e-9);
    const double span = kCanvas - 2.0 * kMargin;
    sx = span / w;
    sy = span / h;
    if (uniform) sx = sy = std::min(sx, sy);
    ox = b.x0;
    oy = b.y0;
  }
  double px(double v) const { return kMargin + (v - ox) * sx; }
  double py(double v) const { return kCanvas - kMargin - (v - oy) * sy; }
  std::string x(double v) const { return fmt(px(v)); }
  std::string y(double v) const { return fmt(py(v)); }
  std::string pt(Point2 p) const { return x(p.x) + "," + y(p.y); }
};

std::string polyline(const std::vector<Point2>& pts, const View& v) {
  std::string s;
  for (size_t i = 0; i < pts.size(); ++i) {
    if (i) s += ' ';
    s += v.pt(pts[i]);
  }
  return s;
}

void header(std::ostringstream& os) {
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(kCanvas) << "\" height=\""
     << fmt(kCanvas) << "\" viewBox=\"0 0 " << fmt(kCanvas) << ' ' << fmt(kCanvas) << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(line);
  while (std::getline(is, cur, sep)) out.push_back(cur);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

}  // namespace

std::string trajectory_svg(const Trajectory& t) {
  if (t.states.empty()) fail(ErrorCode::kInvalidArgument, "trajectory has no states");
  const TableGeometry geom = TableGeometry::build(t.table);
  const WorldState& first = t.states.front();
  const WorldState& last = t.states.back();
  const int n = first.team_size();

  auto outline = [&](const Pose2& pose) {
    std::vector<Point2> pts;
    for (Point2 p : geom.boundary) pts.push_back(pose.to_world(p));
    return pts;
  };
  const std::vector<Point2> start_outline = outline(first.table.pose);
  const std::vector<Point2> end_outline = outline(last.table.pose);
  std::vector<std::vector<Point2>> traces(n);
  std::vector<Point2> center;
  Box box;
  for (const WorldState& w : t.states) {
    if (w.team_size() != n) fail(ErrorCode::kInvalidArgument, "team size changes within trajectory");
    for (int i = 0; i < n; ++i) {
      traces[i].push_back(w.agents[i].root);
      box.add(w.agents[i].root);
    }
    center.push_back(w.table.pose.position);
    box.add(w.table.pose.position);
  }
  for (Point2 p : start_outline) box.add(p);
  for (Point2 p : end_outline) box.add(p);
  box.add(last.target);
  const View v(box, true);

  std::ostringstream os;
  header(os);
  os << "<polygon class=\"table-outline\" points=\"" << polyline(start_outline, v)
     << "\" fill=\"none\" stroke=\"#999999\" stroke-dasharray=\"4 3\"/>\n";
  os << "<polygon class=\"table-outline\" points=\"" << polyline(end_outline, v)
     << "\" fill=\"#dddddd\" fill-opacity=\"0.5\" stroke=\"#555555\"/>\n";
  for (int i = 0; i < n; ++i) {
    os << "<polyline class=\"agent-trace\" points=\"" << polyline(traces[i], v)
       << "\" fill=\"none\" stroke=\"" << kPalette[i % 10] << "\" stroke-width=\"1.5\"/>\n";
  }
  os << "<polyline class=\"table-trace\" points=\"" << polyline(center, v)
     << "\" fill=\"none\" stroke=\"red\" stroke-width=\"2\"/>\n";
  const Point2 end = last.table.pose.position;
  os << "<circle class=\"final-marker\" cx=\"" << v.x(end.x) << "\" cy=\"" << v.y(end.y)
     << "\" r=\"5\" fill=\"red\"/>\n";
  const Point2 tg = last.target;
  os << "<path class=\"target-marker\" d=\"M " << fmt(v.px(tg.x) - 7.0) << ' ' << v.y(tg.y)
     << " h 14 M " << v.x(tg.x) << ' ' << fmt(v.py(tg.y) - 7.0)
     << " v 14\" stroke=\"black\" stroke-width=\"2\"/>\n";
  os << "</svg>\n";
  return os.str();
}

std::string metrics_svg(const std::string& csv_text) {
  std::istringstream is(csv_text);
  std::string line;
  if (!std::getline(is, line)) fail(ErrorCode::kInvalidArgument, "metrics CSV is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::vector<std::string> cols = split(line, ',');
  auto index_of = [&](const std::string& name) {
    const auto it = std::find(cols.begin(), cols.end(), name);
    if (it == cols.end()) fail(ErrorCode::kInvalidArgument, "metrics CSV lacks column " + name);
    return static_cast<size_t>(it - cols.begin());
  };
  const size_t c_iter = index_of("iter"), c_size = index_of("team_size"),
               c_ret = index_of("mean_return");

  std::map<int, std::vector<Point2>> series;
  Box box;
  int row = 1;
  while (std::getline(is, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> f = split(line, ',');
    if (f.size() != cols.size()) {
      fail(ErrorCode::kInvalidArgument, "metrics CSV row " + std::to_string(row) + " has " +
                                            std::to_string(f.size()) + " fields");
    }
    int size = 0;
    double iter = 0.0, ret = 0.0;
    try {
      iter = std::stod(f[c_iter]);
      size = std::stoi(f[c_size]);
      ret = f[c_ret] == "nan" ? std::numeric_limits<double>::quiet_NaN() : std::stod(f[c_ret]);
    } catch (const std::exception&) {
      fail(ErrorCode::kInvalidArgument, "metrics CSV row " + std::to_string(row) + " is not numeric");
    }
    std::vector<Point2>& s = series[size];
    if (std::isfinite(ret)) {
      s.push_back({iter, ret});
      box.add({iter, ret});
    }
  }
  if (series.empty()) fail(ErrorCode::kInvalidArgument, "metrics CSV has no rows");
  if (!std::isfinite(box.x0)) box.add({0.0, 0.0});
  const View v(box, false);

  std::ostringstream os;
  header(os);
  os << "<line class=\"axis\" x1=\"" << fmt(kMargin) << "\" y1=\"" << fmt(kCanvas - kMargin)
     << "\" x2=\"" << fmt(kCanvas - kMargin) << "\" y2=\"" << fmt(kCanvas - kMargin)
     << "\" stroke=\"black\"/>\n";
  os << "<line class=\"axis\" x1=\"" << fmt(kMargin) << "\" y1=\"" << fmt(kMargin) << "\" x2=\""
     << fmt(kMargin) << "\" y2=\"" << fmt(kCanvas - kMargin) << "\" stroke=\"black\"/>\n";
  int k = 0;
  for (const auto& [size, pts] : series) {
    const char* color = kPalette[k % 10];
    os << "<polyline class=\"team-size\" data-team-size=\"" << size << "\" points=\""
       << polyline(pts, v) << "\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\"/>\n";
    os << "<text x=\"" << fmt(kCanvas - kMargin - 60) << "\" y=\"" << fmt(kMargin + 16.0 * k)
       << "\" fill=\"" << color << "\" font-size=\"12\">n=" << size << "</text>\n";
    ++k;
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace coopcarry
