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

// SVG renderings of trajectories and training curves. Output depends only on
// the input, so identical inputs give identical bytes.

#ifndef COOPCARRY_PLOT_HPP_
#define COOPCARRY_PLOT_HPP_

#include <string>

#include "coopcarry/metrics.hpp"

namespace coopcarry {

// Top-down view: table outline at the first and last pose, one root trace
// per agent, the table-center trace in red, a final-position marker on the
// table center and a target marker.
std::string trajectory_svg(const Trajectory& trajectory);

// mean_return against iteration, one polyline per team size. Accepts the
// metrics CSV written by training; rows with a NaN return are skipped.
std::string metrics_svg(const std::string& csv_text);

}  // namespace coopcarry

#endif  // COOPCARRY_PLOT_HPP_
