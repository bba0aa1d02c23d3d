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

// JSON forms of configurations, scenes, world states and trajectories.
//
// Readers reject unknown keys and report the offending field as a dotted
// path (for example "ppo.team_size_mix[1].weight"). Every error is an
// Error with code kConfig, except malformed JSON text, which also carries
// the line and column.

#ifndef COOPCARRY_SERIALIZE_HPP_
#define COOPCARRY_SERIALIZE_HPP_

#include <string>
#include <vector>

#include "coopcarry/env.hpp"
#include "coopcarry/metrics.hpp"
#include "coopcarry/policy.hpp"
#include "coopcarry/rewards.hpp"
#include "coopcarry/train.hpp"
#include "coopcarry/world.hpp"
#include "json.hpp"

namespace coopcarry {

using Json = nlohmann::json;

// Parses text, turning syntax errors into "line L, column C: ..." messages.
Json parse_json(const std::string& text, const std::string& source);
Json read_json_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

Json to_json(const TableSpec& spec);
TableSpec table_spec_from_json(const Json& j, const std::string& path = "table");

Json to_json(const RewardWeights& w);
RewardWeights reward_weights_from_json(const Json& j, const std::string& path);

// The stage and seed are owned by RunConfig and are not part of this form.
Json to_json(const EnvConfig& c);
EnvConfig env_config_from_json(const Json& j, const std::string& path = "env");

Json to_json(const NetConfig& c);
NetConfig net_config_from_json(const Json& j, const std::string& path = "net");

Json to_json(const PPOConfig& c);
PPOConfig ppo_config_from_json(const Json& j, const std::string& path = "ppo");

// Missing keys keep the defaults of `base`. The result is validated.
Json to_json(const RunConfig& c);
RunConfig run_config_from_json(const Json& j, const RunConfig& base = {});
RunConfig load_run_config(const std::string& path, const RunConfig& base = {});

// {team_sizes, shapes, episodes, seed, both_hands, env}; missing keys keep
// the values of `base`, and "env" merges over base.env key by key.
Json to_json(const EvalConfig& c);
EvalConfig eval_config_from_json(const Json& j, const EvalConfig& base = {});

// One demonstration episode.
struct DemoConfig {
  int team_size = 4;
  TableShape shape = TableShape::kSquare;
  std::uint64_t seed = 0;
  EnvConfig env;  // template; team size and table come from the fields above

  EnvConfig episode_config() const;
};
DemoConfig demo_config_from_json(const Json& j, const DemoConfig& base = {});

Json to_json(const AgentState& a);
AgentState agent_state_from_json(const Json& j, const std::string& path);
Json to_json(const WorldState& w);
WorldState world_state_from_json(const Json& j, const std::string& path = "state");

Json to_json(const RewardBreakdown& b);
Json to_json(const PPOLosses& l);
Json to_json(const IterationStats& s);

// A static configuration for reward inspection.
struct Scene {
  TableSpec table;
  Pose2 table_pose;
  double table_z = 0.82;
  Point2 target;
  std::vector<AgentState> agents;

  WorldState world() const;
};

// {table, target: [x, y], agents: [{root, heading, hands}]}; optional
// table_pose {position, yaw} and table_z. Omitted hands take the rest pose.
Scene scene_from_json(const Json& j);
Json to_json(const Scene& s);
Scene load_scene(const std::string& path);

Json to_json(const Trajectory& t);
Trajectory trajectory_from_json(const Json& j);

}  // namespace coopcarry

#endif  // COOPCARRY_SERIALIZE_HPP_
