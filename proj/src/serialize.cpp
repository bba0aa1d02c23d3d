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

#include "coopcarry/serialize.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "coopcarry/error.hpp"

namespace coopcarry {
namespace {

[[noreturn]] void bad(const std::string& path, const std::string& what) {
  fail(ErrorCode::kConfig, (path.empty() ? std::string("<root>") : path) + ": " + what);
}

std::string index_path(const std::string& path, size_t i) {
  return path + "[" + std::to_string(i) + "]";
}

void read(const Json& j, const std::string& path, double& out) {
  if (!j.is_number()) bad(path, "expected a number");
  out = j.get<double>();
  if (!std::isfinite(out)) bad(path, "must be finite");
}

void read(const Json& j, const std::string& path, int& out) {
  if (j.is_number_integer()) {
    const long long v = j.get<long long>();
    if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
      bad(path, "integer out of range");
    }
    out = static_cast<int>(v);
    return;
  }
  bad(path, "expected an integer");
}

void read(const Json& j, const std::string& path, std::uint64_t& out) {
  if (j.is_number_unsigned()) {
    out = j.get<std::uint64_t>();
  } else if (j.is_number_integer() && j.get<long long>() >= 0) {
    out = static_cast<std::uint64_t>(j.get<long long>());
  } else {
    bad(path, "expected a non-negative integer");
  }
}

void read(const Json& j, const std::string& path, bool& out) {
  if (!j.is_boolean()) bad(path, "expected true or false");
  out = j.get<bool>();
}

void read(const Json& j, const std::string& path, std::string& out) {
  if (!j.is_string()) bad(path, "expected a string");
  out = j.get<std::string>();
}

void read(const Json& j, const std::string& path, Point2& out) {
  if (!j.is_array() || j.size() != 2) bad(path, "expected [x, y]");
  read(j[0], index_path(path, 0), out.x);
  read(j[1], index_path(path, 1), out.y);
}

void read(const Json& j, const std::string& path, Point3& out) {
  if (!j.is_array() || j.size() != 3) bad(path, "expected [x, y, z]");
  read(j[0], index_path(path, 0), out.x);
  read(j[1], index_path(path, 1), out.y);
  read(j[2], index_path(path, 2), out.z);
}

void read(const Json& j, const std::string& path, Stage& out) {
  std::string s;
  read(j, path, s);
  if (s == "formation-only") {
    out = Stage::kFormationOnly;
  } else if (s == "full-task") {
    out = Stage::kFullTask;
  } else {
    bad(path, "expected \"formation-only\" or \"full-task\", got \"" + s + "\"");
  }
}

void read(const Json& j, const std::string& path, TableShape& out) {
  std::string s;
  read(j, path, s);
  try {
    out = table_shape_from_string(s);
  } catch (const Error&) {
    bad(path, "unknown table shape \"" + s + "\"");
  }
}

template <typename T>
void read(const Json& j, const std::string& path, std::vector<T>& out) {
  if (!j.is_array()) bad(path, "expected an array");
  out.assign(j.size(), T{});
  for (size_t i = 0; i < j.size(); ++i) read(j[i], index_path(path, i), out[i]);
}

// Tracks which keys of an object were consumed so the rest can be rejected.
class Fields {
 public:
  Fields(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j.is_object()) bad(path_, "expected an object");
  }

  std::string sub(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  bool has(const char* key) const { return j_.contains(key); }

  const Json* take(const char* key) {
    const auto it = j_.find(key);
    if (it == j_.end()) return nullptr;
    seen_.insert(key);
    return &*it;
  }

  template <typename T>
  void opt(const char* key, T& out) {
    if (const Json* v = take(key)) read(*v, sub(key), out);
  }

  template <typename T>
  void req(const char* key, T& out) {
    if (!has(key)) bad(sub(key), "is required");
    opt(key, out);
  }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!seen_.count(item.key())) bad(sub(item.key()), "unknown key");
    }
  }

 private:
  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

Json point(Point2 p) { return Json::array({p.x, p.y}); }
Json point(Point3 p) { return Json::array({p.x, p.y, p.z}); }

// Runs a validator and prefixes its message with the object's path.
template <typename F>
void validated(const std::string& path, F&& f) {
  try {
    f();
  } catch (const Error& e) {
    bad(path, e.what());
  }
}

}  // namespace

Json parse_json(const std::string& text, const std::string& source) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    // Translate the byte offset into a line and column.
    const size_t offset = std::min(e.byte == 0 ? 0 : e.byte - 1, text.size());
    int line = 1, column = 1;
    for (size_t i = 0; i < offset; ++i) {
      if (text[i] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
    std::string msg = e.what();
    const size_t cut = msg.find("parse error");
    if (cut != std::string::npos) msg = msg.substr(cut);
    fail(ErrorCode::kConfig, source + ": line " + std::to_string(line) + ", column " +
                                 std::to_string(column) + ": " + msg);
  }
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) fail(ErrorCode::kIo, "read failed: " + path);
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path);
  out << text;
  out.flush();
  if (!out) fail(ErrorCode::kIo, "write failed: " + path);
}

Json read_json_file(const std::string& path) {
  return parse_json(read_text_file(path), path);
}

// -- table ----------------------------------------------------------------

Json to_json(const TableSpec& s) {
  Json j{{"shape", to_string(s.shape)}};
  switch (s.shape) {
    case TableShape::kRound: j["diameter"] = s.diameter; break;
    case TableShape::kSquare: j["side"] = s.width; break;
    case TableShape::kRectangle:
      j["width"] = s.width;
      j["depth"] = s.depth;
      break;
    case TableShape::kPolygon: {
      Json v = Json::array();
      for (const Point2& p : s.vertices) v.push_back(point(p));
      j["vertices"] = v;
      break;
    }
  }
  j["tabletop_height"] = s.tabletop_height;
  j["mass_scale"] = s.mass_scale;
  j["n_contact"] = s.n_contact;
  if (!s.density_samples.empty()) {
    Json d = Json::array();
    for (const WeightedPoint& w : s.density_samples) d.push_back({w.p.x, w.p.y, w.w});
    j["density_samples"] = d;
  }
  return j;
}

TableSpec table_spec_from_json(const Json& j, const std::string& path) {
  Fields f(j, path);
  TableSpec s;
  f.req("shape", s.shape);
  switch (s.shape) {
    case TableShape::kRound: f.opt("diameter", s.diameter); break;
    case TableShape::kSquare: {
      double side = s.width;
      f.opt("side", side);
      s.width = s.depth = side;
      break;
    }
    case TableShape::kRectangle:
      s.width = 2.0;
      s.depth = 1.2;
      f.opt("width", s.width);
      f.opt("depth", s.depth);
      break;
    case TableShape::kPolygon: f.req("vertices", s.vertices); break;
  }
  f.opt("tabletop_height", s.tabletop_height);
  f.opt("mass_scale", s.mass_scale);
  f.opt("n_contact", s.n_contact);
  if (const Json* d = f.take("density_samples")) {
    std::vector<Point3> raw;
    read(*d, f.sub("density_samples"), raw);
    for (const Point3& p : raw) s.density_samples.push_back({{p.x, p.y}, p.z});
  }
  f.finish();
  validated(path, [&] { validate(s); });
  return s;
}

// -- env --------------------------------------------------------------------

Json to_json(const RewardWeights& w) {
  return {{"walk_pos", w.walk_pos},   {"walk_vel", w.walk_vel},
          {"face_ang", w.face_ang},   {"form", w.form},
          {"hand_cov", w.hand_cov},   {"contact", w.contact},
          {"lift_cov", w.lift_cov},   {"transport", w.transport},
          {"align", w.align},         {"put", w.put},
          {"k_theta", w.k_theta}};
}

RewardWeights reward_weights_from_json(const Json& j, const std::string& path) {
  Fields f(j, path);
  RewardWeights w;
  f.opt("walk_pos", w.walk_pos);
  f.opt("walk_vel", w.walk_vel);
  f.opt("face_ang", w.face_ang);
  f.opt("form", w.form);
  f.opt("hand_cov", w.hand_cov);
  f.opt("contact", w.contact);
  f.opt("lift_cov", w.lift_cov);
  f.opt("transport", w.transport);
  f.opt("align", w.align);
  f.opt("put", w.put);
  f.opt("k_theta", w.k_theta);
  f.finish();
  return w;
}

Json to_json(const EnvConfig& c) {
  return {{"team_size", c.team_size},     {"table", to_json(c.table)},
          {"episode_len", c.episode_len}, {"dt", c.dt},
          {"spawn_radius", c.spawn_radius}, {"target_min", c.target_min},
          {"target_max", c.target_max},   {"weights", to_json(c.weights)}};
}

EnvConfig env_config_from_json(const Json& j, const std::string& path) {
  Fields f(j, path);
  EnvConfig c;
  f.opt("team_size", c.team_size);
  if (const Json* t = f.take("table")) c.table = table_spec_from_json(*t, f.sub("table"));
  f.opt("episode_len", c.episode_len);
  f.opt("dt", c.dt);
  f.opt("spawn_radius", c.spawn_radius);
  f.opt("target_min", c.target_min);
  f.opt("target_max", c.target_max);
  if (const Json* w = f.take("weights")) {
    c.weights = reward_weights_from_json(*w, f.sub("weights"));
  }
  f.finish();
  validated(path, [&] { c.validate(); });
  return c;
}

// -- network and PPO -------------------------------------------------------

Json to_json(const NetConfig& c) {
  return {{"d_model", c.d_model},
          {"tokenizer_hidden", c.tokenizer_hidden},
          {"stacks", c.stacks},
          {"heads", c.heads},
          {"ff_width", c.ff_width},
          {"head_hidden", c.head_hidden},
          {"init_log_std", c.init_log_std}};
}

NetConfig net_config_from_json(const Json& j, const std::string& path) {
  Fields f(j, path);
  NetConfig c;
  f.opt("d_model", c.d_model);
  f.opt("tokenizer_hidden", c.tokenizer_hidden);
  f.opt("stacks", c.stacks);
  f.opt("heads", c.heads);
  f.opt("ff_width", c.ff_width);
  f.opt("head_hidden", c.head_hidden);
  f.opt("init_log_std", c.init_log_std);
  f.finish();
  validated(path, [&] { c.validate(); });
  return c;
}

Json to_json(const PPOConfig& c) {
  Json mix = Json::array();
  for (const TeamSizeWeight& m : c.team_size_mix) {
    mix.push_back({{"team_size", m.team_size}, {"weight", m.weight}});
  }
  return {{"horizon", c.horizon},
          {"lr", c.lr},
          {"clip", c.clip},
          {"gamma", c.gamma},
          {"lambda", c.lambda},
          {"n_envs", c.n_envs},
          {"minibatch", c.minibatch},
          {"epochs", c.epochs},
          {"norm_eps", c.norm_eps},
          {"max_grad_norm", c.max_grad_norm},
          {"task_weight", c.reward_weights.task},
          {"style_weight", c.reward_weights.style},
          {"team_size_mix", mix},
          {"stage", to_string(c.stage)},
          {"style", c.style},
          {"disc_hidden", c.disc_hidden},
          {"disc_lr", c.disc_lr},
          {"disc_batch", c.disc_batch}};
}

PPOConfig ppo_config_from_json(const Json& j, const std::string& path) {
  Fields f(j, path);
  PPOConfig c;
  f.opt("horizon", c.horizon);
  f.opt("lr", c.lr);
  f.opt("clip", c.clip);
  f.opt("gamma", c.gamma);
  f.opt("lambda", c.lambda);
  f.opt("n_envs", c.n_envs);
  f.opt("minibatch", c.minibatch);
  f.opt("epochs", c.epochs);
  f.opt("norm_eps", c.norm_eps);
  f.opt("max_grad_norm", c.max_grad_norm);
  f.opt("task_weight", c.reward_weights.task);
  f.opt("style_weight", c.reward_weights.style);
  if (const Json* mix = f.take("team_size_mix")) {
    const std::string mp = f.sub("team_size_mix");
    if (!mix->is_array()) bad(mp, "expected an array");
    c.team_size_mix.clear();
    for (size_t i = 0; i < mix->size(); ++i) {
      const std::string ip = index_path(mp, i);
      TeamSizeWeight w;
      if ((*mix)[i].is_number_integer()) {
        read((*mix)[i], ip, w.team_size);
      } else {
        Fields g((*mix)[i], ip);
        g.req("team_size", w.team_size);
        g.opt("weight", w.weight);
        g.finish();
      }
      c.team_size_mix.push_back(w);
    }
  }
  f.opt("stage", c.stage);
  f.opt("style", c.style);
  f.opt("disc_hidden", c.disc_hidden);
  f.opt("disc_lr", c.disc_lr);
  f.opt("disc_batch", c.disc_batch);
  f.finish();
  validated(path, [&] { c.validate(); });
  return c;
}

Json to_json(const RunConfig& c) {
  Json shapes = Json::array();
  for (TableShape s : c.shapes) shapes.push_back(to_string(s));
  return {{"seed", c.seed},
          {"iterations", c.iterations},
          {"checkpoint_every", c.checkpoint_every},
          {"checkpoint_dir", c.checkpoint_dir},
          {"metrics_path", c.metrics_path},
          {"shapes", shapes},
          {"env", to_json(c.env)},
          {"net", to_json(c.net)},
          {"ppo", to_json(c.ppo)}};
}

RunConfig run_config_from_json(const Json& j, const RunConfig& base) {
  Fields f(j, "");
  RunConfig c = base;
  f.opt("seed", c.seed);
  f.opt("iterations", c.iterations);
  f.opt("checkpoint_every", c.checkpoint_every);
  f.opt("checkpoint_dir", c.checkpoint_dir);
  f.opt("metrics_path", c.metrics_path);
  f.opt("shapes", c.shapes);
  // Sections are merged key by key over the base values.
  auto merge = [&](const char* key, Json base_json, auto parse) {
    if (const Json* v = f.take(key)) {
      if (!v->is_object()) bad(key, "expected an object");
      if (base_json.contains("table") && v->contains("table")) base_json.erase("table");
      base_json.update(*v);
      parse(base_json);
    }
  };
  merge("env", to_json(c.env), [&](const Json& m) { c.env = env_config_from_json(m, "env"); });
  merge("net", to_json(c.net), [&](const Json& m) { c.net = net_config_from_json(m, "net"); });
  merge("ppo", to_json(c.ppo), [&](const Json& m) { c.ppo = ppo_config_from_json(m, "ppo"); });
  f.finish();
  c.net.object_dim = NetConfig::object_dim_for(c.env.table.n_contact);
  c.env.stage = c.ppo.stage;
  validated("", [&] { c.validate(); });
  return c;
}

RunConfig load_run_config(const std::string& path, const RunConfig& base) {
  const Json j = read_json_file(path);
  try {
    return run_config_from_json(j, base);
  } catch (const Error& e) {
    fail(e.code(), path + ": " + e.what());
  }
}

Json to_json(const EvalConfig& c) {
  Json shapes = Json::array();
  for (TableShape s : c.shapes) shapes.push_back(to_string(s));
  return {{"team_sizes", c.team_sizes}, {"shapes", shapes},     {"episodes", c.episodes},
          {"seed", c.seed},             {"both_hands", c.both_hands}, {"env", to_json(c.env)}};
}

namespace {

EnvConfig merged_env(const EnvConfig& base, const Json& overlay, const std::string& path) {
  if (!overlay.is_object()) bad(path, "expected an object");
  Json merged = to_json(base);
  merged.update(overlay);
  EnvConfig c = env_config_from_json(merged, path);
  c.stage = base.stage;
  return c;
}

}  // namespace

EvalConfig eval_config_from_json(const Json& j, const EvalConfig& base) {
  Fields f(j, "");
  EvalConfig c = base;
  f.opt("team_sizes", c.team_sizes);
  f.opt("shapes", c.shapes);
  f.opt("episodes", c.episodes);
  f.opt("seed", c.seed);
  f.opt("both_hands", c.both_hands);
  if (const Json* e = f.take("env")) c.env = merged_env(c.env, *e, "env");
  f.finish();
  validated("", [&] { c.validate(); });
  return c;
}

EnvConfig DemoConfig::episode_config() const {
  EnvConfig c = env;
  TableSpec t = standard_table(shape);
  t.mass_scale = env.table.mass_scale;
  t.n_contact = env.table.n_contact;
  t.tabletop_height = env.table.tabletop_height;
  c.table = t;
  c.team_size = team_size;
  c.seed = seed;
  return c;
}

DemoConfig demo_config_from_json(const Json& j, const DemoConfig& base) {
  Fields f(j, "");
  DemoConfig c = base;
  f.opt("team_size", c.team_size);
  f.opt("shape", c.shape);
  f.opt("seed", c.seed);
  if (const Json* e = f.take("env")) c.env = merged_env(c.env, *e, "env");
  f.finish();
  validated("", [&] { c.episode_config().validate(); });
  return c;
}

// -- world ------------------------------------------------------------------

Json to_json(const AgentState& a) {
  return {{"root", point(a.root)},
          {"heading", a.heading},
          {"velocity", point(a.velocity)},
          {"heading_rate", a.heading_rate},
          {"hands", Json::array({point(a.hands[0]), point(a.hands[1])})},
          {"hand_velocities",
           Json::array({point(a.hand_velocities[0]), point(a.hand_velocities[1])})}};
}

AgentState agent_state_from_json(const Json& j, const std::string& path) {
  Fields f(j, path);
  AgentState a;
  f.req("root", a.root);
  f.opt("heading", a.heading);
  f.opt("velocity", a.velocity);
  f.opt("heading_rate", a.heading_rate);
  a.hands = rest_hands(a.root, a.heading);
  auto pair = [&](const char* key, std::array<Point3, 2>& out) {
    if (const Json* v = f.take(key)) {
      std::vector<Point3> pts;
      read(*v, f.sub(key), pts);
      if (pts.size() != 2) bad(f.sub(key), "expected [left, right]");
      out = {pts[0], pts[1]};
    }
  };
  pair("hands", a.hands);
  pair("hand_velocities", a.hand_velocities);
  f.finish();
  return a;
}

Json to_json(const WorldState& w) {
  Json agents = Json::array();
  for (const AgentState& a : w.agents) agents.push_back(to_json(a));
  const TableState& t = w.table;
  return {{"agents", agents},
          {"table",
           {{"position", point(t.pose.position)},
            {"yaw", t.pose.yaw},
            {"z", t.z},
            {"velocity", point(t.velocity)},
            {"yaw_rate", t.yaw_rate},
            {"gripped", t.gripped}}},
          {"target", point(w.target)},
          {"step", w.step}};
}

WorldState world_state_from_json(const Json& j, const std::string& path) {
  Fields f(j, path);
  WorldState w;
  if (const Json* agents = f.take("agents")) {
    const std::string ap = f.sub("agents");
    if (!agents->is_array()) bad(ap, "expected an array");
    for (size_t i = 0; i < agents->size(); ++i) {
      w.agents.push_back(agent_state_from_json((*agents)[i], index_path(ap, i)));
    }
  }
  if (const Json* t = f.take("table")) {
    Fields g(*t, f.sub("table"));
    g.opt("position", w.table.pose.position);
    g.opt("yaw", w.table.pose.yaw);
    g.opt("z", w.table.z);
    g.opt("velocity", w.table.velocity);
    g.opt("yaw_rate", w.table.yaw_rate);
    g.opt("gripped", w.table.gripped);
    g.finish();
  }
  f.opt("target", w.target);
  f.opt("step", w.step);
  f.finish();
  return w;
}

Json to_json(const RewardBreakdown& b) {
  return {{"walk_pos", b.walk_pos},
          {"walk_vel", b.walk_vel},
          {"walk_face", b.walk_face},
          {"ang", b.ang},
          {"cov", b.cov},
          {"form", b.form},
          {"hand",
           {{"prox", b.hand.prox},
            {"above", b.hand.above},
            {"sep", b.hand.sep},
            {"same_z", b.hand.same_z},
            {"hand", b.hand.hand}}},
          {"contact", b.contact},
          {"lift", b.lift},
          {"transport", b.transport},
          {"align", b.align},
          {"put",
           {{"release", b.put.release}, {"vel", b.put.vel}, {"put", b.put.put}}},
          {"task", b.task}};
}

Json to_json(const PPOLosses& l) {
  return {{"policy", l.policy},
          {"value", l.value},
          {"clip_fraction", l.clip_fraction},
          {"mean_ratio", l.mean_ratio}};
}

Json to_json(const IterationStats& s) {
  Json sizes = Json::array();
  for (const TeamSizeStats& t : s.per_team_size) {
    sizes.push_back({{"team_size", t.team_size},
                     {"episodes", t.episodes},
                     {"mean_return", t.has_return ? Json(t.mean_return) : Json(nullptr)},
                     {"mean_task_return", t.has_return ? Json(t.mean_task_return) : Json(nullptr)},
                     {"mean_task_reward", t.mean_task_reward},
                     {"mean_style_reward", t.mean_style_reward}});
  }
  return {{"iteration", s.iteration},
          {"transitions", s.transitions},
          {"per_team_size", sizes},
          {"d_full_acc", s.d_full_acc},
          {"d_mask_acc", s.d_mask_acc},
          {"d_full_loss", s.d_full_loss},
          {"d_mask_loss", s.d_mask_loss},
          {"losses", to_json(s.losses)},
          {"first_losses", to_json(s.first_losses)}};
}

// -- scenes -------------------------------------------------------------------

WorldState Scene::world() const {
  WorldState w;
  w.agents = agents;
  w.table.pose = table_pose;
  w.table.z = table_z;
  w.target = target;
  return w;
}

Scene scene_from_json(const Json& j) {
  Fields f(j, "");
  Scene s;
  if (!f.has("table")) bad("table", "is required");
  s.table = table_spec_from_json(*f.take("table"), "table");
  s.table_z = s.table.tabletop_height;
  f.req("target", s.target);
  if (const Json* pose = f.take("table_pose")) {
    Fields g(*pose, "table_pose");
    g.opt("position", s.table_pose.position);
    g.opt("yaw", s.table_pose.yaw);
    g.finish();
  }
  f.opt("table_z", s.table_z);
  if (!f.has("agents")) bad("agents", "is required");
  const Json& agents = *f.take("agents");
  if (!agents.is_array() || agents.empty()) bad("agents", "expected a non-empty array");
  for (size_t i = 0; i < agents.size(); ++i) {
    s.agents.push_back(agent_state_from_json(agents[i], index_path("agents", i)));
  }
  f.finish();
  return s;
}

Json to_json(const Scene& s) {
  Json agents = Json::array();
  for (const AgentState& a : s.agents) {
    agents.push_back({{"root", point(a.root)},
                      {"heading", a.heading},
                      {"hands", Json::array({point(a.hands[0]), point(a.hands[1])})}});
  }
  return {{"table", to_json(s.table)},
          {"table_pose", {{"position", point(s.table_pose.position)}, {"yaw", s.table_pose.yaw}}},
          {"table_z", s.table_z},
          {"target", point(s.target)},
          {"agents", agents}};
}

Scene load_scene(const std::string& path) {
  const Json j = read_json_file(path);
  try {
    return scene_from_json(j);
  } catch (const Error& e) {
    fail(e.code(), path + ": " + e.what());
  }
}

// -- trajectories -------------------------------------------------------------

Json to_json(const Trajectory& t) {
  Json states = Json::array();
  for (const WorldState& w : t.states) states.push_back(to_json(w));
  return {{"table", to_json(t.table)}, {"dt", t.dt}, {"states", states}};
}

Trajectory trajectory_from_json(const Json& j) {
  Fields f(j, "");
  Trajectory t;
  if (!f.has("table")) bad("table", "is required");
  t.table = table_spec_from_json(*f.take("table"), "table");
  f.opt("dt", t.dt);
  if (!f.has("states")) bad("states", "is required");
  const Json& states = *f.take("states");
  if (!states.is_array()) bad("states", "expected an array");
  for (size_t i = 0; i < states.size(); ++i) {
    t.states.push_back(world_state_from_json(states[i], index_path("states", i)));
  }
  f.finish();
  return t;
}

}  // namespace coopcarry
