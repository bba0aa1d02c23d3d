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

// Command-line front end. Everything goes through the C API.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "coopcarry/coopcarry.h"
#include "json.hpp"

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

// Raised by helpers below; main turns it into a message and exit status 1.
struct Failure {
  std::string message;
};

void check(cc_status s, const std::string& what) {
  if (s != CC_OK) {
    throw Failure{what + ": " + cc_status_name(s) + ": " + cc_last_error()};
  }
}

// Owns a string returned by the library.
struct Owned {
  char* p = nullptr;
  ~Owned() { cc_string_free(p); }
  std::string str() const { return p ? std::string(p) : std::string(); }
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Failure{"cannot read " + path};
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  out.flush();
  if (!out) throw Failure{"cannot write " + path.string()};
}

// Writes to `path`, or to stdout when it is empty.
void emit(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
    if (!text.empty() && text.back() != '\n') std::cout << '\n';
  } else {
    write_file(path, text);
  }
}

json shapes_json(const std::vector<std::string>& shapes) {
  json a = json::array();
  for (const std::string& s : shapes) a.push_back(s);
  return a;
}

struct Options {
  std::string config;
  std::string preset = "default";
  long long seed = -1;
  int iters = -1;
  std::string stage;
  std::vector<int> team_sizes;
  std::vector<std::string> shapes;
  int episodes = -1;
  std::string policy = "checkpoint";
  std::string checkpoint;
  std::string out;
  std::string resume;
  bool verbose = false;
  bool both_hands = false;
  std::string input;
};

// -- train ------------------------------------------------------------------

int on_iteration(const char* stats_json, void* user) {
  const bool verbose = *static_cast<bool*>(user);
  const json s = json::parse(stats_json);
  if (verbose) {
    std::cerr << stats_json << '\n';
  } else {
    std::cerr << "iter " << s.at("iteration").get<int>();
    for (const json& t : s.at("per_team_size")) {
      std::cerr << "  n=" << t.at("team_size").get<int>() << " return=";
      if (t.at("mean_return").is_null()) {
        std::cerr << '-';
      } else {
        std::cerr << t.at("mean_return").get<double>();
      }
    }
    std::cerr << '\n';
  }
  return 0;
}

int cmd_train(const Options& o) {
  json overlay = json::object();
  Owned base;
  if (!o.resume.empty() && o.config.empty()) {
    if (!fs::exists(o.resume)) throw Failure{"checkpoint not found: " + o.resume};
    check(cc_checkpoint_config(o.resume.c_str(), &base.p), "reading " + o.resume);
    overlay = json::parse(base.str());
  } else if (!o.config.empty()) {
    overlay = json::parse(read_file(o.config), nullptr, false);
    if (overlay.is_discarded()) {
      // Let the library produce the line/column diagnostic.
      Owned ignored;
      check(cc_config_resolve(o.preset.c_str(), read_file(o.config).c_str(), &ignored.p),
            o.config);
    }
  }
  if (o.seed >= 0) overlay["seed"] = o.seed;
  if (o.iters >= 0) overlay["iterations"] = o.iters;
  if (!o.stage.empty()) overlay["ppo"]["stage"] = o.stage;
  if (!o.team_sizes.empty()) overlay["ppo"]["team_size_mix"] = o.team_sizes;
  if (!o.shapes.empty()) overlay["shapes"] = shapes_json(o.shapes);
  const fs::path out = o.out.empty() ? fs::path("runs/train") : fs::path(o.out);
  overlay["metrics_path"] = (out / "metrics.csv").string();
  overlay["checkpoint_dir"] = (out / "checkpoints").string();

  Owned resolved;
  check(cc_config_resolve(o.preset.c_str(), overlay.dump().c_str(), &resolved.p),
        o.config.empty() ? "config" : o.config);
  fs::create_directories(out);
  write_file(out / "config.json", resolved.str() + "\n");

  cc_trainer* raw = nullptr;
  check(cc_trainer_create(resolved.p, &raw), "creating trainer");
  std::unique_ptr<cc_trainer, void (*)(cc_trainer*)> trainer(raw, cc_trainer_destroy);
  if (!o.resume.empty()) {
    if (!fs::exists(o.resume)) throw Failure{"checkpoint not found: " + o.resume};
    check(cc_trainer_resume(trainer.get(), o.resume.c_str()), "resuming from " + o.resume);
  }
  bool verbose = o.verbose;
  check(cc_trainer_run(trainer.get(), on_iteration, &verbose), "training");
  std::cerr << "wrote " << (out / "metrics.csv").string() << " and "
            << (out / "checkpoints" / "latest.ckpt").string() << '\n';
  return 0;
}

// -- eval / demo --------------------------------------------------------------

json env_overlay(const Options& o) {
  json env = json::object();
  if (!o.config.empty()) {
    json j = json::parse(read_file(o.config), nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw Failure{o.config + ": not a JSON object"};
    env = j.contains("env") ? j.at("env") : j;
  }
  return env;
}

int cmd_eval(const Options& o) {
  json cfg = json::object();
  if (!o.team_sizes.empty()) cfg["team_sizes"] = o.team_sizes;
  if (!o.shapes.empty()) cfg["shapes"] = shapes_json(o.shapes);
  if (o.episodes >= 0) cfg["episodes"] = o.episodes;
  if (o.seed >= 0) cfg["seed"] = o.seed;
  if (o.both_hands) cfg["both_hands"] = true;
  const json env = env_overlay(o);
  if (!env.empty()) cfg["env"] = env;
  if (o.policy == "checkpoint") {
    if (o.checkpoint.empty()) throw Failure{"--policy checkpoint needs --checkpoint PATH"};
    if (!fs::exists(o.checkpoint)) throw Failure{"checkpoint not found: " + o.checkpoint};
  }

  cc_report* raw = nullptr;
  check(cc_evaluate(cfg.dump().c_str(), o.policy.c_str(), o.checkpoint.c_str(), &raw),
        "evaluation");
  std::unique_ptr<cc_report, void (*)(cc_report*)> report(raw, cc_report_destroy);
  Owned csv, js, eps;
  check(cc_report_csv(report.get(), &csv.p), "report");
  if (o.out.empty()) {
    std::cout << csv.str();
    return 0;
  }
  check(cc_report_json(report.get(), &js.p), "report");
  check(cc_report_episodes_jsonl(report.get(), &eps.p), "report");
  const fs::path out(o.out);
  write_file(out / "report.csv", csv.str());
  write_file(out / "report.json", js.str());
  write_file(out / "episodes.jsonl", eps.str());
  std::cerr << "wrote " << (out / "report.csv").string() << ", report.json, episodes.jsonl\n";
  return 0;
}

int cmd_demo(const Options& o) {
  json cfg = json::object();
  if (!o.team_sizes.empty()) {
    if (o.team_sizes.size() != 1) throw Failure{"demo takes a single --team-sizes value"};
    cfg["team_size"] = o.team_sizes[0];
  }
  if (!o.shapes.empty()) {
    if (o.shapes.size() != 1) throw Failure{"demo takes a single --shapes value"};
    cfg["shape"] = o.shapes[0];
  }
  if (o.seed >= 0) cfg["seed"] = o.seed;
  const json env = env_overlay(o);
  if (!env.empty()) cfg["env"] = env;
  const std::string policy = o.policy == "checkpoint" && o.checkpoint.empty() ? "oracle" : o.policy;
  if (policy == "checkpoint" && !fs::exists(o.checkpoint)) {
    throw Failure{"checkpoint not found: " + o.checkpoint};
  }
  Owned result;
  check(cc_demo(cfg.dump().c_str(), policy.c_str(), o.checkpoint.c_str(), &result.p), "demo");
  const json r = json::parse(result.str());
  std::cerr << r.at("metrics").dump() << '\n';
  emit(o.out, result.str());
  return 0;
}

// -- reward-check / plot --------------------------------------------------------

int cmd_reward_check(const Options& o) {
  const std::string scene = read_file(o.input);
  Owned result;
  check(cc_reward_check(scene.c_str(), o.verbose ? 1 : 0, &result.p), o.input);
  emit(o.out, result.str());
  return 0;
}

int cmd_plot(const Options& o) {
  const std::string text = read_file(o.input);
  Owned svg;
  // A metrics CSV starts with its header; anything else is a trajectory.
  if (text.rfind("iter,", 0) == 0) {
    check(cc_plot_metrics_svg(text.c_str(), &svg.p), o.input);
  } else {
    check(cc_plot_trajectory_svg(text.c_str(), &svg.p), o.input);
  }
  emit(o.out, svg.str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cooperative table carrying: training, evaluation and reward inspection.\n"
               "COOPCARRY_THREADS caps the number of worker threads."};
  app.set_version_flag("--version", std::string(cc_version()));
  app.require_subcommand(1);
  Options o;

  auto add_seed = [&](CLI::App* c) {
    c->add_option("--seed", o.seed, "Base random seed")->check(CLI::NonNegativeNumber);
  };
  auto add_grid = [&](CLI::App* c, const char* sizes_help, const char* shapes_help) {
    c->add_option("--team-sizes", o.team_sizes, sizes_help)->delimiter(',');
    c->add_option("--shapes", o.shapes, shapes_help)
        ->delimiter(',')
        ->check(CLI::IsMember({"round", "square", "rectangle"}));
  };
  auto add_policy = [&](CLI::App* c) {
    c->add_option("--policy", o.policy, "Action source")
        ->check(CLI::IsMember({"checkpoint", "oracle", "random", "zero"}))
        ->capture_default_str();
    c->add_option("--checkpoint", o.checkpoint, "Checkpoint file for --policy checkpoint");
  };

  CLI::App* train = app.add_subcommand("train", "Train a policy with PPO");
  train->add_option("--config", o.config, "Run configuration JSON (merged over the preset)");
  train->add_option("--preset", o.preset, "Base configuration: default or desk")
      ->check(CLI::IsMember({"default", "desk"}))
      ->capture_default_str();
  add_seed(train);
  train->add_option("--iters", o.iters, "Total number of iterations")->check(CLI::NonNegativeNumber);
  train->add_option("--stage", o.stage, "Curriculum stage")
      ->check(CLI::IsMember({"formation-only", "full-task"}));
  add_grid(train, "Team sizes mixed during training, equal weights",
           "Table shapes drawn during training");
  train->add_option("--out", o.out, "Output directory (metrics.csv, checkpoints/, config.json)");
  train->add_option("--resume", o.resume, "Checkpoint to continue from");
  train->add_flag("--verbose", o.verbose, "Print full per-iteration statistics as JSON");

  CLI::App* eval = app.add_subcommand("eval", "Evaluate a policy over a team-size x shape grid");
  add_policy(eval);
  add_grid(eval, "Team sizes to evaluate (default 2,4,8)", "Table shapes (default all three)");
  eval->add_option("--episodes", o.episodes, "Episodes per grid cell (default 100)")
      ->check(CLI::PositiveNumber);
  add_seed(eval);
  eval->add_option("--config", o.config, "Environment settings JSON (an \"env\" object or bare fields)");
  eval->add_flag("--both-hands", o.both_hands, "Count cooperative time only with both hands in contact");
  eval->add_option("--out", o.out, "Directory for report.csv, report.json, episodes.jsonl (default: CSV to stdout)");

  CLI::App* demo = app.add_subcommand("demo", "Run one episode and write its trajectory");
  add_policy(demo);
  add_grid(demo, "Team size (one value, default 4)", "Table shape (one value, default square)");
  add_seed(demo);
  demo->add_option("--config", o.config, "Environment settings JSON (an \"env\" object or bare fields)");
  demo->add_option("--out", o.out, "Trajectory JSON path (default stdout)");

  CLI::App* reward = app.add_subcommand("reward-check", "Score every reward term for a static scene");
  reward->add_option("scene", o.input, "Scene JSON file")->required()->check(CLI::ExistingFile);
  reward->add_flag("--verbose", o.verbose, "Include principal axes, support hull and per-axis coverage");
  reward->add_option("--out", o.out, "Output path (default stdout)");

  CLI::App* plot = app.add_subcommand("plot", "Render a trajectory or metrics CSV as SVG");
  plot->add_option("input", o.input, "Trajectory JSON or metrics CSV")->required()->check(CLI::ExistingFile);
  plot->add_option("--out", o.out, "SVG path (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) return cmd_train(o);
    if (*eval) return cmd_eval(o);
    if (*demo) return cmd_demo(o);
    if (*reward) return cmd_reward_check(o);
    if (*plot) return cmd_plot(o);
  } catch (const Failure& f) {
    std::cerr << "error: " << f.message << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
