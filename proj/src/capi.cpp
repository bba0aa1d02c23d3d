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

#include "coopcarry/coopcarry.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <memory>
#include <new>
#include <string>

#include "coopcarry/error.hpp"
#include "coopcarry/geometry.hpp"
#include "coopcarry/metrics.hpp"
#include "coopcarry/plot.hpp"
#include "coopcarry/rewards.hpp"
#include "coopcarry/serialize.hpp"
#include "coopcarry/train.hpp"

using namespace coopcarry;

struct cc_trainer {
  std::unique_ptr<Trainer> trainer;
};

struct cc_report {
  AggregateReport report;
};

namespace {

thread_local std::string g_last_error;

cc_status set_error(cc_status s, const std::string& msg) {
  g_last_error = msg;
  return s;
}

// Runs `f`, mapping exceptions to status codes and the last-error message.
template <typename F>
cc_status guarded(F&& f) {
  try {
    f();
    return CC_OK;
  } catch (const Error& e) {
    return set_error(static_cast<cc_status>(static_cast<int>(e.code())), e.what());
  } catch (const nlohmann::json::exception& e) {
    return set_error(CC_CONFIG, e.what());
  } catch (const std::bad_alloc&) {
    return set_error(CC_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return set_error(CC_INTERNAL, e.what());
  } catch (...) {
    return set_error(CC_INTERNAL, "unknown failure");
  }
}

void require(const void* p, const char* name) {
  if (p == nullptr) fail(ErrorCode::kInvalidArgument, std::string(name) + " must not be null");
}

char* dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

Json parse_optional(const char* text, const char* source) {
  if (text == nullptr || *text == '\0') return Json::object();
  return parse_json(text, source);
}

Json point(Point2 p) { return Json::array({p.x, p.y}); }

ControllerFactory make_factory(const char* policy, const char* checkpoint_path,
                               EnvConfig& env_template) {
  const std::string kind = policy == nullptr ? "oracle" : policy;
  if (kind == "oracle") return [] { return std::make_unique<OracleController>(); };
  if (kind == "zero") return [] { return std::make_unique<ZeroController>(); };
  if (kind == "random") {
    return [] { return std::make_unique<RandomController>(0); };
  }
  if (kind == "checkpoint") {
    if (checkpoint_path == nullptr || *checkpoint_path == '\0') {
      fail(ErrorCode::kInvalidArgument, "policy \"checkpoint\" needs a checkpoint path");
    }
    LoadedPolicy loaded = load_policy(checkpoint_path);
    // The policy only understands observations of the stage it was trained on.
    env_template.stage = loaded.config.ppo.stage;
    if (env_template.table.n_contact != loaded.config.env.table.n_contact) {
      fail(ErrorCode::kInvalidArgument,
           "checkpoint was trained with n_contact = " +
               std::to_string(loaded.config.env.table.n_contact));
    }
    std::shared_ptr<const ActorCritic> model = loaded.model;
    std::shared_ptr<const ObsNormalizer> norm = loaded.normalizer;
    return [model, norm] { return std::make_unique<PolicyController>(model, norm); };
  }
  fail(ErrorCode::kInvalidArgument,
       "unknown policy \"" + kind + "\" (expected checkpoint, oracle, random or zero)");
}

RunConfig preset(const char* name) {
  const std::string p = name == nullptr || *name == '\0' ? "default" : name;
  if (p == "default") return RunConfig{};
  if (p == "desk") return RunConfig::desk_preset();
  fail(ErrorCode::kInvalidArgument, "unknown preset \"" + p + "\" (expected default or desk)");
}

}  // namespace

extern "C" {

const char* cc_version(void) { return "0.1.0"; }

const char* cc_last_error(void) { return g_last_error.c_str(); }

const char* cc_status_name(cc_status status) {
  switch (status) {
    case CC_OK: return "ok";
    case CC_INVALID_ARGUMENT: return "invalid argument";
    case CC_INVALID_GEOMETRY: return "invalid geometry";
    case CC_IO: return "i/o error";
    case CC_STATE: return "invalid state";
    case CC_NUMERIC: return "numeric error";
    case CC_CONFIG: return "configuration error";
    case CC_INTERNAL: return "internal error";
  }
  return "unknown status";
}

void cc_string_free(char* s) { std::free(s); }

cc_status cc_config_resolve(const char* preset_name, const char* overlay, char** out_json) {
  return guarded([&] {
    require(out_json, "out_json");
    const RunConfig c = run_config_from_json(parse_optional(overlay, "config"), preset(preset_name));
    *out_json = dup(to_json(c).dump(2));
  });
}

cc_status cc_checkpoint_config(const char* path, char** out_json) {
  return guarded([&] {
    require(path, "path");
    require(out_json, "out_json");
    *out_json = dup(to_json(load_policy(path).config).dump(2));
  });
}

cc_status cc_trainer_create(const char* run_config_json, cc_trainer** out) {
  return guarded([&] {
    require(out, "out");
    *out = nullptr;
    const RunConfig c = run_config_from_json(parse_optional(run_config_json, "config"));
    auto t = std::make_unique<cc_trainer>();
    t->trainer = std::make_unique<Trainer>(c);
    *out = t.release();
  });
}

void cc_trainer_destroy(cc_trainer* trainer) { delete trainer; }

cc_status cc_trainer_resume(cc_trainer* trainer, const char* checkpoint_path) {
  return guarded([&] {
    require(trainer, "trainer");
    require(checkpoint_path, "checkpoint_path");
    trainer->trainer->load_checkpoint(checkpoint_path);
  });
}

cc_status cc_trainer_iterate(cc_trainer* trainer, char** stats_json) {
  return guarded([&] {
    require(trainer, "trainer");
    const IterationStats s = trainer->trainer->iterate();
    if (stats_json != nullptr) *stats_json = dup(to_json(s).dump());
  });
}

cc_status cc_trainer_run(cc_trainer* trainer, cc_iteration_callback callback, void* user) {
  return guarded([&] {
    require(trainer, "trainer");
    trainer->trainer->run([&](const IterationStats& s) {
      if (callback != nullptr && callback(to_json(s).dump().c_str(), user) != 0) {
        fail(ErrorCode::kState, "run stopped by callback after iteration " +
                                    std::to_string(s.iteration));
      }
    });
  });
}

cc_status cc_trainer_save(const cc_trainer* trainer, const char* path) {
  return guarded([&] {
    require(trainer, "trainer");
    require(path, "path");
    trainer->trainer->save_checkpoint(path);
  });
}

int cc_trainer_iteration(const cc_trainer* trainer) {
  return trainer == nullptr ? -1 : trainer->trainer->iteration();
}

cc_status cc_random_task_return(const char* run_config_json, int episodes_per_env, double* out) {
  return guarded([&] {
    require(out, "out");
    if (episodes_per_env < 1) fail(ErrorCode::kInvalidArgument, "episodes_per_env must be >= 1");
    const RunConfig c = run_config_from_json(parse_optional(run_config_json, "config"));
    *out = random_policy_task_return(c, episodes_per_env);
  });
}

cc_status cc_evaluate(const char* eval_json, const char* policy, const char* checkpoint_path,
                      cc_report** out) {
  return guarded([&] {
    require(out, "out");
    *out = nullptr;
    EvalConfig cfg = eval_config_from_json(parse_optional(eval_json, "eval"));
    const ControllerFactory factory = make_factory(policy, checkpoint_path, cfg.env);
    auto r = std::make_unique<cc_report>();
    r->report = evaluate(factory, cfg);
    *out = r.release();
  });
}

void cc_report_destroy(cc_report* report) { delete report; }

int cc_report_row_count(const cc_report* report) {
  return report == nullptr ? -1 : static_cast<int>(report->report.rows.size());
}

cc_status cc_report_csv(const cc_report* report, char** out) {
  return guarded([&] {
    require(report, "report");
    require(out, "out");
    *out = dup(report_csv(report->report));
  });
}

cc_status cc_report_json(const cc_report* report, char** out) {
  return guarded([&] {
    require(report, "report");
    require(out, "out");
    *out = dup(report_json(report->report));
  });
}

cc_status cc_report_episodes_jsonl(const cc_report* report, char** out) {
  return guarded([&] {
    require(report, "report");
    require(out, "out");
    *out = dup(episodes_jsonl(report->report));
  });
}

cc_status cc_demo(const char* demo_json, const char* policy, const char* checkpoint_path,
                  char** out_json) {
  return guarded([&] {
    require(out_json, "out_json");
    DemoConfig demo = demo_config_from_json(parse_optional(demo_json, "demo"));
    const ControllerFactory factory = make_factory(policy, checkpoint_path, demo.env);
    std::unique_ptr<Controller> controller = factory();
    const EpisodeRun run = run_episode(demo.episode_config(), demo.seed, *controller, true);
    const Json j{{"metrics", Json::parse(episode_json(run.metrics))},
                 {"trajectory", to_json(run.trajectory)}};
    *out_json = dup(j.dump());
  });
}

cc_status cc_reward_check(const char* scene_json, int verbose, char** out_json) {
  return guarded([&] {
    require(scene_json, "scene_json");
    require(out_json, "out_json");
    const Scene scene = scene_from_json(parse_json(scene_json, "scene"));
    const TableGeometry geom = TableGeometry::build(scene.table);
    const WorldState world = scene.world();
    const std::vector<RewardBreakdown> rewards =
        compute_rewards(world, geom, RewardWeights{}, Stage::kFullTask);

    std::vector<Point2> roots;
    for (const AgentState& a : world.agents) roots.push_back(a.root);
    const Coverage cov = coverage_for_roots(roots, geom, world.table.pose);

    Json agents = Json::array();
    double task_sum = 0.0;
    for (size_t i = 0; i < rewards.size(); ++i) {
      Json a = to_json(rewards[i]);
      a["agent"] = static_cast<int>(i);
      agents.push_back(std::move(a));
      task_sum += rewards[i].task;
    }
    Json out{{"team_size", world.team_size()},
             {"r_cov", cov.r_cov},
             {"all_gripped", all_gripped(world, geom)},
             {"mean_task", rewards.empty() ? 0.0 : task_sum / static_cast<double>(rewards.size())},
             {"agents", agents}};
    if (verbose != 0) {
      const Pose2& pose = world.table.pose;
      const PrincipalFrame f = geom.frame.transformed(pose);
      Json hull = Json::array();
      const ConvexPolygon support = support_for_roots(roots, geom, pose);
      for (Point2 p : support.vertices) hull.push_back(point(pose.to_world(p)));
      out["geometry"] = {
          {"principal_axes",
           {{"com", point(f.com)},
            {"u1", point(f.u1)},
            {"u2", point(f.u2)},
            {"lambda1", f.lambda1},
            {"lambda2", f.lambda2},
            {"isotropic", f.isotropic},
            {"extents",
             {{"pos1", f.extents.pos1},
              {"neg1", f.extents.neg1},
              {"pos2", f.extents.pos2},
              {"neg2", f.extents.neg2}}}}},
          {"support_hull", hull},
          {"coverage",
           {{"d1_pos", cov.d1_pos},
            {"d1_neg", cov.d1_neg},
            {"d2_pos", cov.d2_pos},
            {"d2_neg", cov.d2_neg},
            {"g1", cov.g1},
            {"g2", cov.g2}}}};
    }
    *out_json = dup(out.dump(2));
  });
}

cc_status cc_plot_trajectory_svg(const char* trajectory_json, char** out_svg) {
  return guarded([&] {
    require(trajectory_json, "trajectory_json");
    require(out_svg, "out_svg");
    Json j = parse_json(trajectory_json, "trajectory");
    // Accept both a bare trajectory and the demo output that wraps one.
    if (j.is_object() && j.contains("trajectory") && j.contains("metrics")) {
      j = j.at("trajectory");
    }
    *out_svg = dup(trajectory_svg(trajectory_from_json(j)));
  });
}

cc_status cc_plot_metrics_svg(const char* metrics_csv, char** out_svg) {
  return guarded([&] {
    require(metrics_csv, "metrics_csv");
    require(out_svg, "out_svg");
    *out_svg = dup(metrics_svg(metrics_csv));
  });
}

}  // extern "C"
