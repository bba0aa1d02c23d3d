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

// Runs the command-line tool as a subprocess.

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"

namespace fs = std::filesystem;
using Json = nlohmann::json;

namespace {

struct Result {
  int status = -1;
  std::string out;  // stdout and stderr
};

Result run(const std::string& args) {
  const std::string cmd = std::string(COOPCARRY_CLI) + " " + args + " 2>&1";
  Result r;
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  std::array<char, 4096> buf;
  size_t n;
  while ((n = fread(buf.data(), 1, buf.size(), p)) > 0) r.out.append(buf.data(), n);
  const int raw = pclose(p);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return r;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) {
    if (!l.empty()) out.push_back(l);
  }
  return out;
}

std::string scene(const char* name) {
  return std::string(COOPCARRY_SOURCE_DIR) + "/scenes/" + name;
}

// Small networks and short episodes so training runs take well under a second.
fs::path tiny_config(const std::string& mix) {
  const fs::path p = fs::path("cli_work") / ("tiny_" + std::to_string(mix.size()) + ".json");
  fs::create_directories(p.parent_path());
  std::ofstream(p) << R"({"net": {"d_model": 8, "tokenizer_hidden": [12], "stacks": 1, "heads": 2,
                                  "ff_width": 16, "head_hidden": [16]},
                          "env": {"episode_len": 12},
                          "ppo": {"n_envs": 3, "horizon": 8, "minibatch": 16,
                                  "disc_hidden": [8], "disc_batch": 16,
                                  "team_size_mix": )"
                   << mix << "}}";
  return p;
}

const char* kSingle = R"([{"team_size": 2, "weight": 1.0}])";
const char* kMixed = R"([{"team_size": 2, "weight": 1.0}, {"team_size": 3, "weight": 1.0}])";

}  // namespace

TEST_CASE("help lists every subcommand") {
  const Result r = run("--help");
  CHECK(r.status == 0);
  for (const char* sub : {"train", "eval", "demo", "reward-check", "plot"}) {
    CHECK(r.out.find(sub) != std::string::npos);
  }
  CHECK(run("train --help").out.find("--resume") != std::string::npos);
  CHECK(run("frobnicate").status != 0);
}

TEST_CASE("train writes one metrics row per iteration") {
  const fs::path out = "cli_work/train10";
  fs::remove_all(out);
  const Result r = run("train --preset desk --config " + tiny_config(kSingle).string() +
                       " --iters 10 --seed 1 --out " + out.string());
  REQUIRE_MESSAGE(r.status == 0, r.out);
  const auto rows = lines(read_file(out / "metrics.csv"));
  REQUIRE(rows.size() == 11);
  CHECK(rows[0] == "iter,team_size,mean_return,mean_task_reward,mean_style_reward,d_full_acc,d_mask_acc");
  CHECK(rows[1].rfind("0,2,", 0) == 0);
  CHECK(rows[10].rfind("9,2,", 0) == 0);
  CHECK(fs::exists(out / "checkpoints" / "latest.ckpt"));
  CHECK(fs::exists(out / "config.json"));
  CHECK(Json::parse(read_file(out / "config.json")).at("seed") == 1);

  const Result again = run("plot " + (out / "metrics.csv").string());
  CHECK(again.status == 0);
  CHECK(again.out == run("plot " + (out / "metrics.csv").string()).out);
}

TEST_CASE("mixed team sizes give one row per size and a line each in the plot") {
  const fs::path out = "cli_work/mixed";
  fs::remove_all(out);
  REQUIRE(run("train --preset desk --config " + tiny_config(kMixed).string() +
              " --iters 3 --out " + out.string())
              .status == 0);
  const auto rows = lines(read_file(out / "metrics.csv"));
  CHECK(rows.size() == 1 + 3 * 2);
  const std::string svg = run("plot " + (out / "metrics.csv").string()).out;
  size_t polylines = 0;
  for (size_t at = svg.find("<polyline"); at != std::string::npos; at = svg.find("<polyline", at + 1)) {
    ++polylines;
  }
  CHECK(polylines == 2);
}

TEST_CASE("resume continues the run exactly") {
  const std::string cfg = tiny_config(kSingle).string();
  const fs::path full = "cli_work/full", part = "cli_work/part";
  fs::remove_all(full);
  fs::remove_all(part);
  REQUIRE(run("train --preset desk --config " + cfg + " --iters 4 --out " + full.string()).status == 0);
  REQUIRE(run("train --preset desk --config " + cfg + " --iters 2 --out " + part.string()).status == 0);
  const Result r = run("train --preset desk --config " + cfg + " --iters 4 --out " + part.string() +
                       " --resume " + (part / "checkpoints" / "latest.ckpt").string());
  REQUIRE_MESSAGE(r.status == 0, r.out);
  const auto a = lines(read_file(full / "metrics.csv"));
  const auto b = lines(read_file(part / "metrics.csv"));
  REQUIRE(a.size() == 5);
  REQUIRE(b.size() == 5);
  CHECK(a == b);
}

TEST_CASE("stage flag") {
  const fs::path out = "cli_work/stage";
  fs::remove_all(out);
  REQUIRE(run("train --preset desk --config " + tiny_config(kSingle).string() +
              " --iters 1 --stage full-task --out " + out.string())
              .status == 0);
  CHECK(Json::parse(read_file(out / "config.json")).at("ppo").at("stage") == "full-task");
  CHECK(run("train --iters 1 --stage sideways --out cli_work/bad").status != 0);
}

TEST_CASE("eval grid and failures") {
  const Result r = run("eval --policy oracle --team-sizes 2,4,8 --episodes 2");
  REQUIRE_MESSAGE(r.status == 0, r.out);
  const auto rows = lines(r.out);
  CHECK(rows.size() == 1 + 9);
  CHECK(rows[0] == "team_size,shape,episodes,success_rate,mean_d,mean_t_coop,mean_jerk");

  const Result missing = run("eval --policy checkpoint --checkpoint cli_work/none.ckpt --episodes 1");
  CHECK(missing.status != 0);
  CHECK(missing.out.find("none.ckpt") != std::string::npos);
  CHECK(run("eval --team-sizes 0 --policy oracle").status != 0);
}

TEST_CASE("reward-check scenes") {
  auto check = [](const char* name) {
    const Result r = run("reward-check " + scene(name));
    REQUIRE_MESSAGE(r.status == 0, r.out);
    return Json::parse(r.out);
  };
  CHECK(std::fabs(check("square-4-midpoints.json").at("r_cov").get<double>() - 1.0) < 1e-9);
  CHECK(std::fabs(check("two-same-edge.json").at("r_cov").get<double>() - 0.375) < 1e-9);
  const Json grip = check("ideal-grip.json");
  for (const Json& a : grip.at("agents")) {
    CHECK(std::fabs(a.at("contact").get<double>() - 1.0) < 1e-9);
    CHECK(std::fabs(a.at("hand").at("hand").get<double>() - 1.0) < 1e-9);
  }
  CHECK(run("reward-check " + scene("square-4-midpoints.json") + " --verbose").out.find("support_hull") !=
        std::string::npos);
  CHECK(run("reward-check cli_work/absent.json").status != 0);
}

TEST_CASE("demo trajectory plots deterministically") {
  fs::create_directories("cli_work");
  REQUIRE(run("demo --policy oracle --team-sizes 3 --shapes rectangle --seed 2 --out cli_work/demo.json")
              .status == 0);
  const Json d = Json::parse(read_file("cli_work/demo.json"));
  CHECK(d.contains("trajectory"));
  const Result a = run("plot cli_work/demo.json");
  CHECK(a.status == 0);
  CHECK(a.out.find("<svg") != std::string::npos);
  CHECK(a.out == run("plot cli_work/demo.json").out);
}
