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

// PPO with GAE, team-size-grouped advantage normalization, mixed team-size
// rollouts and interleaved masked-AMP discriminator updates.
//
// One iteration runs, in order: rollout collection (which also scores style
// rewards with the current discriminators), one discriminator update, and
// the PPO epochs.

#ifndef COOPCARRY_TRAIN_HPP_
#define COOPCARRY_TRAIN_HPP_

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "coopcarry/env.hpp"
#include "coopcarry/nn.hpp"
#include "coopcarry/policy.hpp"
#include "coopcarry/style.hpp"

namespace coopcarry {

struct TeamSizeWeight {
  int team_size = 2;
  double weight = 1.0;
};

struct PPOConfig {
  int horizon = 32;
  double lr = 2e-5;
  double clip = 0.2;
  double gamma = 0.99;
  double lambda = 0.95;
  int n_envs = 64;
  int minibatch = 2048;
  int epochs = 4;
  double norm_eps = 1e-8;
  double max_grad_norm = 0.0;  // 0 disables clipping
  CombineWeights reward_weights;
  std::vector<TeamSizeWeight> team_size_mix = {{2, 1.0}, {4, 1.0}, {8, 1.0}};
  Stage stage = Stage::kFullTask;

  // Discriminators.
  bool style = true;
  std::vector<int> disc_hidden = {1024, 512};
  double disc_lr = 2e-5;
  int disc_batch = 512;

  void validate() const;
};

// Everything a training run needs.
struct RunConfig {
  EnvConfig env;  // template; team size and table shape are drawn per episode
  std::vector<TableShape> shapes = {TableShape::kRound, TableShape::kSquare,
                                    TableShape::kRectangle};
  NetConfig net;
  PPOConfig ppo;
  std::uint64_t seed = 0;
  int iterations = 100;
  int checkpoint_every = 0;    // 0 writes only the final checkpoint
  std::string checkpoint_dir;  // empty disables checkpoints
  std::string metrics_path;    // empty disables the CSV

  void validate() const;

  // Small networks, a closer spawn circle, shorter episodes and task reward
  // only. Trains the formation stage in minutes on one core.
  static RunConfig desk_preset();
};

// -- advantage estimation -----------------------------------------------------

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;
};

// Backward recursion over one sequence. dones[t] cuts the chain after step
// t; the final step bootstraps from `last_value` unless it is done.
GaeResult compute_gae(std::span<const double> rewards,
                      std::span<const double> values,
                      std::span<const bool> dones, double last_value,
                      double gamma, double lambda);

struct AdvantageGroup {
  std::vector<int> indices;
  double mean = 0.0;
  double std = 0.0;
};

// (A - mean_n) / (std_n + eps) within each team size. Groups of one map to 0.
// Returns the groups keyed by team size.
std::map<int, AdvantageGroup> normalize_advantages_per_team_size(
    std::vector<double>& advantages, std::span<const int> team_sizes,
    double eps = 1e-8);

// -- PPO loss -----------------------------------------------------------------

struct PPOLosses {
  double policy = 0.0;
  double value = 0.0;
  double clip_fraction = 0.0;
  double mean_ratio = 0.0;
};

// Clipped surrogate and value MSE on one minibatch. Gradients are
// accumulated into the model's actor and critic parameter sets.
PPOLosses ppo_loss_and_grad(ActorCritic& model, const ObsBatch& obs,
                            const ad::Mat& actions,
                            std::span<const double> old_log_prob,
                            std::span<const double> advantages,
                            std::span<const double> returns, double clip);

// -- rollouts -----------------------------------------------------------------

// Agent-steps of one iteration, ordered by step, then env, then agent.
struct RolloutBuffer {
  ObsBatch obs;  // normalized, exactly as the policy saw it
  ad::Mat actions;
  std::vector<double> log_prob, value;
  std::vector<double> r_task, r_style, reward;
  std::vector<bool> done;
  std::vector<int> team_size, env_id, step, agent;
  ad::Mat full_transitions;    // style inputs, one row per agent-step
  ad::Mat masked_transitions;
  std::vector<double> alpha;   // interaction indicator
  // V of the final state where an episode hit its time limit, else 0. The
  // advantage estimate treats such a step as r + gamma * V instead of a
  // true terminal.
  std::vector<double> truncation_value;
  std::vector<double> last_value;  // bootstrap per (env, agent), flattened
  std::vector<int> last_offset;    // env e's agents start at last_offset[e]
  std::vector<double> advantages, returns;

  int size() const { return static_cast<int>(log_prob.size()); }
};

struct TeamSizeStats {
  int team_size = 0;
  int episodes = 0;          // completed this iteration
  double mean_return = 0.0;  // combined reward; carried forward when none end
  double mean_task_return = 0.0;
  double mean_task_reward = 0.0;   // per agent-step
  double mean_style_reward = 0.0;  // per agent-step
  bool has_return = false;
};

struct IterationStats {
  int iteration = 0;
  std::vector<TeamSizeStats> per_team_size;
  double d_full_acc = 0.0;
  double d_mask_acc = 0.0;
  double d_full_loss = 0.0;
  double d_mask_loss = 0.0;
  PPOLosses losses;  // mean over minibatches
  // Loss of the first minibatch before any parameter change; a resume check.
  PPOLosses first_losses;
  int transitions = 0;
};

inline constexpr const char* kMetricsHeader =
    "iter,team_size,mean_return,mean_task_reward,mean_style_reward,d_full_acc,"
    "d_mask_acc";

std::string metrics_rows(const IterationStats& stats);

class Trainer {
 public:
  explicit Trainer(RunConfig config);
  ~Trainer();
  Trainer(const Trainer&) = delete;
  Trainer& operator=(const Trainer&) = delete;

  // One iteration: rollout, discriminator update, PPO update.
  IterationStats iterate();
  // Runs the configured number of iterations from the current one, writing
  // metrics rows and checkpoints. `on_iteration` sees every result.
  void run(const std::function<void(const IterationStats&)>& on_iteration = {});

  void save_checkpoint(const std::string& path) const;
  // Replaces all state with the checkpoint's. The run configuration stored
  // in the file must describe the same networks. The stored seed replaces
  // the current one.
  void load_checkpoint(const std::string& path);

  int iteration() const;
  const RunConfig& config() const;
  ActorCritic& model();
  const ObsNormalizer& normalizer() const;
  Discriminator& d_full();
  Discriminator& d_mask();
  // Names of the phases run so far, in order (bounded to the last 300).
  const std::vector<std::string>& call_trace() const;
  const RolloutBuffer& last_rollout() const;

  // Hooks for tests: the rollout's action source can be replaced.
  using ActionOverride =
      std::function<ad::Mat(const PolicyOutput& out, int env, int iteration)>;
  void set_action_override(ActionOverride f);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// A trained policy restored from a checkpoint, ready for evaluation.
struct LoadedPolicy {
  RunConfig config;
  std::shared_ptr<ActorCritic> model;
  std::shared_ptr<ObsNormalizer> normalizer;
  int iteration = 0;
};

// Throws kIo when the file is missing, foreign or inconsistent.
LoadedPolicy load_policy(const std::string& checkpoint_path);

// Mean completed-episode task return of uniform-random actions under the
// run's environment settings, over `episodes` episodes per env slot.
double random_policy_task_return(const RunConfig& config, int episodes_per_env);

}  // namespace coopcarry

#endif  // COOPCARRY_TRAIN_HPP_
