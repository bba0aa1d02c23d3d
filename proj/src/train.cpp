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

#include "coopcarry/train.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "coopcarry/checkpoint.hpp"
#include "coopcarry/error.hpp"
#include "coopcarry/metrics.hpp"
#include "coopcarry/parallel.hpp"
#include "coopcarry/serialize.hpp"

namespace coopcarry {
namespace {

constexpr std::size_t kTraceLimit = 300;
constexpr std::uint64_t kInitialResetTag = ~std::uint64_t{0};
constexpr std::uint64_t kPpoTag = 0x7070;
constexpr std::uint64_t kDiscTag = 0xd15c;
constexpr std::uint64_t kRandomBaselineTag = 0xba5e;

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Independent stream per (run seed, env id, iteration).
std::mt19937_64 stream(std::uint64_t seed, std::uint64_t env, std::uint64_t iter) {
  return std::mt19937_64(mix(mix(mix(seed) ^ env) ^ iter));
}

double nan() { return std::numeric_limits<double>::quiet_NaN(); }

ad::Mat column(std::span<const double> v) {
  ad::Mat m(static_cast<Eigen::Index>(v.size()), 1);
  for (size_t i = 0; i < v.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = v[i];
  return m;
}

EnvConfig draw_env_config(const RunConfig& cfg, std::mt19937_64& rng) {
  std::vector<double> weights;
  for (const TeamSizeWeight& w : cfg.ppo.team_size_mix) weights.push_back(w.weight);
  std::discrete_distribution<int> pick_size(weights.begin(), weights.end());
  EnvConfig c = cfg.env;
  c.team_size = cfg.ppo.team_size_mix[pick_size(rng)].team_size;
  if (!cfg.shapes.empty()) {
    std::uniform_int_distribution<int> pick_shape(0, static_cast<int>(cfg.shapes.size()) - 1);
    const TableShape shape = cfg.shapes[pick_shape(rng)];
    TableSpec t = standard_table(shape);
    t.mass_scale = cfg.env.table.mass_scale;
    t.n_contact = cfg.env.table.n_contact;
    t.tabletop_height = cfg.env.table.tabletop_height;
    c.table = t;
  }
  c.stage = cfg.ppo.stage;
  c.seed = rng();
  return c;
}

// Per-env episode accumulators, one entry per agent.
struct Accumulator {
  std::vector<double> ret, task;
  void reset(int n) {
    ret.assign(n, 0.0);
    task.assign(n, 0.0);
  }
};

struct EnvSlot {
  std::unique_ptr<Env> env;
  std::vector<Observation> obs;
  Accumulator acc;
};

void concat_rows(ad::Mat& dst, const ad::Mat& src) {
  const Eigen::Index r = dst.rows();
  if (r == 0) {
    dst = src;
    return;
  }
  dst.conservativeResize(r + src.rows(), Eigen::NoChange);
  dst.bottomRows(src.rows()) = src;
}

void save_normalizer(CheckpointData& d, const ObsNormalizer& normalizer) {
  const auto& st = normalizer.stats();
  nlohmann::json counts = nlohmann::json::array();
  for (size_t k = 0; k < st.size(); ++k) {
    d.add("obs_norm/" + std::to_string(k) + "/mean", st[k].mean);
    d.add("obs_norm/" + std::to_string(k) + "/m2", st[k].m2);
    counts.push_back(st[k].count);
  }
  d.meta["obs_norm_counts"] = counts;
}

void restore_normalizer(const CheckpointData& d, ObsNormalizer& normalizer) {
  auto& st = normalizer.stats();
  const auto& counts = d.meta.at("obs_norm_counts");
  if (counts.size() != st.size()) fail(ErrorCode::kIo, "checkpoint normalizer layout differs");
  for (size_t k = 0; k < st.size(); ++k) {
    const ad::Mat& mean = d.get("obs_norm/" + std::to_string(k) + "/mean");
    const ad::Mat& m2 = d.get("obs_norm/" + std::to_string(k) + "/m2");
    if (mean.size() != st[k].mean.size() || m2.size() != st[k].m2.size()) {
      fail(ErrorCode::kIo, "checkpoint normalizer shape differs from the network inputs");
    }
    st[k].mean = mean.col(0);
    st[k].m2 = m2.col(0);
    st[k].count = counts.at(k).get<double>();
  }
}

}  // namespace

// -- configuration ------------------------------------------------------------

void PPOConfig::validate() const {
  auto bad = [](const std::string& m) { fail(ErrorCode::kConfig, m); };
  if (horizon < 1) bad("horizon must be >= 1");
  if (!(lr > 0.0)) bad("lr must be > 0");
  if (!(clip > 0.0)) bad("clip must be > 0");
  if (!(gamma > 0.0 && gamma <= 1.0)) bad("gamma must be in (0, 1]");
  if (!(lambda >= 0.0 && lambda <= 1.0)) bad("lambda must be in [0, 1]");
  if (n_envs < 1) bad("n_envs must be >= 1");
  if (minibatch < 1) bad("minibatch must be >= 1");
  if (epochs < 1) bad("epochs must be >= 1");
  if (!(norm_eps > 0.0)) bad("norm_eps must be > 0");
  if (!(max_grad_norm >= 0.0)) bad("max_grad_norm must be >= 0");
  if (!(reward_weights.task >= 0.0) || !(reward_weights.style >= 0.0)) {
    bad("task_weight and style_weight must be >= 0");
  }
  if (team_size_mix.empty()) bad("team_size_mix must not be empty");
  double total = 0.0;
  for (const TeamSizeWeight& w : team_size_mix) {
    if (w.team_size < 1 || w.team_size > kMaxTeamSize) bad("team sizes must be in [1, 16]");
    if (!(w.weight >= 0.0)) bad("team size weights must be >= 0");
    total += w.weight;
  }
  if (!(total > 0.0)) bad("team size weights must not all be zero");
  for (int h : disc_hidden) {
    if (h < 1) bad("disc_hidden sizes must be >= 1");
  }
  if (!(disc_lr > 0.0)) bad("disc_lr must be > 0");
  if (disc_batch < 1) bad("disc_batch must be >= 1");
}

void RunConfig::validate() const {
  ppo.validate();
  net.validate();
  if (iterations < 0) fail(ErrorCode::kConfig, "iterations must be >= 0");
  if (checkpoint_every < 0) fail(ErrorCode::kConfig, "checkpoint_every must be >= 0");
  if (net.object_dim != NetConfig::object_dim_for(env.table.n_contact)) {
    fail(ErrorCode::kConfig, "net object_dim does not match env.table.n_contact");
  }
  for (TableShape s : shapes) {
    if (s == TableShape::kPolygon) {
      fail(ErrorCode::kConfig, "shapes: polygon tables are set through env.table with an empty shapes list");
    }
  }
  // Every configuration an episode can draw must be valid.
  std::mt19937_64 rng(0);
  for (const TeamSizeWeight& w : ppo.team_size_mix) {
    EnvConfig c = env;
    c.team_size = w.team_size;
    if (shapes.empty()) {
      c.validate();
      continue;
    }
    for (TableShape s : shapes) {
      c.table = standard_table(s);
      c.table.mass_scale = env.table.mass_scale;
      c.table.n_contact = env.table.n_contact;
      c.table.tabletop_height = env.table.tabletop_height;
      c.validate();
    }
  }
}

RunConfig RunConfig::desk_preset() {
  RunConfig c;
  c.net.d_model = 32;
  c.net.tokenizer_hidden = {64};
  c.net.stacks = 1;
  c.net.heads = 2;
  c.net.ff_width = 64;
  c.net.head_hidden = {64};
  c.env.spawn_radius = 3.0;
  c.env.episode_len = 300;
  c.iterations = 300;
  c.ppo.horizon = 16;
  c.ppo.lr = 1e-3;
  c.ppo.minibatch = 1024;
  c.ppo.epochs = 2;
  c.ppo.max_grad_norm = 1.0;
  c.ppo.team_size_mix = {{2, 1.0}, {3, 1.0}};
  c.ppo.stage = Stage::kFormationOnly;
  c.ppo.style = false;
  c.ppo.disc_hidden = {64, 32};
  c.ppo.disc_lr = 1e-4;
  c.ppo.disc_batch = 256;
  return c;
}

// -- advantages -----------------------------------------------------------------

GaeResult compute_gae(std::span<const double> rewards, std::span<const double> values,
                      std::span<const bool> dones, double last_value, double gamma,
                      double lambda) {
  const size_t n = rewards.size();
  if (values.size() != n || dones.size() != n) {
    fail(ErrorCode::kInvalidArgument, "compute_gae: rewards, values and dones differ in length");
  }
  GaeResult out;
  out.advantages.assign(n, 0.0);
  out.returns.assign(n, 0.0);
  double next_value = last_value;
  double next_adv = 0.0;
  for (size_t k = n; k-- > 0;) {
    const double keep = dones[k] ? 0.0 : 1.0;
    const double delta = rewards[k] + gamma * next_value * keep - values[k];
    next_adv = delta + gamma * lambda * keep * next_adv;
    out.advantages[k] = next_adv;
    out.returns[k] = next_adv + values[k];
    next_value = values[k];
  }
  return out;
}

std::map<int, AdvantageGroup> normalize_advantages_per_team_size(
    std::vector<double>& advantages, std::span<const int> team_sizes, double eps) {
  if (advantages.empty()) fail(ErrorCode::kInvalidArgument, "advantage batch is empty");
  if (advantages.size() != team_sizes.size()) {
    fail(ErrorCode::kInvalidArgument, "advantages and team sizes differ in length");
  }
  std::map<int, AdvantageGroup> groups;
  for (size_t i = 0; i < advantages.size(); ++i) {
    groups[team_sizes[i]].indices.push_back(static_cast<int>(i));
  }
  for (auto& [n, g] : groups) {
    const double count = static_cast<double>(g.indices.size());
    double mean = 0.0;
    for (int i : g.indices) mean += advantages[i];
    mean /= count;
    double var = 0.0;
    for (int i : g.indices) var += (advantages[i] - mean) * (advantages[i] - mean);
    var /= count;
    g.mean = mean;
    g.std = std::sqrt(var);
    for (int i : g.indices) {
      advantages[i] = g.indices.size() == 1 ? 0.0 : (advantages[i] - mean) / (g.std + eps);
    }
  }
  return groups;
}

// -- PPO loss -------------------------------------------------------------------

PPOLosses ppo_loss_and_grad(ActorCritic& model, const ObsBatch& obs, const ad::Mat& actions,
                            std::span<const double> old_log_prob,
                            std::span<const double> advantages,
                            std::span<const double> returns, double clip) {
  const size_t b = static_cast<size_t>(obs.size());
  if (b == 0) fail(ErrorCode::kInvalidArgument, "PPO minibatch is empty");
  if (static_cast<size_t>(actions.rows()) != b || old_log_prob.size() != b ||
      advantages.size() != b || returns.size() != b) {
    fail(ErrorCode::kInvalidArgument, "PPO minibatch fields differ in length");
  }
  ad::Tape t;
  const ad::Var logp = ad::gaussian_log_prob(model.mean(t, obs), model.log_std(t), actions);
  const ad::Var ratio = ad::exp(ad::sub(logp, t.constant(column(old_log_prob))));
  const ad::Var adv = t.constant(column(advantages));
  const ad::Var surrogate = ad::minimum(ad::mul(ratio, adv),
                                        ad::mul(ad::clamp(ratio, 1.0 - clip, 1.0 + clip), adv));
  const ad::Var policy_loss = ad::scale(ad::mean(surrogate), -1.0);
  const ad::Var value_loss =
      ad::mean(ad::square(ad::sub(model.value(t, obs), t.constant(column(returns)))));
  const ad::Var total = ad::add(policy_loss, value_loss);
  if (!std::isfinite(total.scalar())) {
    fail(ErrorCode::kNumeric, "PPO loss is not finite");
  }
  t.backward(total);

  PPOLosses out;
  out.policy = policy_loss.scalar();
  out.value = value_loss.scalar();
  const ad::Mat& r = ratio.value();
  out.mean_ratio = r.mean();
  out.clip_fraction =
      static_cast<double>(((r.array() - 1.0).abs() > clip).count()) / static_cast<double>(b);
  return out;
}

std::string metrics_rows(const IterationStats& s) {
  std::ostringstream os;
  os.precision(10);
  auto num = [&](double v) {
    if (std::isfinite(v)) {
      os << v;
    } else {
      os << "nan";
    }
  };
  for (const TeamSizeStats& t : s.per_team_size) {
    os << s.iteration << ',' << t.team_size << ',';
    num(t.has_return ? t.mean_return : nan());
    os << ',';
    num(t.mean_task_reward);
    os << ',';
    num(t.mean_style_reward);
    os << ',';
    num(s.d_full_acc);
    os << ',';
    num(s.d_mask_acc);
    os << '\n';
  }
  return os.str();
}

// -- trainer --------------------------------------------------------------------

struct Trainer::Impl {
  RunConfig cfg;
  ActorCritic model;
  ObsNormalizer normalizer;
  nn::Adam actor_opt, critic_opt;
  ReferenceLibrary references;
  std::vector<std::string> full_names, masked_names;
  Discriminator d_full, d_mask;
  nn::Adam d_full_opt, d_mask_opt;
  std::vector<EnvSlot> envs;
  int iteration = 0;
  std::map<int, double> last_return, last_task_return;
  std::vector<std::string> trace;
  RolloutBuffer buffer;
  ActionOverride action_override;

  static RunConfig prepared(RunConfig c) {
    c.net.object_dim = NetConfig::object_dim_for(c.env.table.n_contact);
    c.env.stage = c.ppo.stage;
    c.validate();
    return c;
  }

  explicit Impl(RunConfig config)
      : cfg(prepared(std::move(config))),
        model(cfg.net, cfg.seed),
        normalizer(cfg.net),
        actor_opt(model.actor().params(), {cfg.ppo.lr, 0.9, 0.999, 1e-8, cfg.ppo.max_grad_norm}),
        critic_opt(model.critic().params(), {cfg.ppo.lr, 0.9, 0.999, 1e-8, cfg.ppo.max_grad_norm}),
        references(ReferenceLibrary::scripted(mix(cfg.seed ^ 0x5e7))),
        full_names(full_reference_set()),
        masked_names(masked_reference_set(cfg.ppo.stage == Stage::kFullTask)),
        d_full(2 * kFullFeatureDim, cfg.ppo.disc_hidden, mix(cfg.seed ^ 0xf011)),
        d_mask(2 * kMaskedFeatureDim, cfg.ppo.disc_hidden, mix(cfg.seed ^ 0x3a5c)),
        d_full_opt(d_full.params(), {cfg.ppo.disc_lr, 0.9, 0.999, 1e-8, 0.0}),
        d_mask_opt(d_mask.params(), {cfg.ppo.disc_lr, 0.9, 0.999, 1e-8, 0.0}) {
    d_full.fit_normalizer(references.all_transitions(full_names, false));
    d_mask.fit_normalizer(references.all_transitions(masked_names, true));
    envs.resize(cfg.ppo.n_envs);
    for (int e = 0; e < cfg.ppo.n_envs; ++e) {
      std::mt19937_64 rng = stream(cfg.seed, e, kInitialResetTag);
      fresh_episode(envs[e], rng);
      envs[e].acc.reset(envs[e].env->state().team_size());
    }
  }

  void fresh_episode(EnvSlot& slot, std::mt19937_64& rng) {
    const EnvConfig c = draw_env_config(cfg, rng);
    slot.env = std::make_unique<Env>(c);
    slot.obs = slot.env->observe_all();
  }

  void note(const char* phase) {
    if (trace.size() >= kTraceLimit) trace.erase(trace.begin());
    trace.emplace_back(phase);
  }

  // Collects horizon steps from every env. Returns per-step reward sums for
  // the iteration statistics.
  void rollout(IterationStats& stats);
  void discriminator_update(IterationStats& stats);
  void ppo_update(IterationStats& stats);
  void finish_stats(IterationStats& stats);

  CheckpointData to_checkpoint() const;
  void from_checkpoint(const CheckpointData& data);
};

void Trainer::Impl::rollout(IterationStats& stats) {
  note("rollout");
  const int n_envs = cfg.ppo.n_envs;
  const int horizon = cfg.ppo.horizon;
  RolloutBuffer b;
  std::vector<std::mt19937_64> rngs;
  rngs.reserve(n_envs);
  for (int e = 0; e < n_envs; ++e) rngs.push_back(stream(cfg.seed, e, iteration));

  std::vector<ObsBatch> step_batches;
  // Final observations of timed-out episodes, for bootstrapping.
  std::vector<Observation> cut_obs;
  std::vector<int> cut_rows;
  for (int t = 0; t < horizon; ++t) {
    std::vector<Observation> obs;
    std::vector<int> env_start(n_envs + 1, 0);
    for (int e = 0; e < n_envs; ++e) {
      obs.insert(obs.end(), envs[e].obs.begin(), envs[e].obs.end());
      env_start[e + 1] = static_cast<int>(obs.size());
    }
    const ObsBatch raw = ObsBatch::from(obs);
    normalizer.update(raw);
    ObsBatch normed = normalizer.apply(raw);
    const PolicyOutput out = model.evaluate(normed);

    ad::Mat actions(out.mean.rows(), out.mean.cols());
    if (action_override) {
      for (int e = 0; e < n_envs; ++e) {
        const int rows = env_start[e + 1] - env_start[e];
        PolicyOutput sub;
        sub.mean = out.mean.middleRows(env_start[e], rows);
        sub.log_std = out.log_std;
        sub.value = out.value.segment(env_start[e], rows);
        actions.middleRows(env_start[e], rows) = action_override(sub, e, iteration);
      }
    } else {
      std::normal_distribution<double> normal(0.0, 1.0);
      const ad::Vec sigma = out.log_std.array().exp();
      for (int e = 0; e < n_envs; ++e) {
        for (int r = env_start[e]; r < env_start[e + 1]; ++r) {
          for (Eigen::Index c = 0; c < actions.cols(); ++c) {
            actions(r, c) = out.mean(r, c) + sigma(c) * normal(rngs[e]);
          }
        }
      }
    }
    const ad::Vec logp = gaussian_log_prob(out.mean, out.log_std, actions);

    std::vector<double> alpha(obs.size());
    for (int e = 0; e < n_envs; ++e) {
      for (int j = 0; j < env_start[e + 1] - env_start[e]; ++j) {
        alpha[env_start[e] + j] = envs[e].env->interaction_indicator(j);
      }
    }

    // Step every env; auto-reset finished episodes.
    std::vector<StepOutcome> outcomes(n_envs);
    std::vector<char> done(n_envs, 0);
    parallel_for(n_envs, [&](int e) {
      const int rows = env_start[e + 1] - env_start[e];
      std::vector<double> a(static_cast<size_t>(rows) * kActionDim);
      for (int j = 0; j < rows; ++j) {
        for (int c = 0; c < kActionDim; ++c) {
          a[static_cast<size_t>(j) * kActionDim + c] = actions(env_start[e] + j, c);
        }
      }
      try {
        outcomes[e] = envs[e].env->step(a);
      } catch (const Error& err) {
        throw Error(err.code(), "env " + std::to_string(e) + ": " + err.what());
      }
      done[e] = outcomes[e].terminated ? 1 : 0;
      if (done[e]) {
        fresh_episode(envs[e], rngs[e]);
      } else {
        envs[e].obs = std::move(outcomes[e].observations);
      }
    });

    const int rows_now = static_cast<int>(obs.size());
    const int base = static_cast<int>(b.r_task.size());
    for (int e = 0; e < n_envs; ++e) {
      if (!done[e] || outcomes[e].reason != TerminationReason::kTimeout) continue;
      for (int j = 0; j < env_start[e + 1] - env_start[e]; ++j) {
        cut_rows.push_back(base + env_start[e] + j);
        cut_obs.push_back(outcomes[e].observations[j]);
      }
    }
    ad::Mat full(rows_now, 2 * kFullFeatureDim), masked(rows_now, 2 * kMaskedFeatureDim);
    for (int e = 0; e < n_envs; ++e) {
      const int n = env_start[e + 1] - env_start[e];
      for (int j = 0; j < n; ++j) {
        const int r = env_start[e] + j;
        const StepOutcome& o = outcomes[e];
        const double task = o.rewards.empty() ? 0.0 : o.rewards[j].task;
        const auto fi = o.style[j].full_input();
        const auto mi = o.style[j].masked_input();
        for (int c = 0; c < 2 * kFullFeatureDim; ++c) full(r, c) = fi[c];
        for (int c = 0; c < 2 * kMaskedFeatureDim; ++c) masked(r, c) = mi[c];
        b.r_task.push_back(task);
        b.done.push_back(done[e] != 0);
        b.team_size.push_back(n);
        b.env_id.push_back(e);
        b.step.push_back(t);
        b.agent.push_back(j);
        b.log_prob.push_back(logp(r));
        b.value.push_back(out.value(r));
        b.alpha.push_back(alpha[r]);
      }
    }
    concat_rows(b.full_transitions, full);
    concat_rows(b.masked_transitions, masked);
    concat_rows(b.actions, actions);
    step_batches.push_back(std::move(normed));
  }

  // Merge the per-step batches into one, teammate rows included.
  {
    ObsBatch all;
    for (const ObsBatch& s : step_batches) {
      const int base = all.teammate_offsets.back();
      concat_rows(all.proprio, s.proprio);
      concat_rows(all.object, s.object);
      concat_rows(all.target, s.target);
      if (s.teammates.rows() > 0) concat_rows(all.teammates, s.teammates);
      for (size_t k = 1; k < s.teammate_offsets.size(); ++k) {
        all.teammate_offsets.push_back(base + s.teammate_offsets[k]);
      }
    }
    if (all.teammates.rows() == 0) all.teammates.resize(0, kTeammateDim);
    b.obs = std::move(all);
  }

  // Style rewards from the current discriminators, then the combined reward.
  const int total = static_cast<int>(b.r_task.size());
  b.r_style.assign(total, 0.0);
  if (cfg.ppo.style) {
    const ad::Vec p_full = d_full.probabilities(b.full_transitions);
    const ad::Vec p_mask = d_mask.probabilities(b.masked_transitions);
    for (int i = 0; i < total; ++i) {
      b.r_style[i] = blend(style_reward(p_mask(i)), style_reward(p_full(i)), b.alpha[i]);
    }
  }
  b.reward.resize(total);
  for (int i = 0; i < total; ++i) {
    b.reward[i] = combined_reward(b.r_task[i], b.r_style[i], cfg.ppo.reward_weights);
  }

  b.truncation_value.assign(total, 0.0);
  if (!cut_rows.empty()) {
    const ad::Vec v = model.values(normalizer.apply(ObsBatch::from(cut_obs)));
    for (size_t k = 0; k < cut_rows.size(); ++k) b.truncation_value[cut_rows[k]] = v(k);
  }

  // Bootstrap values for every env's current observation.
  {
    std::vector<Observation> obs;
    b.last_offset.assign(n_envs + 1, 0);
    for (int e = 0; e < n_envs; ++e) {
      obs.insert(obs.end(), envs[e].obs.begin(), envs[e].obs.end());
      b.last_offset[e + 1] = static_cast<int>(obs.size());
    }
    const ad::Vec v = model.values(normalizer.apply(ObsBatch::from(obs)));
    b.last_value.assign(v.data(), v.data() + v.size());
  }

  // Row index of (step t, env e, agent 0).
  std::vector<std::vector<int>> row0(horizon, std::vector<int>(n_envs, 0));
  for (int i = total - 1; i >= 0; --i) {
    if (b.agent[i] == 0) row0[b.step[i]][b.env_id[i]] = i;
  }

  // GAE along each (env, agent) episode segment.
  b.advantages.assign(total, 0.0);
  b.returns.assign(total, 0.0);
  for (int e = 0; e < n_envs; ++e) {
    int t0 = 0;
    while (t0 < horizon) {
      int t1 = t0;
      while (t1 < horizon - 1 && !b.done[row0[t1][e]]) ++t1;
      const bool ends_done = b.done[row0[t1][e]];
      const int n = b.team_size[row0[t0][e]];
      const int len = t1 - t0 + 1;
      for (int j = 0; j < n; ++j) {
        std::vector<double> r(len), v(len);
        const std::unique_ptr<bool[]> d(new bool[len]);
        for (int k = 0; k < len; ++k) {
          const int i = row0[t0 + k][e] + j;
          r[k] = b.reward[i] + cfg.ppo.gamma * b.truncation_value[i];
          v[k] = b.value[i];
          d[k] = b.done[i];
        }
        const double last = ends_done ? 0.0 : b.last_value[b.last_offset[e] + j];
        const GaeResult g = compute_gae(r, v, std::span<const bool>(d.get(), len), last,
                                        cfg.ppo.gamma, cfg.ppo.lambda);
        for (int k = 0; k < len; ++k) {
          const int i = row0[t0 + k][e] + j;
          b.advantages[i] = g.advantages[k];
          b.returns[i] = g.returns[k];
        }
      }
      t0 = t1 + 1;
    }
  }

  // Episode bookkeeping in time order.
  std::map<int, std::pair<double, int>> task_sum, style_sum;
  std::map<int, std::vector<double>> finished_return, finished_task;
  for (int t = 0; t < horizon; ++t) {
    for (int e = 0; e < n_envs; ++e) {
      const int i0 = row0[t][e];
      const int n = b.team_size[i0];
      Accumulator& acc = envs[e].acc;
      if (static_cast<int>(acc.ret.size()) != n) acc.reset(n);
      for (int j = 0; j < n; ++j) {
        const int i = i0 + j;
        acc.ret[j] += b.reward[i];
        acc.task[j] += b.r_task[i];
        task_sum[n].first += b.r_task[i];
        task_sum[n].second += 1;
        style_sum[n].first += b.r_style[i];
        style_sum[n].second += 1;
      }
      if (b.done[i0]) {
        const double r = std::accumulate(acc.ret.begin(), acc.ret.end(), 0.0) / n;
        const double k = std::accumulate(acc.task.begin(), acc.task.end(), 0.0) / n;
        finished_return[n].push_back(r);
        finished_task[n].push_back(k);
        // The next episode may have a different team size.
        acc.ret.clear();
        acc.task.clear();
      }
    }
  }
  // Slots whose accumulator was cleared pick up the new episode's size.
  for (EnvSlot& s : envs) {
    const int n = s.env->state().team_size();
    if (static_cast<int>(s.acc.ret.size()) != n) s.acc.reset(n);
  }

  std::set<int> sizes;
  for (const TeamSizeWeight& w : cfg.ppo.team_size_mix) sizes.insert(w.team_size);
  for (int n : sizes) {
    TeamSizeStats ts;
    ts.team_size = n;
    const auto fr = finished_return.find(n);
    if (fr != finished_return.end()) {
      ts.episodes = static_cast<int>(fr->second.size());
      ts.mean_return = std::accumulate(fr->second.begin(), fr->second.end(), 0.0) / ts.episodes;
      const auto& ft = finished_task[n];
      ts.mean_task_return = std::accumulate(ft.begin(), ft.end(), 0.0) / ts.episodes;
      last_return[n] = ts.mean_return;
      last_task_return[n] = ts.mean_task_return;
    }
    if (last_return.count(n)) {
      ts.has_return = true;
      ts.mean_return = last_return[n];
      ts.mean_task_return = last_task_return[n];
    }
    const auto tsum = task_sum.find(n);
    ts.mean_task_reward = tsum != task_sum.end() ? tsum->second.first / tsum->second.second : nan();
    const auto ssum = style_sum.find(n);
    ts.mean_style_reward = ssum != style_sum.end() ? ssum->second.first / ssum->second.second : nan();
    stats.per_team_size.push_back(ts);
  }
  stats.transitions = total;
  buffer = std::move(b);
}

void Trainer::Impl::discriminator_update(IterationStats& stats) {
  note("discriminator_update");
  const RolloutBuffer& b = buffer;
  const int total = b.size();
  std::mt19937_64 rng = stream(cfg.seed, kDiscTag, iteration);
  const int count = cfg.ppo.disc_batch;
  std::uniform_int_distribution<int> pick(0, total - 1);
  ad::Mat pol_full(count, 2 * kFullFeatureDim), pol_mask(count, 2 * kMaskedFeatureDim);
  for (int k = 0; k < count; ++k) {
    const int i = pick(rng);
    pol_full.row(k) = b.full_transitions.row(i);
    pol_mask.row(k) = b.masked_transitions.row(i);
  }
  const ad::Mat ref_full = references.sample(full_names, count, false, rng);
  const ad::Mat ref_mask = references.sample(masked_names, count, true, rng);

  stats.d_full_acc = d_full.accuracy(ref_full, pol_full);
  stats.d_mask_acc = d_mask.accuracy(ref_mask, pol_mask);
  if (!cfg.ppo.style) return;
  d_full.params().zero_grad();
  stats.d_full_loss = d_full.loss_and_grad(ref_full, pol_full);
  d_full_opt.step();
  d_mask.params().zero_grad();
  stats.d_mask_loss = d_mask.loss_and_grad(ref_mask, pol_mask);
  d_mask_opt.step();
}

void Trainer::Impl::ppo_update(IterationStats& stats) {
  note("ppo_update");
  RolloutBuffer& b = buffer;
  const int total = b.size();
  std::vector<double> adv = b.advantages;
  normalize_advantages_per_team_size(adv, b.team_size, cfg.ppo.norm_eps);

  std::mt19937_64 rng = stream(cfg.seed, kPpoTag, iteration);
  std::vector<int> order(total);
  std::iota(order.begin(), order.end(), 0);
  const int mb = std::min(cfg.ppo.minibatch, total);
  PPOLosses sum;
  int batches = 0;
  for (int epoch = 0; epoch < cfg.ppo.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (int start = 0; start < total; start += mb) {
      const int end = std::min(total, start + mb);
      std::vector<int> idx(order.begin() + start, order.begin() + end);
      std::sort(idx.begin(), idx.end());
      const ObsBatch obs = b.obs.select(idx);
      ad::Mat actions(static_cast<Eigen::Index>(idx.size()), b.actions.cols());
      std::vector<double> old_lp, a, ret;
      for (size_t k = 0; k < idx.size(); ++k) {
        actions.row(static_cast<Eigen::Index>(k)) = b.actions.row(idx[k]);
        old_lp.push_back(b.log_prob[idx[k]]);
        a.push_back(adv[idx[k]]);
        ret.push_back(b.returns[idx[k]]);
      }
      model.actor().params().zero_grad();
      model.critic().params().zero_grad();
      const PPOLosses l = ppo_loss_and_grad(model, obs, actions, old_lp, a, ret, cfg.ppo.clip);
      if (batches == 0) stats.first_losses = l;
      actor_opt.step();
      critic_opt.step();
      sum.policy += l.policy;
      sum.value += l.value;
      sum.clip_fraction += l.clip_fraction;
      sum.mean_ratio += l.mean_ratio;
      ++batches;
    }
  }
  if (batches > 0) {
    stats.losses.policy = sum.policy / batches;
    stats.losses.value = sum.value / batches;
    stats.losses.clip_fraction = sum.clip_fraction / batches;
    stats.losses.mean_ratio = sum.mean_ratio / batches;
  }
}

CheckpointData Trainer::Impl::to_checkpoint() const {
  CheckpointData d;
  d.meta["config"] = to_json(cfg);
  d.meta["iteration"] = iteration;
  add_params(d, "model/", model.actor().params());
  add_params(d, "model/", model.critic().params());
  add_params(d, "d_full/", d_full.params());
  add_params(d, "d_mask/", d_mask.params());
  d.add("d_full/norm_mean", d_full.norm_mean());
  d.add("d_full/norm_std", d_full.norm_std());
  d.add("d_mask/norm_mean", d_mask.norm_mean());
  d.add("d_mask/norm_std", d_mask.norm_std());

  save_normalizer(d, normalizer);

  auto save_adam = [&](const std::string& name, const nn::Adam& opt_const) {
    auto& opt = const_cast<nn::Adam&>(opt_const);
    d.meta["adam"][name] = {{"steps", opt.steps()}, {"lr", opt.config().lr}};
    for (size_t k = 0; k < opt.first_moments().size(); ++k) {
      d.add("adam/" + name + "/m/" + std::to_string(k), opt.first_moments()[k]);
      d.add("adam/" + name + "/v/" + std::to_string(k), opt.second_moments()[k]);
    }
  };
  save_adam("actor", actor_opt);
  save_adam("critic", critic_opt);
  save_adam("d_full", d_full_opt);
  save_adam("d_mask", d_mask_opt);

  nlohmann::json slots = nlohmann::json::array();
  for (const EnvSlot& s : envs) {
    EnvConfig c = s.env->config();
    slots.push_back({{"config", to_json(c)},
                     {"state", to_json(s.env->state())},
                     {"return", s.acc.ret},
                     {"task", s.acc.task}});
  }
  d.meta["envs"] = slots;
  nlohmann::json lr = nlohmann::json::object(), lt = nlohmann::json::object();
  for (const auto& [n, v] : last_return) lr[std::to_string(n)] = v;
  for (const auto& [n, v] : last_task_return) lt[std::to_string(n)] = v;
  d.meta["last_return"] = lr;
  d.meta["last_task_return"] = lt;
  return d;
}

void Trainer::Impl::from_checkpoint(const CheckpointData& d) {
  try {
    iteration = d.meta.at("iteration").get<int>();
    // Random streams are keyed by the seed, so a resume continues the stored run's streams.
    const auto seed = d.meta.at("config").at("seed").get<std::uint64_t>();
    if (seed != cfg.seed) {
      cfg.seed = seed;
      references = ReferenceLibrary::scripted(mix(cfg.seed ^ 0x5e7));
    }
    load_params(d, "model/", model.actor().params());
    load_params(d, "model/", model.critic().params());
    load_params(d, "d_full/", d_full.params());
    load_params(d, "d_mask/", d_mask.params());
    d_full.set_normalizer(d.get("d_full/norm_mean").col(0), d.get("d_full/norm_std").col(0));
    d_mask.set_normalizer(d.get("d_mask/norm_mean").col(0), d.get("d_mask/norm_std").col(0));

    restore_normalizer(d, normalizer);

    auto load_adam = [&](const std::string& name, nn::Adam& opt) {
      const auto& meta = d.meta.at("adam").at(name);
      opt.set_steps(meta.at("steps").get<long long>());
      opt.set_lr(meta.at("lr").get<double>());
      for (size_t k = 0; k < opt.first_moments().size(); ++k) {
        opt.first_moments()[k] = d.get("adam/" + name + "/m/" + std::to_string(k));
        opt.second_moments()[k] = d.get("adam/" + name + "/v/" + std::to_string(k));
      }
    };
    load_adam("actor", actor_opt);
    load_adam("critic", critic_opt);
    load_adam("d_full", d_full_opt);
    load_adam("d_mask", d_mask_opt);

    const auto& slots = d.meta.at("envs");
    if (static_cast<int>(slots.size()) != cfg.ppo.n_envs) {
      fail(ErrorCode::kIo, "checkpoint holds " + std::to_string(slots.size()) +
                               " environments, config asks for " + std::to_string(cfg.ppo.n_envs));
    }
    for (size_t e = 0; e < slots.size(); ++e) {
      EnvConfig c = env_config_from_json(slots[e].at("config"), "envs[" + std::to_string(e) + "].config");
      c.stage = cfg.ppo.stage;
      envs[e].env = std::make_unique<Env>(c);
      envs[e].env->set_state(world_state_from_json(slots[e].at("state")));
      envs[e].obs = envs[e].env->observe_all();
      envs[e].acc.ret = slots[e].at("return").get<std::vector<double>>();
      envs[e].acc.task = slots[e].at("task").get<std::vector<double>>();
    }
    last_return.clear();
    last_task_return.clear();
    for (const auto& [k, v] : d.meta.at("last_return").items()) last_return[std::stoi(k)] = v.get<double>();
    for (const auto& [k, v] : d.meta.at("last_task_return").items()) {
      last_task_return[std::stoi(k)] = v.get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kIo, std::string("malformed checkpoint metadata: ") + e.what());
  }
}

Trainer::Trainer(RunConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {}
Trainer::~Trainer() = default;

IterationStats Trainer::iterate() {
  Impl& m = *impl_;
  IterationStats stats;
  stats.iteration = m.iteration;
  m.rollout(stats);
  m.discriminator_update(stats);
  m.ppo_update(stats);
  ++m.iteration;
  return stats;
}

void Trainer::run(const std::function<void(const IterationStats&)>& on_iteration) {
  Impl& m = *impl_;
  const RunConfig& c = m.cfg;
  std::ofstream csv;
  if (!c.metrics_path.empty()) {
    const std::filesystem::path p(c.metrics_path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    const bool fresh = m.iteration == 0 || !std::filesystem::exists(p);
    csv.open(c.metrics_path, fresh ? std::ios::trunc : std::ios::app);
    if (!csv) fail(ErrorCode::kIo, "cannot write metrics file " + c.metrics_path);
    if (fresh) csv << kMetricsHeader << '\n';
  }
  if (!c.checkpoint_dir.empty()) std::filesystem::create_directories(c.checkpoint_dir);
  auto checkpoint = [&]() {
    if (c.checkpoint_dir.empty()) return;
    const std::filesystem::path dir(c.checkpoint_dir);
    char name[32];
    std::snprintf(name, sizeof(name), "iter_%06d.ckpt", m.iteration);
    save_checkpoint((dir / name).string());
    save_checkpoint((dir / "latest.ckpt").string());
  };
  while (m.iteration < c.iterations) {
    const IterationStats s = iterate();
    if (csv.is_open()) {
      csv << metrics_rows(s);
      csv.flush();
      if (!csv) fail(ErrorCode::kIo, "write failed: " + c.metrics_path);
    }
    if (on_iteration) on_iteration(s);
    if (c.checkpoint_every > 0 && m.iteration % c.checkpoint_every == 0 &&
        m.iteration < c.iterations) {
      checkpoint();
    }
  }
  checkpoint();
}

void Trainer::save_checkpoint(const std::string& path) const {
  write_checkpoint(path, impl_->to_checkpoint());
}

void Trainer::load_checkpoint(const std::string& path) {
  const CheckpointData d = read_checkpoint(path);
  impl_->from_checkpoint(d);
}

int Trainer::iteration() const { return impl_->iteration; }
const RunConfig& Trainer::config() const { return impl_->cfg; }
ActorCritic& Trainer::model() { return impl_->model; }
const ObsNormalizer& Trainer::normalizer() const { return impl_->normalizer; }
Discriminator& Trainer::d_full() { return impl_->d_full; }
Discriminator& Trainer::d_mask() { return impl_->d_mask; }
const std::vector<std::string>& Trainer::call_trace() const { return impl_->trace; }
const RolloutBuffer& Trainer::last_rollout() const { return impl_->buffer; }
void Trainer::set_action_override(ActionOverride f) { impl_->action_override = std::move(f); }

LoadedPolicy load_policy(const std::string& checkpoint_path) {
  const CheckpointData d = read_checkpoint(checkpoint_path);
  LoadedPolicy out;
  try {
    out.config = run_config_from_json(d.meta.at("config"), RunConfig{});
    out.iteration = d.meta.at("iteration").get<int>();
    out.model = std::make_shared<ActorCritic>(out.config.net, out.config.seed);
    out.normalizer = std::make_shared<ObsNormalizer>(out.config.net);
    load_params(d, "model/", out.model->actor().params());
    load_params(d, "model/", out.model->critic().params());
    restore_normalizer(d, *out.normalizer);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kIo, checkpoint_path + ": malformed checkpoint metadata: " + e.what());
  } catch (const Error& e) {
    fail(ErrorCode::kIo, checkpoint_path + ": " + e.what());
  }
  return out;
}

double random_policy_task_return(const RunConfig& config, int episodes_per_env) {
  RunConfig cfg = config;
  cfg.env.stage = cfg.ppo.stage;
  std::vector<double> returns(static_cast<size_t>(cfg.ppo.n_envs) * episodes_per_env, 0.0);
  parallel_for(cfg.ppo.n_envs, [&](int e) {
    std::mt19937_64 rng = stream(cfg.seed, e, kRandomBaselineTag);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int k = 0; k < episodes_per_env; ++k) {
      Env env(draw_env_config(cfg, rng));
      const int n = env.state().team_size();
      double sum = 0.0;
      std::vector<double> a(static_cast<size_t>(n) * kActionDim);
      while (!env.terminated()) {
        for (double& x : a) x = u(rng);
        const StepOutcome o = env.step(a);
        for (const RewardBreakdown& r : o.rewards) sum += r.task;
      }
      returns[static_cast<size_t>(e) * episodes_per_env + k] = sum / n;
    }
  });
  return std::accumulate(returns.begin(), returns.end(), 0.0) / static_cast<double>(returns.size());
}

}  // namespace coopcarry
