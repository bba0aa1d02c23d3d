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

#include "coopcarry/policy.hpp"

#include <algorithm>
#include <cmath>

#include "coopcarry/error.hpp"

namespace coopcarry {
namespace {

constexpr int kAgentTokens = 4;
constexpr double kObsClip = 5.0;
constexpr double kObsStdFloor = 1e-4;

void require_cols(const ad::Mat& m, int cols, const char* what) {
  if (m.rows() > 0 && m.cols() != cols) {
    fail(ErrorCode::kInvalidArgument, std::string("observation ") + what +
                                          " has " + std::to_string(m.cols()) +
                                          " columns, expected " + std::to_string(cols));
  }
}

std::vector<int> tokenizer_sizes(const NetConfig& cfg) {
  std::vector<int> s = cfg.tokenizer_hidden;
  s.push_back(cfg.d_model);
  return s;
}

void update_stats(ObsNormalizer::Stats& s, const ad::Mat& rows) {
  // Chan et al. parallel merge of (count, mean, M2).
  const double nb = static_cast<double>(rows.rows());
  if (nb == 0.0) return;
  const ad::Vec mean_b = rows.colwise().mean().transpose();
  const ad::Vec m2_b =
      (rows.rowwise() - mean_b.transpose()).cwiseAbs2().colwise().sum().transpose();
  const double na = s.count, n = na + nb;
  const ad::Vec delta = mean_b - s.mean;
  s.mean += delta * (nb / n);
  s.m2 += m2_b + delta.cwiseAbs2() * (na * nb / n);
  s.count = n;
}

ad::Mat normalize_rows(const ObsNormalizer::Stats& s, const ad::Mat& rows) {
  if (rows.rows() == 0 || s.count < 2.0) return rows;
  const ad::Vec std = (s.m2 / s.count).cwiseSqrt().cwiseMax(kObsStdFloor);
  ad::Mat out = (rows.rowwise() - s.mean.transpose()).array().rowwise() /
                std.transpose().array();
  return out.cwiseMax(-kObsClip).cwiseMin(kObsClip);
}

}  // namespace

void NetConfig::validate() const {
  if (d_model <= 0 || heads <= 0 || d_model % heads != 0) {
    fail(ErrorCode::kConfig, "d_model must be a positive multiple of heads");
  }
  if (stacks < 0 || ff_width <= 0 || action_dim <= 0) {
    fail(ErrorCode::kConfig, "network sizes must be positive");
  }
  for (int h : tokenizer_hidden) {
    if (h <= 0) fail(ErrorCode::kConfig, "tokenizer sizes must be positive");
  }
  for (int h : head_hidden) {
    if (h <= 0) fail(ErrorCode::kConfig, "head sizes must be positive");
  }
  if (!(init_log_std >= kMinLogStd && init_log_std <= kMaxLogStd)) {
    fail(ErrorCode::kConfig, "init_log_std must lie in [-5, 1]");
  }
}

ObsBatch ObsBatch::from(std::span<const Observation> obs) {
  ObsBatch b;
  const int n = static_cast<int>(obs.size());
  const int od = n > 0 ? static_cast<int>(obs[0].object.size()) : 0;
  int teammates = 0;
  for (const Observation& o : obs) {
    if (static_cast<int>(o.object.size()) != od) {
      fail(ErrorCode::kInvalidArgument, "observation batch mixes object sizes");
    }
    if (o.teammates.size() % kTeammateDim != 0) {
      fail(ErrorCode::kInvalidArgument, "teammate block is not a multiple of 9");
    }
    teammates += o.teammate_count();
  }
  b.proprio.resize(n, kProprioDim);
  b.object.resize(n, od);
  b.target.resize(n, kTargetDim);
  b.teammates.resize(teammates, kTeammateDim);
  b.teammate_offsets.assign(1, 0);
  int row = 0;
  for (int s = 0; s < n; ++s) {
    const Observation& o = obs[s];
    for (int c = 0; c < kProprioDim; ++c) b.proprio(s, c) = o.proprio[c];
    for (int c = 0; c < od; ++c) b.object(s, c) = o.object[c];
    for (int c = 0; c < kTargetDim; ++c) b.target(s, c) = o.mask_target ? 0.0 : o.target[c];
    for (int k = 0; k < o.teammate_count(); ++k, ++row) {
      for (int c = 0; c < kTeammateDim; ++c) {
        b.teammates(row, c) = o.teammates[k * kTeammateDim + c];
      }
    }
    b.teammate_offsets.push_back(row);
  }
  return b;
}

ObsBatch ObsBatch::select(std::span<const int> idx) const {
  ObsBatch b;
  const int n = static_cast<int>(idx.size());
  int teammate_rows = 0;
  for (int i : idx) teammate_rows += teammate_offsets[i + 1] - teammate_offsets[i];
  b.proprio.resize(n, proprio.cols());
  b.object.resize(n, object.cols());
  b.target.resize(n, target.cols());
  b.teammates.resize(teammate_rows, teammates.cols());
  b.teammate_offsets.assign(1, 0);
  int row = 0;
  for (int s = 0; s < n; ++s) {
    const int i = idx[s];
    b.proprio.row(s) = proprio.row(i);
    b.object.row(s) = object.row(i);
    b.target.row(s) = target.row(i);
    for (int r = teammate_offsets[i]; r < teammate_offsets[i + 1]; ++r, ++row) {
      b.teammates.row(row) = teammates.row(r);
    }
    b.teammate_offsets.push_back(row);
  }
  return b;
}

ObsNormalizer::ObsNormalizer(const NetConfig& cfg) {
  for (int dim : {cfg.proprio_dim, cfg.object_dim, cfg.target_dim, cfg.teammate_dim}) {
    stats_.push_back({ad::Vec::Zero(dim), ad::Vec::Zero(dim), 0.0});
  }
}

void ObsNormalizer::update(const ObsBatch& batch) {
  if (stats_.empty()) return;
  update_stats(stats_[0], batch.proprio);
  update_stats(stats_[1], batch.object);
  update_stats(stats_[2], batch.target);
  update_stats(stats_[3], batch.teammates);
}

ObsBatch ObsNormalizer::apply(const ObsBatch& batch) const {
  if (stats_.empty()) return batch;
  ObsBatch out;
  out.proprio = normalize_rows(stats_[0], batch.proprio);
  out.object = normalize_rows(stats_[1], batch.object);
  out.target = normalize_rows(stats_[2], batch.target);
  out.teammates = normalize_rows(stats_[3], batch.teammates);
  out.teammate_offsets = batch.teammate_offsets;
  return out;
}

Network::Network(const NetConfig& cfg, int out_dim, const std::string& name,
                 std::uint64_t seed, double head_gain)
    : cfg_(cfg) {
  cfg_.validate();
  std::mt19937_64 rng(seed);
  const int d = cfg_.d_model;
  const std::vector<int> tok = tokenizer_sizes(cfg_);
  embedding_ = &params_.add(name + ".e", ad::uniform_init(1, d, 1.0, rng));
  tok_proprio_ = nn::Mlp(params_, name + ".tok_proprio", cfg_.proprio_dim, tok, rng);
  tok_object_ = nn::Mlp(params_, name + ".tok_object", cfg_.object_dim, tok, rng);
  tok_target_ = nn::Mlp(params_, name + ".tok_target", cfg_.target_dim, tok, rng);
  tok_teammate_ = nn::Mlp(params_, name + ".tok_teammate", cfg_.teammate_dim, tok, rng);
  for (int l = 0; l < cfg_.stacks; ++l) {
    const std::string p = name + ".stack" + std::to_string(l);
    Stack s;
    auto make_attn = [&](const std::string& a, bool cross) {
      Attention at;
      at.ln_q = nn::LayerNorm::create(params_, a + ".ln_q", d);
      if (cross) at.ln_kv = nn::LayerNorm::create(params_, a + ".ln_kv", d);
      at.wq = nn::Linear::create(params_, a + ".wq", d, d, rng);
      at.wk = nn::Linear::create(params_, a + ".wk", d, d, rng);
      at.wv = nn::Linear::create(params_, a + ".wv", d, d, rng);
      at.wo = nn::Linear::create(params_, a + ".wo", d, d, rng);
      return at;
    };
    s.self_attn = make_attn(p + ".self", false);
    s.cross_attn = make_attn(p + ".cross", true);
    s.ln_ff = nn::LayerNorm::create(params_, p + ".ln_ff", d);
    s.ff1 = nn::Linear::create(params_, p + ".ff1", d, cfg_.ff_width, rng);
    s.ff2 = nn::Linear::create(params_, p + ".ff2", cfg_.ff_width, d, rng);
    stacks_.push_back(s);
  }
  ln_out_ = nn::LayerNorm::create(params_, name + ".ln_out", d);
  std::vector<int> head = cfg_.head_hidden;
  head.push_back(out_dim);
  head_ = nn::Mlp(params_, name + ".head", d, head, rng, head_gain);
}

Network::Tokens Network::tokenize(ad::Tape& t, const ObsBatch& batch) const {
  require_cols(batch.proprio, cfg_.proprio_dim, "proprio");
  require_cols(batch.object, cfg_.object_dim, "object");
  require_cols(batch.target, cfg_.target_dim, "target");
  require_cols(batch.teammates, cfg_.teammate_dim, "teammate");
  const int b = batch.size();
  if (b == 0) fail(ErrorCode::kInvalidArgument, "empty observation batch");
  if (static_cast<int>(batch.teammate_offsets.size()) != b + 1 ||
      batch.teammate_offsets.back() != batch.teammates.rows()) {
    fail(ErrorCode::kInvalidArgument, "teammate offsets do not match the batch");
  }
  Tokens out;
  out.agent = ad::interleave({t.param(*embedding_),
                              tok_proprio_(t, t.constant(batch.proprio)),
                              tok_object_(t, t.constant(batch.object)),
                              tok_target_(t, t.constant(batch.target))});
  if (batch.teammates.rows() > 0) {
    out.teammates = tok_teammate_(t, t.constant(batch.teammates));
    out.has_teammates = true;
  }
  return out;
}

ad::Var Network::forward(ad::Tape& t, const ObsBatch& batch) const {
  Tokens tok = tokenize(t, batch);
  const int b = batch.size();
  std::vector<int> agent_offsets(b + 1);
  for (int s = 0; s <= b; ++s) agent_offsets[s] = kAgentTokens * s;
  ad::Vec cross_mask(kAgentTokens * b);
  for (int s = 0; s < b; ++s) {
    const bool any = batch.teammate_offsets[s + 1] > batch.teammate_offsets[s];
    cross_mask.segment(kAgentTokens * s, kAgentTokens).setConstant(any ? 1.0 : 0.0);
  }

  ad::Var x = tok.agent;
  for (const Stack& s : stacks_) {
    {
      const Attention& a = s.self_attn;
      const ad::Var h = a.ln_q(t, x);
      const ad::Var o = ad::attention(a.wq(t, h), a.wk(t, h), a.wv(t, h),
                                      agent_offsets, agent_offsets, cfg_.heads);
      x = ad::add(x, a.wo(t, o));
    }
    if (tok.has_teammates) {
      const Attention& a = s.cross_attn;
      const ad::Var h = a.ln_q(t, x);
      const ad::Var m = a.ln_kv(t, tok.teammates);
      const ad::Var o = ad::attention(a.wq(t, h), a.wk(t, m), a.wv(t, m),
                                      agent_offsets, batch.teammate_offsets,
                                      cfg_.heads);
      x = ad::add(x, ad::row_scale(a.wo(t, o), cross_mask));
    }
    const ad::Var h = s.ln_ff(t, x);
    x = ad::add(x, s.ff2(t, ad::relu(s.ff1(t, h))));
  }
  const ad::Var e = ad::take_rows(x, kAgentTokens, 0);
  return head_(t, ln_out_(t, e));
}

ActorCritic::ActorCritic(const NetConfig& cfg, std::uint64_t seed)
    : cfg_(cfg),
      actor_(cfg, cfg.action_dim, "actor", seed, 0.01),
      critic_(cfg, 1, "critic", seed ^ 0x9e3779b97f4a7c15ULL) {
  log_std_ = &actor_.params().add(
      "actor.log_std", ad::Mat::Constant(1, cfg.action_dim, cfg.init_log_std));
}

ad::Var ActorCritic::mean(ad::Tape& t, const ObsBatch& batch) const {
  return actor_.forward(t, batch);
}

ad::Var ActorCritic::log_std(ad::Tape& t) const {
  return ad::clamp(t.param(*log_std_), kMinLogStd, kMaxLogStd);
}

ad::Var ActorCritic::value(ad::Tape& t, const ObsBatch& batch) const {
  return critic_.forward(t, batch);
}

PolicyOutput ActorCritic::evaluate(const ObsBatch& batch) const {
  ad::Tape t;
  PolicyOutput out;
  out.mean = mean(t, batch).value();
  out.log_std = log_std(t).value().row(0).transpose();
  out.value = value(t, batch).value().col(0);
  return out;
}

ad::Vec ActorCritic::values(const ObsBatch& batch) const {
  ad::Tape t;
  return value(t, batch).value().col(0);
}

ad::Vec gaussian_log_prob(const ad::Mat& mean, const ad::Vec& log_std,
                          const ad::Mat& actions) {
  ad::Tape t;
  return ad::gaussian_log_prob(t.constant(mean), t.constant(log_std.transpose()), actions)
      .value()
      .col(0);
}

SampledActions sample_action(const PolicyOutput& out, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  SampledActions s;
  s.actions.resize(out.mean.rows(), out.mean.cols());
  for (Eigen::Index r = 0; r < out.mean.rows(); ++r) {
    for (Eigen::Index c = 0; c < out.mean.cols(); ++c) {
      s.actions(r, c) = out.mean(r, c) + std::exp(out.log_std(c)) * normal(rng);
    }
  }
  s.log_prob = gaussian_log_prob(out.mean, out.log_std, s.actions);
  return s;
}

}  // namespace coopcarry
