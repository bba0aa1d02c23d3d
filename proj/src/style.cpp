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

#include "coopcarry/style.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>

#include "coopcarry/error.hpp"
#include "json.hpp"

namespace coopcarry {
namespace {

constexpr double kStdFloor = 1e-6;

bool contains(const std::vector<std::string>& names, const std::string& n) {
  return std::find(names.begin(), names.end(), n) != names.end();
}

template <size_t N>
void put_row(ad::Mat& m, Eigen::Index r, const std::array<double, N>& v) {
  for (size_t c = 0; c < N; ++c) m(r, static_cast<Eigen::Index>(c)) = v[c];
}

}  // namespace

std::array<double, kMaskedFeatureDim> MotionFeatures::masked() const {
  std::array<double, kMaskedFeatureDim> out{};
  for (int i = 0; i < kMaskedFeatureDim; ++i) out[i] = full[kMaskedIndices[i]];
  return out;
}

std::array<double, 2 * kFullFeatureDim> TransitionPair::full_input() const {
  std::array<double, 2 * kFullFeatureDim> out{};
  std::copy(current.full.begin(), current.full.end(), out.begin());
  std::copy(next.full.begin(), next.full.end(), out.begin() + kFullFeatureDim);
  return out;
}

std::array<double, 2 * kMaskedFeatureDim> TransitionPair::masked_input() const {
  const auto a = current.masked(), b = next.masked();
  std::array<double, 2 * kMaskedFeatureDim> out{};
  std::copy(a.begin(), a.end(), out.begin());
  std::copy(b.begin(), b.end(), out.begin() + kMaskedFeatureDim);
  return out;
}

MotionFeatures extract_features(const AgentState& s) {
  MotionFeatures f;
  const Point2 v = rotate(s.velocity, -s.heading);
  f.full[0] = v.x;
  f.full[1] = v.y;
  f.full[2] = s.heading_rate;
  f.full[3] = s.hands[kLeft].z;
  f.full[4] = s.hands[kRight].z;
  for (int j = 0; j < 2; ++j) {
    const Point2 off = rotate(s.hands[j].xy() - s.root, -s.heading);
    f.full[5 + 2 * j] = off.x;
    f.full[6 + 2 * j] = off.y;
  }
  f.full[9] = 0.5 * (s.hand_velocities[0].norm() + s.hand_velocities[1].norm());
  return f;
}

TransitionPair extract_transition(const AgentState& at_t,
                                  const AgentState& at_t1) {
  return {extract_features(at_t), extract_features(at_t1)};
}

std::string to_string(ReferenceKind kind) {
  switch (kind) {
    case ReferenceKind::kWalkForward: return "walk-forward";
    case ReferenceKind::kWalkBackward: return "walk-backward";
    case ReferenceKind::kSideStepLeft: return "side-step-left";
    case ReferenceKind::kSideStepRight: return "side-step-right";
    case ReferenceKind::kLowerHands: return "lower-hands";
    case ReferenceKind::kRaiseHands: return "raise-hands";
  }
  return "unknown";
}

ReferenceKind reference_kind_from_string(const std::string& name) {
  for (int k = 0; k < kReferenceKindCount; ++k) {
    const auto kind = static_cast<ReferenceKind>(k);
    if (to_string(kind) == name) return kind;
  }
  fail(ErrorCode::kInvalidArgument, "unknown reference motion '" + name + "'");
}

ReferenceClip generate_reference(ReferenceKind kind, int steps, double dt,
                                 std::mt19937_64& rng) {
  if (steps < 2 || !(dt > 0.0)) {
    fail(ErrorCode::kInvalidArgument, "reference clip needs >= 2 steps and dt > 0");
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double heading = (2.0 * unit(rng) - 1.0) * std::numbers::pi;
  const Point2 start{8.0 * (2.0 * unit(rng) - 1.0), 8.0 * (2.0 * unit(rng) - 1.0)};

  ReferenceClip clip;
  clip.name = to_string(kind);
  clip.dt = dt;
  clip.states.reserve(steps);

  const bool walking = kind != ReferenceKind::kLowerHands &&
                       kind != ReferenceKind::kRaiseHands;
  if (walking) {
    const double speed = kRefMinSpeed + (kRefMaxSpeed - kRefMinSpeed) * unit(rng);
    Point2 local_dir{1.0, 0.0};
    if (kind == ReferenceKind::kWalkBackward) local_dir = {-1.0, 0.0};
    if (kind == ReferenceKind::kSideStepLeft) local_dir = {0.0, 1.0};
    if (kind == ReferenceKind::kSideStepRight) local_dir = {0.0, -1.0};
    const Point2 vel = rotate(local_dir, heading) * speed;
    for (int t = 0; t < steps; ++t) {
      AgentState s;
      s.root = start + vel * (dt * t);
      s.heading = heading;
      s.velocity = vel;
      s.hands = rest_hands(s.root, heading);
      s.hand_velocities = {Point3{vel.x, vel.y, 0.0}, Point3{vel.x, vel.y, 0.0}};
      clip.states.push_back(s);
    }
  } else {
    // Sweep across the whole band, then hold at the far end.
    const double hand_speed = 0.3 + 0.6 * unit(rng);
    const int sweep = std::clamp(
        static_cast<int>(std::lround((kRefHighHandZ - kRefLowHandZ) / (hand_speed * dt))),
        1, steps - 1);
    const bool lowering = kind == ReferenceKind::kLowerHands;
    const double z0 = lowering ? kRefHighHandZ : kRefLowHandZ;
    const double z1 = lowering ? kRefLowHandZ : kRefHighHandZ;
    const double vz = (z1 - z0) / (sweep * dt);
    for (int t = 0; t < steps; ++t) {
      AgentState s;
      s.root = start;
      s.heading = heading;
      s.hands = rest_hands(start, heading);
      const bool moving = t < sweep;
      const double z = moving ? z0 + (z1 - z0) * t / sweep : z1;
      for (int j = 0; j < 2; ++j) {
        s.hands[j].z = z;
        s.hand_velocities[j] = {0.0, 0.0, moving ? vz : 0.0};
      }
      clip.states.push_back(s);
    }
  }
  for (const AgentState& s : clip.states) clip.features.push_back(extract_features(s));
  return clip;
}

ReferenceLibrary ReferenceLibrary::scripted(std::uint64_t seed,
                                            int clips_per_kind, int steps,
                                            double dt) {
  std::mt19937_64 rng(seed);
  ReferenceLibrary lib;
  for (int k = 0; k < kReferenceKindCount; ++k) {
    for (int c = 0; c < clips_per_kind; ++c) {
      lib.add(generate_reference(static_cast<ReferenceKind>(k), steps, dt, rng));
    }
  }
  return lib;
}

void ReferenceLibrary::add(ReferenceClip clip) {
  if (clip.features.size() < 2) {
    fail(ErrorCode::kInvalidArgument,
         "reference clip '" + clip.name + "' has fewer than 2 frames");
  }
  clips_.push_back(std::move(clip));
}

ad::Mat ReferenceLibrary::sample(const std::vector<std::string>& names,
                                 int count, bool masked,
                                 std::mt19937_64& rng) const {
  std::vector<const ReferenceClip*> pool;
  std::vector<double> weights;
  for (const ReferenceClip& c : clips_) {
    if (!contains(names, c.name)) continue;
    pool.push_back(&c);
    weights.push_back(static_cast<double>(c.features.size() - 1));
  }
  if (pool.empty()) fail(ErrorCode::kState, "no reference clips for requested set");
  std::discrete_distribution<size_t> pick(weights.begin(), weights.end());
  const int dim = masked ? 2 * kMaskedFeatureDim : 2 * kFullFeatureDim;
  ad::Mat out(count, dim);
  for (int r = 0; r < count; ++r) {
    const ReferenceClip& c = *pool[pick(rng)];
    std::uniform_int_distribution<size_t> at(0, c.features.size() - 2);
    const size_t t = at(rng);
    const TransitionPair p{c.features[t], c.features[t + 1]};
    if (masked) {
      put_row(out, r, p.masked_input());
    } else {
      put_row(out, r, p.full_input());
    }
  }
  return out;
}

ad::Mat ReferenceLibrary::all_transitions(const std::vector<std::string>& names,
                                          bool masked) const {
  Eigen::Index rows = 0;
  for (const ReferenceClip& c : clips_) {
    if (contains(names, c.name)) rows += static_cast<Eigen::Index>(c.features.size()) - 1;
  }
  const int dim = masked ? 2 * kMaskedFeatureDim : 2 * kFullFeatureDim;
  ad::Mat out(rows, dim);
  Eigen::Index r = 0;
  for (const ReferenceClip& c : clips_) {
    if (!contains(names, c.name)) continue;
    for (size_t t = 0; t + 1 < c.features.size(); ++t, ++r) {
      const TransitionPair p{c.features[t], c.features[t + 1]};
      if (masked) {
        put_row(out, r, p.masked_input());
      } else {
        put_row(out, r, p.full_input());
      }
    }
  }
  return out;
}

void ReferenceLibrary::write_jsonl(std::ostream& out) const {
  for (const ReferenceClip& c : clips_) {
    nlohmann::json j;
    j["name"] = c.name;
    j["dt"] = c.dt;
    nlohmann::json frames = nlohmann::json::array();
    for (const MotionFeatures& f : c.features) frames.push_back(f.full);
    j["features"] = std::move(frames);
    out << j.dump() << '\n';
  }
}

ReferenceLibrary ReferenceLibrary::read_jsonl(std::istream& in) {
  ReferenceLibrary lib;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "reference line " + std::to_string(line_no);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::kConfig, where + ": " + e.what());
    }
    ReferenceClip clip;
    try {
      clip.name = j.at("name").get<std::string>();
      clip.dt = j.value("dt", 1.0 / 30.0);
      for (const auto& frame : j.at("features")) {
        if (frame.size() != kFullFeatureDim) {
          fail(ErrorCode::kConfig, where + ": features rows need " +
                                       std::to_string(kFullFeatureDim) + " values");
        }
        MotionFeatures f;
        for (int i = 0; i < kFullFeatureDim; ++i) f.full[i] = frame[i].get<double>();
        clip.features.push_back(f);
      }
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::kConfig, where + ": " + e.what());
    }
    lib.add(std::move(clip));
  }
  return lib;
}

std::vector<std::string> full_reference_set() {
  return {"walk-forward", "side-step-left", "side-step-right"};
}

std::vector<std::string> masked_reference_set(bool full_task) {
  std::vector<std::string> s = full_reference_set();
  s.push_back("lower-hands");
  s.push_back("raise-hands");
  if (full_task) s.push_back("walk-backward");
  return s;
}

Discriminator::Discriminator(int input_dim, std::vector<int> hidden,
                             std::uint64_t seed)
    : input_dim_(input_dim), hidden_(std::move(hidden)) {
  if (input_dim <= 0) fail(ErrorCode::kInvalidArgument, "discriminator input dim");
  std::mt19937_64 rng(seed);
  std::vector<int> sizes = hidden_;
  sizes.push_back(1);
  mlp_ = nn::Mlp(params_, "disc", input_dim, sizes, rng);
  mean_ = ad::Vec::Zero(input_dim);
  std_ = ad::Vec::Ones(input_dim);
}

void Discriminator::set_normalizer(const ad::Vec& mean, const ad::Vec& std) {
  if (mean.size() != input_dim_ || std.size() != input_dim_) {
    fail(ErrorCode::kInvalidArgument, "discriminator normalizer size");
  }
  mean_ = mean;
  std_ = std.cwiseMax(kStdFloor);
}

void Discriminator::fit_normalizer(const ad::Mat& reference) {
  if (reference.rows() == 0) fail(ErrorCode::kInvalidArgument, "empty reference batch");
  const ad::Vec mean = reference.colwise().mean().transpose();
  ad::Mat centered = reference.rowwise() - mean.transpose();
  const ad::Vec var = centered.cwiseAbs2().colwise().mean().transpose();
  set_normalizer(mean, var.cwiseSqrt());
}

ad::Var Discriminator::forward(ad::Tape& t, const ad::Mat& inputs) const {
  if (inputs.cols() != input_dim_) {
    fail(ErrorCode::kInvalidArgument, "discriminator input has " +
                                          std::to_string(inputs.cols()) + " columns, expected " +
                                          std::to_string(input_dim_));
  }
  ad::Mat x = (inputs.rowwise() - mean_.transpose()).array().rowwise() /
              std_.transpose().array();
  return mlp_(t, t.constant(std::move(x)));
}

ad::Vec Discriminator::logits(const ad::Mat& inputs) const {
  ad::Tape t;
  return forward(t, inputs).value().col(0);
}

ad::Vec Discriminator::probabilities(const ad::Mat& inputs) const {
  return logits(inputs).unaryExpr([](double z) { return sigmoid(z); });
}

double Discriminator::loss_and_grad(const ad::Mat& reference,
                                    const ad::Mat& policy) {
  if (reference.rows() == 0 || policy.rows() == 0) {
    fail(ErrorCode::kInvalidArgument, "discriminator loss: empty batch");
  }
  ad::Tape t;
  const ad::Var zr = forward(t, reference);
  const ad::Var zp = forward(t, policy);
  const ad::Var loss = ad::add(ad::mean(ad::softplus(ad::scale(zr, -1.0))),
                               ad::mean(ad::softplus(zp)));
  t.backward(loss);
  return loss.scalar();
}

double Discriminator::accuracy(const ad::Mat& reference,
                               const ad::Mat& policy) const {
  const Eigen::Index n = reference.rows() + policy.rows();
  if (n == 0) fail(ErrorCode::kInvalidArgument, "discriminator accuracy: empty batch");
  const ad::Vec zr = logits(reference), zp = logits(policy);
  const Eigen::Index correct = (zr.array() > 0.0).count() + (zp.array() <= 0.0).count();
  return static_cast<double>(correct) / static_cast<double>(n);
}

double discriminator_loss(const ad::Vec& d_reference, const ad::Vec& d_policy) {
  if (d_reference.size() == 0 || d_policy.size() == 0) {
    fail(ErrorCode::kInvalidArgument, "discriminator loss: empty batch");
  }
  constexpr double kEps = 1e-7;
  const ad::Vec r = d_reference.cwiseMax(kEps).cwiseMin(1.0 - kEps);
  const ad::Vec p = d_policy.cwiseMax(kEps).cwiseMin(1.0 - kEps);
  return -r.array().log().mean() - (1.0 - p.array()).log().mean();
}

double style_reward(double d) {
  return -std::log(1.0 - std::clamp(d, 0.0, 1.0 - 1e-4));
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double blend(double r_mask, double r_full, double alpha) {
  const double s = sigmoid(alpha);
  return s * r_mask + (1.0 - s) * r_full;
}

double combined_reward(double r_task, double r_style, const CombineWeights& w) {
  return w.task * r_task + w.style * r_style;
}

}  // namespace coopcarry
