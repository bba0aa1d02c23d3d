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

#include "coopcarry/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>

#include "coopcarry/error.hpp"

namespace coopcarry::ad {
namespace {

void check_same_shape(const Mat& a, const Mat& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    fail(ErrorCode::kInvalidArgument, std::string(op) + ": shape mismatch");
  }
}

}  // namespace

Parameter& ParamSet::add(std::string name, Mat value) {
  Parameter& p = items_.emplace_back();
  p.name = std::move(name);
  p.grad = Mat::Zero(value.rows(), value.cols());
  p.value = std::move(value);
  return p;
}

void ParamSet::zero_grad() {
  for (Parameter& p : items_) p.grad.setZero(p.value.rows(), p.value.cols());
}

size_t ParamSet::count() const {
  size_t n = 0;
  for (const Parameter& p : items_) n += static_cast<size_t>(p.value.size());
  return n;
}

Parameter* ParamSet::find(const std::string& name) {
  for (Parameter& p : items_) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

const Mat& Var::value() const { return tape_->value(id_); }

Var Tape::constant(Mat value) {
  Node& n = nodes_.emplace_back();
  n.value = std::move(value);
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::param(Parameter& p) {
  Node& n = nodes_.emplace_back();
  n.ref = &p.value;
  n.param = &p;
  n.requires_grad = true;
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::record(Mat value, std::initializer_list<Var> inputs,
                 Backward backward) {
  return record_many(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
                     std::move(backward));
}

Var Tape::record_many(Mat value, std::span<const Var> inputs, Backward backward) {
  bool rg = false;
  for (const Var& v : inputs) rg = rg || nodes_[v.id()].requires_grad;
  Node& n = nodes_.emplace_back();
  n.value = std::move(value);
  n.requires_grad = rg;
  if (rg) n.backward = std::move(backward);
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

const Mat& Tape::value(int id) const {
  const Node& n = nodes_[id];
  return n.ref ? *n.ref : n.value;
}

void Tape::accumulate(int id, const Mat& g) { accumulate_expr(id, g); }

void Tape::backward(Var out, const Mat& seed) {
  check_same_shape(value(out.id()), seed, "backward");
  if (!seed.allFinite()) {
    fail(ErrorCode::kNumeric, "backward: non-finite seed gradient");
  }
  for (Node& n : nodes_) n.grad.resize(0, 0);
  accumulate(out.id(), seed);
  for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.grad.size() == 0) continue;
    if (n.backward) n.backward(*this, n.grad);
    if (n.param) {
      if (n.param->grad.size() == 0) {
        n.param->grad = Mat::Zero(n.param->value.rows(), n.param->value.cols());
      }
      n.param->grad += n.grad;
    }
  }
}

void Tape::backward(Var scalar_out) {
  const Mat& v = value(scalar_out.id());
  if (v.size() != 1) fail(ErrorCode::kInvalidArgument, "backward: not a scalar");
  if (!std::isfinite(v(0, 0))) fail(ErrorCode::kNumeric, "backward: non-finite loss");
  backward(scalar_out, Mat::Ones(1, 1));
}

// Forward products accumulate every output entry over k in ascending order,
// whatever the number of rows. A sample's activations therefore do not depend
// on which other samples share its batch, which keeps log-probabilities at
// collection time and in minibatches bit-identical.
Mat row_stable_product(const Mat& x, const Mat& w) {
  if (x.cols() != w.rows()) {
    fail(ErrorCode::kInvalidArgument, "matmul: inner dimensions differ");
  }
  const Eigen::Index rows = x.rows(), inner = x.cols(), cols = w.cols();
  Mat out = Mat::Zero(rows, cols);
  const double* wp = w.data();
  // Four rows share each pass over w. Every output row still sums its terms
  // in ascending k, whichever block it lands in.
  Eigen::Index r = 0;
  for (; r + 4 <= rows; r += 4) {
    double* o0 = out.data() + r * cols;
    double* o1 = o0 + cols;
    double* o2 = o1 + cols;
    double* o3 = o2 + cols;
    const double* x0 = x.data() + r * inner;
    const double* x1 = x0 + inner;
    const double* x2 = x1 + inner;
    const double* x3 = x2 + inner;
    for (Eigen::Index k = 0; k < inner; ++k) {
      const double a0 = x0[k], a1 = x1[k], a2 = x2[k], a3 = x3[k];
      const double* wk = wp + k * cols;
      for (Eigen::Index j = 0; j < cols; ++j) {
        const double v = wk[j];
        o0[j] += a0 * v;
        o1[j] += a1 * v;
        o2[j] += a2 * v;
        o3[j] += a3 * v;
      }
    }
  }
  for (; r < rows; ++r) {
    double* o = out.data() + r * cols;
    const double* xr = x.data() + r * inner;
    for (Eigen::Index k = 0; k < inner; ++k) {
      const double a = xr[k];
      const double* wk = wp + k * cols;
      for (Eigen::Index j = 0; j < cols; ++j) o[j] += a * wk[j];
    }
  }
  return out;
}

Var matmul(Var x, Var w) {
  Tape& t = *x.tape();
  const int xi = x.id(), wi = w.id();
  return t.record(row_stable_product(x.value(), w.value()), {x, w},
                  [xi, wi](Tape& t, const Mat& g) {
                    if (t.requires_grad(xi)) {
                      t.accumulate_expr(xi, g * t.value(wi).transpose());
                    }
                    if (t.requires_grad(wi)) {
                      t.accumulate_expr(wi, t.value(xi).transpose() * g);
                    }
                  });
}

Var linear(Var x, Var w, Var b) {
  Tape& t = *x.tape();
  Mat y = row_stable_product(x.value(), w.value());
  y.rowwise() += b.value().row(0);
  const int xi = x.id(), wi = w.id(), bi = b.id();
  return t.record(std::move(y), {x, w, b}, [xi, wi, bi](Tape& t, const Mat& g) {
    if (t.requires_grad(xi)) t.accumulate_expr(xi, g * t.value(wi).transpose());
    if (t.requires_grad(wi)) t.accumulate_expr(wi, t.value(xi).transpose() * g);
    if (t.requires_grad(bi)) t.accumulate_expr(bi, g.colwise().sum());
  });
}

Var add(Var a, Var b) {
  check_same_shape(a.value(), b.value(), "add");
  const int ai = a.id(), bi = b.id();
  return a.tape()->record(a.value() + b.value(), {a, b},
                          [ai, bi](Tape& t, const Mat& g) {
                            t.accumulate(ai, g);
                            t.accumulate(bi, g);
                          });
}

Var sub(Var a, Var b) {
  check_same_shape(a.value(), b.value(), "sub");
  const int ai = a.id(), bi = b.id();
  return a.tape()->record(a.value() - b.value(), {a, b},
                          [ai, bi](Tape& t, const Mat& g) {
                            t.accumulate(ai, g);
                            t.accumulate_expr(bi, -g);
                          });
}

Var mul(Var a, Var b) {
  check_same_shape(a.value(), b.value(), "mul");
  const int ai = a.id(), bi = b.id();
  return a.tape()->record(
      a.value().cwiseProduct(b.value()), {a, b}, [ai, bi](Tape& t, const Mat& g) {
        if (t.requires_grad(ai)) t.accumulate_expr(ai, g.cwiseProduct(t.value(bi)));
        if (t.requires_grad(bi)) t.accumulate_expr(bi, g.cwiseProduct(t.value(ai)));
      });
}

Var add_row(Var x, Var row) {
  if (row.rows() != 1 || row.cols() != x.cols()) {
    fail(ErrorCode::kInvalidArgument, "add_row: shape mismatch");
  }
  Mat y = x.value();
  y.rowwise() += row.value().row(0);
  const int xi = x.id(), ri = row.id();
  return x.tape()->record(std::move(y), {x, row}, [xi, ri](Tape& t, const Mat& g) {
    t.accumulate(xi, g);
    if (t.requires_grad(ri)) t.accumulate_expr(ri, g.colwise().sum());
  });
}

Var scale(Var x, double s) {
  const int xi = x.id();
  return x.tape()->record(x.value() * s, {x}, [xi, s](Tape& t, const Mat& g) {
    t.accumulate_expr(xi, g * s);
  });
}

Var add_scalar(Var x, double s) {
  const int xi = x.id();
  return x.tape()->record(x.value().array() + s, {x},
                          [xi](Tape& t, const Mat& g) { t.accumulate(xi, g); });
}

Var relu(Var x) {
  const int xi = x.id();
  return x.tape()->record(x.value().cwiseMax(0.0), {x}, [xi](Tape& t, const Mat& g) {
    t.accumulate_expr(xi, (t.value(xi).array() > 0.0).select(g, 0.0));
  });
}

Var exp(Var x) {
  const int xi = x.id();
  auto saved = std::make_shared<Mat>(x.value().array().exp().matrix());
  return x.tape()->record(*saved, {x}, [xi, saved](Tape& t, const Mat& g) {
    t.accumulate_expr(xi, g.cwiseProduct(*saved));
  });
}

Var log(Var x) {
  const int xi = x.id();
  return x.tape()->record(x.value().array().log(), {x}, [xi](Tape& t, const Mat& g) {
    t.accumulate_expr(xi, g.cwiseQuotient(t.value(xi)));
  });
}

Var sigmoid(Var x) {
  const int xi = x.id();
  Mat y = (1.0 + (-x.value().array()).exp()).inverse();
  auto saved = std::make_shared<Mat>(y);
  return x.tape()->record(std::move(y), {x}, [xi, saved](Tape& t, const Mat& g) {
    t.accumulate_expr(xi, g.cwiseProduct(
                              saved->cwiseProduct((1.0 - saved->array()).matrix())));
  });
}

Var softplus(Var x) {
  const int xi = x.id();
  const auto& v = x.value().array();
  Mat y = v.max(0.0) + (-v.abs()).exp().log1p();
  return x.tape()->record(std::move(y), {x}, [xi](Tape& t, const Mat& g) {
    const Mat s = (1.0 + (-t.value(xi).array()).exp()).inverse();
    t.accumulate_expr(xi, g.cwiseProduct(s));
  });
}

Var square(Var x) {
  const int xi = x.id();
  return x.tape()->record(x.value().array().square(), {x},
                          [xi](Tape& t, const Mat& g) {
                            t.accumulate_expr(xi, 2.0 * g.cwiseProduct(t.value(xi)));
                          });
}

Var clamp(Var x, double lo, double hi) {
  const int xi = x.id();
  return x.tape()->record(x.value().cwiseMax(lo).cwiseMin(hi), {x},
                          [xi, lo, hi](Tape& t, const Mat& g) {
                            const auto& v = t.value(xi).array();
                            t.accumulate_expr(xi, ((v > lo) && (v < hi)).select(g, 0.0));
                          });
}

Var minimum(Var a, Var b) {
  check_same_shape(a.value(), b.value(), "minimum");
  const int ai = a.id(), bi = b.id();
  return a.tape()->record(
      a.value().cwiseMin(b.value()), {a, b}, [ai, bi](Tape& t, const Mat& g) {
        const auto pick_a = t.value(ai).array() <= t.value(bi).array();
        if (t.requires_grad(ai)) t.accumulate_expr(ai, pick_a.select(g, 0.0));
        if (t.requires_grad(bi)) t.accumulate_expr(bi, pick_a.select(0.0, g));
      });
}

Var sum(Var x) {
  const int xi = x.id();
  const Eigen::Index r = x.rows(), c = x.cols();
  Mat y(1, 1);
  y(0, 0) = x.value().sum();
  return x.tape()->record(std::move(y), {x}, [xi, r, c](Tape& t, const Mat& g) {
    t.accumulate_expr(xi, Mat::Constant(r, c, g(0, 0)));
  });
}

Var mean(Var x) {
  const double n = static_cast<double>(x.value().size());
  if (n == 0) fail(ErrorCode::kInvalidArgument, "mean: empty input");
  return scale(sum(x), 1.0 / n);
}

Var weighted_sum(Var x, const Mat& weights) {
  check_same_shape(x.value(), weights, "weighted_sum");
  const int xi = x.id();
  Mat y(1, 1);
  y(0, 0) = x.value().cwiseProduct(weights).sum();
  auto w = std::make_shared<Mat>(weights);
  return x.tape()->record(std::move(y), {x}, [xi, w](Tape& t, const Mat& g) {
    t.accumulate_expr(xi, *w * g(0, 0));
  });
}

Var row_scale(Var x, const Vec& s) {
  if (s.size() != x.rows()) fail(ErrorCode::kInvalidArgument, "row_scale: size");
  const int xi = x.id();
  auto saved = std::make_shared<Vec>(s);
  return x.tape()->record(s.asDiagonal() * x.value(), {x},
                          [xi, saved](Tape& t, const Mat& g) {
                            t.accumulate_expr(xi, saved->asDiagonal() * g);
                          });
}

Var layer_norm(Var x, Var gain, Var bias, double eps) {
  const Mat& xv = x.value();
  const Eigen::Index rows = xv.rows(), cols = xv.cols();
  auto xhat = std::make_shared<Mat>(rows, cols);
  auto inv = std::make_shared<Vec>(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const double mu = xv.row(r).mean();
    const double var = (xv.row(r).array() - mu).square().mean();
    (*inv)(r) = 1.0 / std::sqrt(var + eps);
    xhat->row(r) = (xv.row(r).array() - mu) * (*inv)(r);
  }
  Mat y = xhat->array().rowwise() * gain.value().row(0).array();
  y.rowwise() += bias.value().row(0);
  const int xi = x.id(), gi = gain.id(), bi = bias.id();
  return x.tape()->record(
      std::move(y), {x, gain, bias}, [xi, gi, bi, xhat, inv](Tape& t, const Mat& g) {
        if (t.requires_grad(gi)) {
          t.accumulate_expr(gi, g.cwiseProduct(*xhat).colwise().sum());
        }
        if (t.requires_grad(bi)) t.accumulate_expr(bi, g.colwise().sum());
        if (t.requires_grad(xi)) {
          const Mat dxhat = g.array().rowwise() * t.value(gi).row(0).array();
          const Vec m1 = dxhat.rowwise().mean();
          const Vec m2 = dxhat.cwiseProduct(*xhat).rowwise().mean();
          Mat dx = dxhat;
          dx.colwise() -= m1;
          dx -= m2.asDiagonal() * (*xhat);
          t.accumulate_expr(xi, inv->asDiagonal() * dx);
        }
      });
}

Var interleave(const std::vector<Var>& parts) {
  if (parts.empty()) fail(ErrorCode::kInvalidArgument, "interleave: no parts");
  const int p_count = static_cast<int>(parts.size());
  Eigen::Index batch = 1;
  const Eigen::Index cols = parts[0].cols();
  for (const Var& v : parts) {
    if (v.cols() != cols) fail(ErrorCode::kInvalidArgument, "interleave: cols");
    batch = std::max(batch, v.rows());
  }
  for (const Var& v : parts) {
    if (v.rows() != 1 && v.rows() != batch) {
      fail(ErrorCode::kInvalidArgument, "interleave: rows");
    }
  }
  Mat y(batch * p_count, cols);
  for (int p = 0; p < p_count; ++p) {
    const Mat& v = parts[p].value();
    for (Eigen::Index s = 0; s < batch; ++s) {
      y.row(s * p_count + p) = v.row(v.rows() == 1 ? 0 : s);
    }
  }
  std::vector<int> ids;
  for (const Var& v : parts) ids.push_back(v.id());
  return parts[0].tape()->record_many(
      std::move(y), parts, [ids, batch, p_count](Tape& t, const Mat& g) {
        for (int p = 0; p < p_count; ++p) {
          const int id = ids[p];
          if (!t.requires_grad(id)) continue;
          const Eigen::Index rows = t.value(id).rows();
          Mat gp = Mat::Zero(rows, g.cols());
          for (Eigen::Index s = 0; s < batch; ++s) {
            gp.row(rows == 1 ? 0 : s) += g.row(s * p_count + p);
          }
          t.accumulate(id, gp);
        }
      });
}

Var take_rows(Var x, int stride, int offset) {
  const Mat& v = x.value();
  const Eigen::Index n = (v.rows() - offset + stride - 1) / stride;
  Mat y(n, v.cols());
  for (Eigen::Index i = 0; i < n; ++i) y.row(i) = v.row(offset + i * stride);
  const int xi = x.id();
  const Eigen::Index rows = v.rows();
  return x.tape()->record(std::move(y), {x},
                          [xi, stride, offset, rows](Tape& t, const Mat& g) {
                            Mat gx = Mat::Zero(rows, g.cols());
                            for (Eigen::Index i = 0; i < g.rows(); ++i) {
                              gx.row(offset + i * stride) = g.row(i);
                            }
                            t.accumulate(xi, gx);
                          });
}

Var attention(Var q, Var k, Var v, std::span<const int> q_offsets,
              std::span<const int> kv_offsets, int heads) {
  const Mat& qv = q.value();
  const Mat& kv = k.value();
  const Mat& vv = v.value();
  const Eigen::Index d = qv.cols();
  if (kv.cols() != d || vv.cols() != d || kv.rows() != vv.rows() ||
      d % heads != 0 || q_offsets.size() != kv_offsets.size()) {
    fail(ErrorCode::kInvalidArgument, "attention: shape mismatch");
  }
  const Eigen::Index dh = d / heads;
  const double scale_f = 1.0 / std::sqrt(static_cast<double>(dh));
  const size_t groups = q_offsets.size() - 1;

  auto probs = std::make_shared<std::vector<Mat>>(groups * heads);
  Mat out = Mat::Zero(qv.rows(), d);
  for (size_t g = 0; g < groups; ++g) {
    const int qs = q_offsets[g], nq = q_offsets[g + 1] - qs;
    const int ks = kv_offsets[g], nk = kv_offsets[g + 1] - ks;
    if (nq == 0 || nk == 0) continue;
    for (int h = 0; h < heads; ++h) {
      Mat s = (qv.block(qs, h * dh, nq, dh) * kv.block(ks, h * dh, nk, dh).transpose()) *
              scale_f;
      for (int r = 0; r < nq; ++r) {
        const double mx = s.row(r).maxCoeff();
        s.row(r) = (s.row(r).array() - mx).exp();
        s.row(r) /= s.row(r).sum();
      }
      out.block(qs, h * dh, nq, dh) = s * vv.block(ks, h * dh, nk, dh);
      (*probs)[g * heads + h] = std::move(s);
    }
  }

  const int qi = q.id(), ki = k.id(), vi = v.id();
  std::vector<int> qo(q_offsets.begin(), q_offsets.end());
  std::vector<int> ko(kv_offsets.begin(), kv_offsets.end());
  return q.tape()->record(
      std::move(out), {q, k, v},
      [qi, ki, vi, qo = std::move(qo), ko = std::move(ko), probs, heads, dh,
       scale_f](Tape& t, const Mat& g) {
        const Mat& qv = t.value(qi);
        const Mat& kv = t.value(ki);
        const Mat& vv = t.value(vi);
        Mat dq = Mat::Zero(qv.rows(), qv.cols());
        Mat dk = Mat::Zero(kv.rows(), kv.cols());
        Mat dv = Mat::Zero(vv.rows(), vv.cols());
        const size_t groups = qo.size() - 1;
        for (size_t gi = 0; gi < groups; ++gi) {
          const int qs = qo[gi], nq = qo[gi + 1] - qs;
          const int ks = ko[gi], nk = ko[gi + 1] - ks;
          if (nq == 0 || nk == 0) continue;
          for (int h = 0; h < heads; ++h) {
            const Mat& p = (*probs)[gi * heads + h];
            const auto go = g.block(qs, h * dh, nq, dh);
            dv.block(ks, h * dh, nk, dh) += p.transpose() * go;
            const Mat dp = go * vv.block(ks, h * dh, nk, dh).transpose();
            Mat ds = p.cwiseProduct(dp);
            const Vec rs = ds.rowwise().sum();
            ds -= rs.asDiagonal() * p;
            ds *= scale_f;
            dq.block(qs, h * dh, nq, dh) += ds * kv.block(ks, h * dh, nk, dh);
            dk.block(ks, h * dh, nk, dh) += ds.transpose() * qv.block(qs, h * dh, nq, dh);
          }
        }
        t.accumulate(qi, dq);
        t.accumulate(ki, dk);
        t.accumulate(vi, dv);
      });
}

Var gaussian_log_prob(Var mean, Var log_std, const Mat& actions) {
  check_same_shape(mean.value(), actions, "gaussian_log_prob");
  if (log_std.rows() != 1 || log_std.cols() != mean.cols()) {
    fail(ErrorCode::kInvalidArgument, "gaussian_log_prob: log_std shape");
  }
  const Eigen::Index b = mean.rows(), a = mean.cols();
  const auto ls = log_std.value().row(0).array();
  const Eigen::ArrayXXd inv_std =
      (-log_std.value()).array().exp().replicate(b, 1);
  auto z = std::make_shared<Mat>((actions - mean.value()).array() * inv_std);
  const double log2pi = std::log(2.0 * std::numbers::pi);
  Mat y(b, 1);
  const double const_part = 2.0 * ls.sum() + static_cast<double>(a) * log2pi;
  for (Eigen::Index r = 0; r < b; ++r) {
    y(r, 0) = -0.5 * (z->row(r).squaredNorm() + const_part);
  }
  const int mi = mean.id(), si = log_std.id();
  return mean.tape()->record(
      std::move(y), {mean, log_std}, [mi, si, z, b](Tape& t, const Mat& g) {
        // d/dmu = z / sigma, d/dlog_sigma = z^2 - 1, each times g per row.
        if (t.requires_grad(mi)) {
          const Eigen::ArrayXXd inv_std =
              (-t.value(si)).array().exp().replicate(b, 1);
          Mat dm = (z->array() * inv_std).matrix();
          t.accumulate_expr(mi, g.col(0).asDiagonal() * dm);
        }
        if (t.requires_grad(si)) {
          const Mat ds = (z->array().square() - 1.0).matrix();
          t.accumulate_expr(si, g.col(0).transpose() * ds);
        }
      });
}

Mat uniform_init(int rows, int cols, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

}  // namespace coopcarry::ad
