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

// Tape-based reverse-mode differentiation over row-major matrices.
//
// A Tape records every operation of one forward pass. Values are stored per
// node; backward() walks the tape in reverse and accumulates gradients,
// finally adding parameter gradients into Parameter::grad. Rows are samples
// throughout; grouped attention takes explicit row offsets so ragged sets
// (a variable number of teammates per sample) batch without padding.

#ifndef COOPCARRY_AUTODIFF_HPP_
#define COOPCARRY_AUTODIFF_HPP_

#include <Eigen/Core>
#include <deque>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace coopcarry::ad {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;

struct Parameter {
  std::string name;
  Mat value;
  Mat grad;
};

// Owns parameters at stable addresses.
class ParamSet {
 public:
  Parameter& add(std::string name, Mat value);
  void zero_grad();
  size_t count() const;  // scalar parameters

  std::deque<Parameter>& items() { return items_; }
  const std::deque<Parameter>& items() const { return items_; }
  Parameter* find(const std::string& name);

 private:
  std::deque<Parameter> items_;
};

class Tape;

class Var {
 public:
  Var() = default;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  const Mat& value() const;
  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const { return value()(0, 0); }

 private:
  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, const Mat& grad_out)>;

  Var constant(Mat value);
  // Parameter leaf; its value is referenced, not copied.
  Var param(Parameter& p);

  // Records an op result. `backward` is called with the node's gradient.
  Var record(Mat value, std::initializer_list<Var> inputs, Backward backward);
  Var record_many(Mat value, std::span<const Var> inputs, Backward backward);

  const Mat& value(int id) const;
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }

  // Adds `g` into the gradient of node `id` (no-op if it needs none).
  void accumulate(int id, const Mat& g);
  template <typename Expr>
  void accumulate_expr(int id, const Expr& g) {
    Node& n = nodes_[id];
    if (!n.requires_grad) return;
    if (n.grad.size() == 0) {
      n.grad = g;
    } else {
      n.grad += g;
    }
  }

  // Reverse sweep seeded with `seed` (same shape as out) or 1 for scalars.
  void backward(Var out, const Mat& seed);
  void backward(Var scalar_out);

  size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Mat value;
    const Mat* ref = nullptr;
    Mat grad;
    Parameter* param = nullptr;
    Backward backward;
    bool requires_grad = false;
  };
  std::vector<Node> nodes_;
};

// -- elementwise and linear algebra ------------------------------------------
// x w where each output row depends only on the matching row of x, bit for
// bit, independent of the batch size.
Mat row_stable_product(const Mat& x, const Mat& w);
Var matmul(Var x, Var w);
Var linear(Var x, Var w, Var b);  // x w + 1 b, b is 1 x out
Var add(Var a, Var b);            // same shape
Var sub(Var a, Var b);
Var mul(Var a, Var b);            // Hadamard
Var add_row(Var x, Var row);      // broadcast a 1 x c row over x
Var scale(Var x, double s);
Var add_scalar(Var x, double s);
Var relu(Var x);
Var exp(Var x);
Var log(Var x);
Var sigmoid(Var x);
Var softplus(Var x);
Var square(Var x);
Var clamp(Var x, double lo, double hi);  // zero gradient outside
Var minimum(Var a, Var b);
Var sum(Var x);   // 1 x 1
Var mean(Var x);  // 1 x 1
Var weighted_sum(Var x, const Mat& weights);  // sum(x .* weights), 1 x 1
Var row_scale(Var x, const Vec& s);           // row r multiplied by s(r)
Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5);

// Interleaves parts row-wise: output row s * P + p is row s of part p. A
// 1 x c part broadcasts to every sample.
Var interleave(const std::vector<Var>& parts);
// Rows offset, offset + stride, ...
Var take_rows(Var x, int stride, int offset);

// Multi-head scaled dot-product attention over groups. Queries of group g are
// rows [q_offsets[g], q_offsets[g+1]); its keys/values rows
// [kv_offsets[g], kv_offsets[g+1]). Groups without keys output zeros.
Var attention(Var q, Var k, Var v, std::span<const int> q_offsets,
              std::span<const int> kv_offsets, int heads);

// Diagonal Gaussian log-density per row (B x 1).
Var gaussian_log_prob(Var mean, Var log_std, const Mat& actions);

// -- initialization ----------------------------------------------------------
Mat uniform_init(int rows, int cols, double bound, std::mt19937_64& rng);

}  // namespace coopcarry::ad

#endif  // COOPCARRY_AUTODIFF_HPP_
