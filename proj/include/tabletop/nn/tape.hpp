// Copyright 2026 The Tabletop Grounding Authors. All Rights Reserved.
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

#pragma once

#include <functional>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "tabletop/common/rng.hpp"

namespace tabletop::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct Parameter {
  Matrix value;
  Matrix grad;
};

/// Named parameters in deterministic (lexicographic) order.
class ParamStore {
 public:
  /// Uniform Glorot initialization.
  Parameter& add(const std::string& name, int rows, int cols, Rng& rng);
  Parameter& add_zeros(const std::string& name, int rows, int cols);
  Parameter& add_value(const std::string& name, Matrix value);

  Parameter& at(const std::string& name);
  const Parameter& at(const std::string& name) const;
  bool contains(const std::string& name) const { return params_.count(name) > 0; }

  std::map<std::string, Parameter>& all() { return params_; }
  const std::map<std::string, Parameter>& all() const { return params_; }

  void zero_grad();
  std::size_t num_values() const;
  /// Concatenated values, for bit-level comparisons.
  std::vector<double> flatten() const;

  friend bool operator==(const ParamStore& a, const ParamStore& b);

 private:
  std::map<std::string, Parameter> params_;
};

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;
  const Matrix& value() const;
  double scalar() const { return value()(0, 0); }
  int rows() const { return static_cast<int>(value().rows()); }
  int cols() const { return static_cast<int>(value().cols()); }
  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* t, int id) : tape_(t), id_(id) {}
  Tape* tape_ = nullptr;
  int id_ = -1;
};

/// Reverse-mode automatic differentiation over dense matrices.
class Tape {
 public:
  using Backward = std::function<void(Tape&, int self)>;

  Tape() { nodes_.reserve(1024); }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  Var constant_scalar(double v);
  /// Leaf bound to a parameter; gradients accumulate into p.grad on backward.
  Var param(Parameter& p);
  /// Read-only leaf: the value is used but never receives gradients.
  Var param(const Parameter& p);

  /// Creates an op node. `backward` reads grad(self) and calls accumulate()
  /// on inputs.
  Var record(Matrix value, std::initializer_list<Var> inputs, Backward backward);
  Var record(Matrix value, const std::vector<Var>& inputs, Backward backward);

  const Matrix& value(int id) const { return nodes_[id].value; }
  const Matrix& grad(int id) const { return nodes_[id].grad; }
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }
  void accumulate(int id, const Matrix& g);
  template <typename Expr>
  void accumulate_expr(int id, const Expr& g) {
    Node& n = nodes_[id];
    if (!n.requires_grad) return;
    if (n.grad.size() == 0) n.grad = g;
    else n.grad += g;
  }

  /// Backpropagates from a 1x1 node, then adds leaf gradients to params.
  void backward(Var loss);
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    Backward backward;
    Parameter* param = nullptr;
    bool requires_grad = false;
  };
  std::vector<Node> nodes_;
  std::unordered_map<Parameter*, int> param_nodes_;
  std::unordered_map<const Parameter*, int> const_nodes_;
};

// ---------------------------------------------------------------------------
// Operations

Var matmul(Var a, Var b);
Var add(Var a, Var b);
/// a (r x c) plus column vector b (r x 1) broadcast across columns.
Var add_bias(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);  ///< elementwise
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
Var tanh(Var a);
Var sigmoid(Var a);
Var relu(Var a);
/// Softmax over the entries of a column vector.
Var softmax(Var a);
Var log_softmax(Var a);
Var concat_rows(const std::vector<Var>& parts);
Var concat_cols(const std::vector<Var>& parts);
Var slice_rows(Var a, int start, int n);
Var column(Var a, int j);
/// Columns of `a` selected by index (with repetition).
Var gather_cols(Var a, std::span<const int> cols);
Var sum(Var a);
Var mean(Var a);
Var dot(Var a, Var b);
Var pick(Var a, int row, int col = 0);
/// Cosine similarity of two column vectors (1 x 1).
Var cosine(Var a, Var b);
/// Largest of several 1 x 1 values; gradient flows to the first maximizer.
Var max_of(const std::vector<Var>& scalars);
/// Elementwise max across equally sized matrices; gradient to first maximizer.
Var elementwise_max(const std::vector<Var>& parts);
/// Sum over i of w[i] * xs[i] for scalar weight nodes.
Var weighted_sum(Var weights, const std::vector<Var>& xs);
Var squared_norm(Var a);
Var transpose(Var a);

// ---------------------------------------------------------------------------
// Layers

struct Linear {
  Parameter* weight = nullptr;
  Parameter* bias = nullptr;

  static Linear create(ParamStore& store, const std::string& name, int in, int out, Rng& rng);
  static Linear bind(ParamStore& store, const std::string& name);
  Var operator()(Tape& t, Var x) const { return add_bias(matmul(t.param(*weight), x), t.param(*bias)); }
  Var apply_const(Tape& t, Var x) const {
    return add_bias(matmul(t.param(std::as_const(*weight)), x), t.param(std::as_const(*bias)));
  }
  int in() const { return static_cast<int>(weight->value.cols()); }
  int out() const { return static_cast<int>(weight->value.rows()); }
};

struct LstmState {
  Var h;
  Var c;
};

/// Single-layer LSTM cell with gates ordered (input, forget, cell, output).
struct LstmCell {
  Parameter* weight = nullptr;  ///< 4H x (I + H)
  Parameter* bias = nullptr;    ///< 4H x 1
  int hidden = 0;

  static LstmCell create(ParamStore& store, const std::string& name, int in, int hidden,
                         Rng& rng);
  static LstmCell bind(ParamStore& store, const std::string& name);
  LstmState zero_state(Tape& t) const;
  LstmState step(Tape& t, Var x, const LstmState& s) const;
};

/// Resolves named parameters onto a tape, either trainable (gradients reach
/// the store) or read-only.
class Binder {
 public:
  Binder(Tape& t, ParamStore& p) : tape_(&t), mut_(&p), const_(&p) {}
  Binder(Tape& t, const ParamStore& p) : tape_(&t), const_(&p) {}

  Tape& tape() const { return *tape_; }
  bool trainable() const { return mut_ != nullptr; }
  Var operator()(const std::string& name) const;
  /// W x + b for parameters name.w / name.b.
  Var linear(const std::string& name, Var x) const;
  LstmState lstm_zero(const std::string& name) const;
  LstmState lstm_step(const std::string& name, Var x, const LstmState& s) const;

 private:
  Tape* tape_;
  ParamStore* mut_ = nullptr;
  const ParamStore* const_;
};

}  // namespace tabletop::nn
