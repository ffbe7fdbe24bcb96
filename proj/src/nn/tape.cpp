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

#include "tabletop/nn/tape.hpp"

#include <cmath>

#include "tabletop/common/error.hpp"

namespace tabletop::nn {

// ---------------------------------------------------------------------------
// ParamStore

Parameter& ParamStore::add(const std::string& name, int rows, int cols, Rng& rng) {
  const double a = std::sqrt(6.0 / (rows + cols));
  Matrix m(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) m(i, j) = rng.uniform(-a, a);
  return add_value(name, std::move(m));
}

Parameter& ParamStore::add_zeros(const std::string& name, int rows, int cols) {
  return add_value(name, Matrix::Zero(rows, cols));
}

Parameter& ParamStore::add_value(const std::string& name, Matrix value) {
  if (params_.count(name)) throw InvalidArgument("duplicate parameter " + name);
  Parameter p;
  p.grad = Matrix::Zero(value.rows(), value.cols());
  p.value = std::move(value);
  return params_.emplace(name, std::move(p)).first->second;
}

Parameter& ParamStore::at(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw InvalidArgument("no parameter " + name);
  return it->second;
}

const Parameter& ParamStore::at(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw InvalidArgument("no parameter " + name);
  return it->second;
}

void ParamStore::zero_grad() {
  for (auto& [_, p] : params_) p.grad.setZero();
}

std::size_t ParamStore::num_values() const {
  std::size_t n = 0;
  for (const auto& [_, p] : params_) n += static_cast<std::size_t>(p.value.size());
  return n;
}

std::vector<double> ParamStore::flatten() const {
  std::vector<double> out;
  out.reserve(num_values());
  for (const auto& [_, p] : params_) out.insert(out.end(), p.value.data(), p.value.data() + p.value.size());
  return out;
}

bool operator==(const ParamStore& a, const ParamStore& b) {
  if (a.params_.size() != b.params_.size()) return false;
  for (auto ia = a.params_.begin(), ib = b.params_.begin(); ia != a.params_.end(); ++ia, ++ib) {
    if (ia->first != ib->first) return false;
    if (ia->second.value.rows() != ib->second.value.rows() ||
        ia->second.value.cols() != ib->second.value.cols())
      return false;
    if (ia->second.value != ib->second.value) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Tape

const Matrix& Var::value() const { return tape_->value(id_); }

Var Tape::constant(Matrix value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::constant_scalar(double v) { return constant(Matrix::Constant(1, 1, v)); }

Var Tape::param(Parameter& p) {
  auto it = param_nodes_.find(&p);
  if (it != param_nodes_.end()) return Var(this, it->second);
  Node n;
  n.value = p.value;
  n.param = &p;
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  const int id = static_cast<int>(nodes_.size()) - 1;
  param_nodes_.emplace(&p, id);
  return Var(this, id);
}

Var Tape::param(const Parameter& p) {
  auto it = const_nodes_.find(&p);
  if (it != const_nodes_.end()) return Var(this, it->second);
  Var v = constant(p.value);
  const_nodes_.emplace(&p, v.id());
  return v;
}

Var Tape::record(Matrix value, std::initializer_list<Var> inputs, Backward backward) {
  bool rg = false;
  for (const Var& v : inputs) {
    if (v.tape_ != this) throw InvalidArgument("Var from a different tape");
    rg = rg || nodes_[v.id_].requires_grad;
  }
  Node n;
  n.value = std::move(value);
  n.requires_grad = rg;
  if (rg) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::record(Matrix value, const std::vector<Var>& inputs, Backward backward) {
  bool rg = false;
  for (const Var& v : inputs) {
    if (v.tape_ != this) throw InvalidArgument("Var from a different tape");
    rg = rg || nodes_[v.id_].requires_grad;
  }
  Node n;
  n.value = std::move(value);
  n.requires_grad = rg;
  if (rg) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

void Tape::accumulate(int id, const Matrix& g) { accumulate_expr(id, g); }

void Tape::backward(Var loss) {
  if (loss.tape_ != this) throw InvalidArgument("loss from a different tape");
  const Matrix& lv = nodes_[loss.id_].value;
  if (lv.rows() != 1 || lv.cols() != 1) throw DimensionMismatch("backward needs a 1x1 loss");
  if (!std::isfinite(lv(0, 0))) throw NonFiniteLoss("loss is not finite");
  if (!nodes_[loss.id_].requires_grad) return;
  nodes_[loss.id_].grad = Matrix::Ones(1, 1);
  for (int i = loss.id_; i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.grad.size() == 0 || !n.backward) continue;
    n.backward(*this, i);
  }
  for (auto& [p, id] : param_nodes_) {
    const Matrix& g = nodes_[id].grad;
    if (g.size() != 0) p->grad += g;
  }
}

// ---------------------------------------------------------------------------
// Operations

namespace {

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionMismatch(std::string(op) + ": " + std::to_string(a.rows()) + "x" +
                            std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                            std::to_string(b.cols()));
  }
}

}  // namespace

Var matmul(Var a, Var b) {
  if (a.cols() != b.rows()) {
    throw DimensionMismatch("matmul: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                            " * " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
  Tape& t = *a.tape();
  const int ia = a.id(), ib = b.id();
  return t.record(a.value() * b.value(), {a, b}, [ia, ib](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    if (t.requires_grad(ia)) t.accumulate_expr(ia, g * t.value(ib).transpose());
    if (t.requires_grad(ib)) t.accumulate_expr(ib, t.value(ia).transpose() * g);
  });
}

Var add(Var a, Var b) {
  require_same_shape(a, b, "add");
  Tape& t = *a.tape();
  const int ia = a.id(), ib = b.id();
  return t.record(a.value() + b.value(), {a, b}, [ia, ib](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    t.accumulate(ia, g);
    t.accumulate(ib, g);
  });
}

Var add_bias(Var a, Var b) {
  if (b.cols() != 1 || b.rows() != a.rows()) throw DimensionMismatch("add_bias shape");
  Tape& t = *a.tape();
  const int ia = a.id(), ib = b.id();
  Matrix v = a.value().colwise() + b.value().col(0);
  return t.record(std::move(v), {a, b}, [ia, ib](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    t.accumulate(ia, g);
    if (t.requires_grad(ib)) t.accumulate_expr(ib, g.rowwise().sum());
  });
}

Var sub(Var a, Var b) {
  require_same_shape(a, b, "sub");
  Tape& t = *a.tape();
  const int ia = a.id(), ib = b.id();
  return t.record(a.value() - b.value(), {a, b}, [ia, ib](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    t.accumulate(ia, g);
    if (t.requires_grad(ib)) t.accumulate_expr(ib, -g);
  });
}

Var mul(Var a, Var b) {
  require_same_shape(a, b, "mul");
  Tape& t = *a.tape();
  const int ia = a.id(), ib = b.id();
  return t.record(a.value().cwiseProduct(b.value()), {a, b}, [ia, ib](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    if (t.requires_grad(ia)) t.accumulate_expr(ia, g.cwiseProduct(t.value(ib)));
    if (t.requires_grad(ib)) t.accumulate_expr(ib, g.cwiseProduct(t.value(ia)));
  });
}

Var scale(Var a, double s) {
  Tape& t = *a.tape();
  const int ia = a.id();
  return t.record(a.value() * s, {a},
                  [ia, s](Tape& t, int self) { t.accumulate_expr(ia, t.grad(self) * s); });
}

Var add_scalar(Var a, double s) {
  Tape& t = *a.tape();
  const int ia = a.id();
  return t.record(a.value().array() + s, {a},
                  [ia](Tape& t, int self) { t.accumulate(ia, t.grad(self)); });
}

Var tanh(Var a) {
  Tape& t = *a.tape();
  const int ia = a.id();
  return t.record(a.value().array().tanh().matrix(), {a}, [ia](Tape& t, int self) {
    const Matrix& y = t.value(self);
    t.accumulate_expr(ia, t.grad(self).cwiseProduct((1.0 - y.array().square()).matrix()));
  });
}

Var sigmoid(Var a) {
  Tape& t = *a.tape();
  const int ia = a.id();
  Matrix y = (1.0 / (1.0 + (-a.value().array()).exp())).matrix();
  return t.record(std::move(y), {a}, [ia](Tape& t, int self) {
    const Matrix& y = t.value(self);
    t.accumulate_expr(ia, t.grad(self).cwiseProduct((y.array() * (1.0 - y.array())).matrix()));
  });
}

Var relu(Var a) {
  Tape& t = *a.tape();
  const int ia = a.id();
  return t.record(a.value().cwiseMax(0.0), {a}, [ia](Tape& t, int self) {
    const Matrix& x = t.value(ia);
    t.accumulate_expr(ia, t.grad(self).cwiseProduct((x.array() > 0.0).cast<double>().matrix()));
  });
}

Var softmax(Var a) {
  Tape& t = *a.tape();
  const int ia = a.id();
  const Matrix& x = a.value();
  Matrix e = (x.array() - x.maxCoeff()).exp().matrix();
  e /= e.sum();
  return t.record(std::move(e), {a}, [ia](Tape& t, int self) {
    const Matrix& y = t.value(self);
    const Matrix& g = t.grad(self);
    const double s = y.cwiseProduct(g).sum();
    t.accumulate_expr(ia, y.cwiseProduct((g.array() - s).matrix()));
  });
}

Var log_softmax(Var a) {
  Tape& t = *a.tape();
  const int ia = a.id();
  const Matrix& x = a.value();
  const double m = x.maxCoeff();
  const double lse = m + std::log((x.array() - m).exp().sum());
  return t.record((x.array() - lse).matrix(), {a}, [ia](Tape& t, int self) {
    const Matrix& y = t.value(self);
    const Matrix& g = t.grad(self);
    const double s = g.sum();
    t.accumulate_expr(ia, g - (y.array().exp() * s).matrix());
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw InvalidArgument("concat_rows of nothing");
  Tape& t = *parts[0].tape();
  const int cols = parts[0].cols();
  int rows = 0;
  for (const Var& p : parts) {
    if (p.cols() != cols) throw DimensionMismatch("concat_rows column mismatch");
    rows += p.rows();
  }
  Matrix v(rows, cols);
  std::vector<std::pair<int, int>> spans;
  int r = 0;
  for (const Var& p : parts) {
    v.middleRows(r, p.rows()) = p.value();
    spans.emplace_back(p.id(), r);
    r += p.rows();
  }
  return t.record(std::move(v), parts, [spans](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    for (const auto& [id, start] : spans) {
      if (t.requires_grad(id)) t.accumulate_expr(id, g.middleRows(start, t.value(id).rows()));
    }
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw InvalidArgument("concat_cols of nothing");
  Tape& t = *parts[0].tape();
  const int rows = parts[0].rows();
  int cols = 0;
  for (const Var& p : parts) {
    if (p.rows() != rows) throw DimensionMismatch("concat_cols row mismatch");
    cols += p.cols();
  }
  Matrix v(rows, cols);
  std::vector<std::pair<int, int>> spans;
  int c = 0;
  for (const Var& p : parts) {
    v.middleCols(c, p.cols()) = p.value();
    spans.emplace_back(p.id(), c);
    c += p.cols();
  }
  return t.record(std::move(v), parts, [spans](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    for (const auto& [id, start] : spans) {
      if (t.requires_grad(id)) t.accumulate_expr(id, g.middleCols(start, t.value(id).cols()));
    }
  });
}

Var slice_rows(Var a, int start, int n) {
  if (start < 0 || n < 0 || start + n > a.rows()) throw DimensionMismatch("slice_rows range");
  Tape& t = *a.tape();
  const int ia = a.id();
  return t.record(a.value().middleRows(start, n), {a}, [ia, start, n](Tape& t, int self) {
    Matrix g = Matrix::Zero(t.value(ia).rows(), t.value(ia).cols());
    g.middleRows(start, n) = t.grad(self);
    t.accumulate(ia, g);
  });
}

Var column(Var a, int j) {
  if (j < 0 || j >= a.cols()) throw DimensionMismatch("column index");
  Tape& t = *a.tape();
  const int ia = a.id();
  return t.record(a.value().col(j), {a}, [ia, j](Tape& t, int self) {
    Matrix g = Matrix::Zero(t.value(ia).rows(), t.value(ia).cols());
    g.col(j) = t.grad(self).col(0);
    t.accumulate(ia, g);
  });
}

Var gather_cols(Var a, std::span<const int> cols) {
  Tape& t = *a.tape();
  const int ia = a.id();
  std::vector<int> idx(cols.begin(), cols.end());
  Matrix v(a.rows(), static_cast<int>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) {
    if (idx[k] < 0 || idx[k] >= a.cols()) throw DimensionMismatch("gather_cols index");
    v.col(static_cast<int>(k)) = a.value().col(idx[k]);
  }
  return t.record(std::move(v), {a}, [ia, idx](Tape& t, int self) {
    Matrix g = Matrix::Zero(t.value(ia).rows(), t.value(ia).cols());
    const Matrix& gs = t.grad(self);
    for (std::size_t k = 0; k < idx.size(); ++k) g.col(idx[k]) += gs.col(static_cast<int>(k));
    t.accumulate(ia, g);
  });
}

Var sum(Var a) {
  Tape& t = *a.tape();
  const int ia = a.id();
  return t.record(Matrix::Constant(1, 1, a.value().sum()), {a}, [ia](Tape& t, int self) {
    const double g = t.grad(self)(0, 0);
    t.accumulate(ia, Matrix::Constant(t.value(ia).rows(), t.value(ia).cols(), g));
  });
}

Var mean(Var a) {
  const auto n = static_cast<double>(a.value().size());
  if (n == 0) throw DimensionMismatch("mean of empty matrix");
  return scale(sum(a), 1.0 / n);
}

Var dot(Var a, Var b) {
  require_same_shape(a, b, "dot");
  Tape& t = *a.tape();
  const int ia = a.id(), ib = b.id();
  const double v = a.value().cwiseProduct(b.value()).sum();
  return t.record(Matrix::Constant(1, 1, v), {a, b}, [ia, ib](Tape& t, int self) {
    const double g = t.grad(self)(0, 0);
    if (t.requires_grad(ia)) t.accumulate_expr(ia, t.value(ib) * g);
    if (t.requires_grad(ib)) t.accumulate_expr(ib, t.value(ia) * g);
  });
}

Var pick(Var a, int row, int col) {
  if (row < 0 || row >= a.rows() || col < 0 || col >= a.cols()) {
    throw DimensionMismatch("pick index");
  }
  Tape& t = *a.tape();
  const int ia = a.id();
  return t.record(Matrix::Constant(1, 1, a.value()(row, col)), {a},
                  [ia, row, col](Tape& t, int self) {
                    Matrix g = Matrix::Zero(t.value(ia).rows(), t.value(ia).cols());
                    g(row, col) = t.grad(self)(0, 0);
                    t.accumulate(ia, g);
                  });
}

Var cosine(Var a, Var b) {
  require_same_shape(a, b, "cosine");
  constexpr double kEps = 1e-8;
  Tape& t = *a.tape();
  const int ia = a.id(), ib = b.id();
  const double na = std::max(a.value().norm(), kEps);
  const double nb = std::max(b.value().norm(), kEps);
  const double c = a.value().cwiseProduct(b.value()).sum() / (na * nb);
  return t.record(Matrix::Constant(1, 1, c), {a, b}, [ia, ib, na, nb, c](Tape& t, int self) {
    const double g = t.grad(self)(0, 0);
    const Matrix& x = t.value(ia);
    const Matrix& y = t.value(ib);
    if (t.requires_grad(ia)) t.accumulate_expr(ia, (y / (na * nb) - x * (c / (na * na))) * g);
    if (t.requires_grad(ib)) t.accumulate_expr(ib, (x / (na * nb) - y * (c / (nb * nb))) * g);
  });
}

Var max_of(const std::vector<Var>& scalars) {
  if (scalars.empty()) throw InvalidArgument("max_of nothing");
  Tape& t = *scalars[0].tape();
  std::size_t best = 0;
  for (std::size_t i = 1; i < scalars.size(); ++i) {
    if (scalars[i].scalar() > scalars[best].scalar()) best = i;
  }
  const int ib = scalars[best].id();
  return t.record(scalars[best].value(), scalars,
                  [ib](Tape& t, int self) { t.accumulate(ib, t.grad(self)); });
}

Var elementwise_max(const std::vector<Var>& parts) {
  if (parts.empty()) throw InvalidArgument("elementwise_max of nothing");
  Tape& t = *parts[0].tape();
  Matrix v = parts[0].value();
  std::vector<int> arg(static_cast<std::size_t>(v.size()), 0);
  for (std::size_t k = 1; k < parts.size(); ++k) {
    require_same_shape(parts[0], parts[k], "elementwise_max");
    const Matrix& x = parts[k].value();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      if (x(i) > v(i)) {
        v(i) = x(i);
        arg[static_cast<std::size_t>(i)] = static_cast<int>(k);
      }
    }
  }
  std::vector<int> ids;
  for (const Var& p : parts) ids.push_back(p.id());
  return t.record(std::move(v), parts, [ids, arg](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    std::vector<Matrix> gs(ids.size());
    for (std::size_t i = 0; i < arg.size(); ++i) {
      auto& m = gs[static_cast<std::size_t>(arg[i])];
      if (m.size() == 0) m = Matrix::Zero(g.rows(), g.cols());
      m(static_cast<Eigen::Index>(i)) = g(static_cast<Eigen::Index>(i));
    }
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (gs[k].size() != 0) t.accumulate(ids[k], gs[k]);
    }
  });
}

Var weighted_sum(Var weights, const std::vector<Var>& xs) {
  if (weights.cols() != 1 || weights.rows() != static_cast<int>(xs.size())) {
    throw DimensionMismatch("weighted_sum weights");
  }
  std::vector<Var> terms;
  Var acc;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    Var w = pick(weights, static_cast<int>(i));
    if (xs[i].rows() != 1 || xs[i].cols() != 1) throw DimensionMismatch("weighted_sum term");
    Var term = mul(w, xs[i]);
    acc = acc.valid() ? add(acc, term) : term;
  }
  return acc;
}

Var squared_norm(Var a) { return dot(a, a); }

Var transpose(Var a) {
  Tape& t = *a.tape();
  const int ia = a.id();
  return t.record(a.value().transpose(), {a}, [ia](Tape& t, int self) {
    t.accumulate_expr(ia, t.grad(self).transpose());
  });
}

// ---------------------------------------------------------------------------
// Layers

Linear Linear::create(ParamStore& store, const std::string& name, int in, int out, Rng& rng) {
  store.add(name + ".w", out, in, rng);
  store.add_zeros(name + ".b", out, 1);
  return bind(store, name);
}

Linear Linear::bind(ParamStore& store, const std::string& name) {
  return Linear{&store.at(name + ".w"), &store.at(name + ".b")};
}

LstmCell LstmCell::create(ParamStore& store, const std::string& name, int in, int hidden,
                          Rng& rng) {
  store.add(name + ".w", 4 * hidden, in + hidden, rng);
  Matrix b = Matrix::Zero(4 * hidden, 1);
  b.middleRows(hidden, hidden).setOnes();
  store.add_value(name + ".b", std::move(b));
  return bind(store, name);
}

LstmCell LstmCell::bind(ParamStore& store, const std::string& name) {
  LstmCell c{&store.at(name + ".w"), &store.at(name + ".b"), 0};
  c.hidden = static_cast<int>(c.bias->value.rows()) / 4;
  return c;
}

LstmState LstmCell::zero_state(Tape& t) const {
  return {t.constant(Matrix::Zero(hidden, 1)), t.constant(Matrix::Zero(hidden, 1))};
}

namespace {

LstmState lstm_gates(Var z, const LstmState& s, int hidden) {
  Var i = sigmoid(slice_rows(z, 0, hidden));
  Var f = sigmoid(slice_rows(z, hidden, hidden));
  Var g = tanh(slice_rows(z, 2 * hidden, hidden));
  Var o = sigmoid(slice_rows(z, 3 * hidden, hidden));
  Var c = add(mul(f, s.c), mul(i, g));
  Var h = mul(o, tanh(c));
  return {h, c};
}

}  // namespace

LstmState LstmCell::step(Tape& t, Var x, const LstmState& s) const {
  Var z = add_bias(matmul(t.param(*weight), concat_rows({x, s.h})), t.param(*bias));
  return lstm_gates(z, s, hidden);
}

// ---------------------------------------------------------------------------
// Binder

Var Binder::operator()(const std::string& name) const {
  if (mut_) return tape_->param(mut_->at(name));
  return tape_->param(const_->at(name));
}

Var Binder::linear(const std::string& name, Var x) const {
  return add_bias(matmul((*this)(name + ".w"), x), (*this)(name + ".b"));
}

LstmState Binder::lstm_zero(const std::string& name) const {
  const int hidden = static_cast<int>(const_->at(name + ".b").value.rows()) / 4;
  return {tape_->constant(Matrix::Zero(hidden, 1)), tape_->constant(Matrix::Zero(hidden, 1))};
}

LstmState Binder::lstm_step(const std::string& name, Var x, const LstmState& s) const {
  Var z = add_bias(matmul((*this)(name + ".w"), concat_rows({x, s.h})), (*this)(name + ".b"));
  return lstm_gates(z, s, s.h.rows());
}

}  // namespace tabletop::nn
