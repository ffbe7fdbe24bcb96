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

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "tabletop/common/error.hpp"
#include "tabletop/nn/checkpoint.hpp"
#include "tabletop/nn/optim.hpp"

namespace tabletop::nn {
namespace {

using Fn = std::function<Var(Tape&, ParamStore&)>;

// Central differences on every parameter entry against the tape gradient.
void grad_check(ParamStore& store, const Fn& f, double tol = 1e-4) {
  store.zero_grad();
  {
    Tape t;
    Var loss = f(t, store);
    t.backward(loss);
  }
  const double h = 1e-6;
  for (auto& [name, p] : store.all()) {
    for (Eigen::Index i = 0; i < p.value.size(); ++i) {
      const double orig = p.value(i);
      p.value(i) = orig + h;
      double up, down;
      {
        Tape t;
        up = f(t, store).scalar();
      }
      p.value(i) = orig - h;
      {
        Tape t;
        down = f(t, store).scalar();
      }
      p.value(i) = orig;
      const double num = (up - down) / (2 * h);
      const double ana = p.grad(i);
      const double denom = std::max(1e-6, std::abs(num) + std::abs(ana));
      EXPECT_LT(std::abs(num - ana) / denom, tol) << name << "[" << i << "] num " << num << " ana " << ana;
    }
  }
}

ParamStore small_store(std::uint64_t seed) {
  Rng rng(seed);
  ParamStore s;
  s.add("a", 4, 3, rng);
  s.add("b", 3, 2, rng);
  s.add("v", 4, 1, rng);
  s.add("u", 4, 1, rng);
  return s;
}

TEST(Tape, ElementwiseOps) {
  auto s = small_store(1);
  grad_check(s, [](Tape& t, ParamStore& p) {
    Var a = t.param(p.at("a"));
    Var b = t.param(p.at("b"));
    Var m = matmul(a, b);                     // 4x2
    Var x = add_bias(m, t.param(p.at("v")));  // broadcast
    Var y = mul(tanh(x), sigmoid(x));
    Var z = sub(scale(y, 1.7), add_scalar(relu(x), 0.3));
    return sum(mul(z, z));
  });
}

TEST(Tape, SoftmaxFamily) {
  auto s = small_store(2);
  const Matrix w = Matrix::Random(4, 1);
  grad_check(s, [&](Tape& t, ParamStore& p) {
    Var v = t.param(p.at("v"));
    Var sm = softmax(v);
    Var ls = log_softmax(t.param(p.at("u")));
    return add(dot(sm, t.constant(w)), pick(ls, 2));
  });
}

TEST(Tape, StructuralOps) {
  auto s = small_store(3);
  grad_check(s, [](Tape& t, ParamStore& p) {
    Var a = t.param(p.at("a"));
    Var v = t.param(p.at("v"));
    Var u = t.param(p.at("u"));
    Var cat = concat_rows({v, u});  // 8x1
    Var sl = slice_rows(cat, 2, 4);
    Var cols = concat_cols({v, u, column(a, 1)});
    const int idx[3] = {2, 0, 2};
    Var g = gather_cols(cols, idx);
    Var em = elementwise_max({v, u, sl});
    Var mx = max_of({dot(v, u), squared_norm(sl), pick(g, 1, 0)});
    return add(add(mean(g), sum(em)), add(mx, cosine(v, sl)));
  });
}

TEST(Tape, WeightedSum) {
  auto s = small_store(4);
  grad_check(s, [](Tape& t, ParamStore& p) {
    Var w = softmax(slice_rows(t.param(p.at("v")), 0, 3));
    Var u = t.param(p.at("u"));
    return weighted_sum(w, {pick(u, 0), pick(u, 1), cosine(u, t.param(p.at("v")))});
  });
}

TEST(Tape, LstmAndLinear) {
  Rng rng(5);
  ParamStore s;
  auto cell = LstmCell::create(s, "lstm", 3, 4, rng);
  auto lin = Linear::create(s, "out", 4, 2, rng);
  const Matrix x1 = Matrix::Random(3, 1), x2 = Matrix::Random(3, 1);
  grad_check(s, [&](Tape& t, ParamStore&) {
    auto st = cell.zero_state(t);
    st = cell.step(t, t.constant(x1), st);
    st = cell.step(t, t.constant(x2), st);
    return pick(log_softmax(lin(t, st.h)), 1);
  });
}

TEST(Tape, CosineIsBoundedAndScaleInvariant) {
  Tape t;
  const Matrix a = Matrix::Random(6, 1), b = Matrix::Random(6, 1);
  const double c1 = cosine(t.constant(a), t.constant(b)).scalar();
  const double c2 = cosine(t.constant(a * 3.5), t.constant(b * 0.2)).scalar();
  EXPECT_NEAR(c1, c2, 1e-12);
  EXPECT_LE(std::abs(c1), 1.0);
}

TEST(Tape, ShapeErrors) {
  Tape t;
  EXPECT_THROW(matmul(t.constant(Matrix::Zero(2, 3)), t.constant(Matrix::Zero(2, 3))),
               DimensionMismatch);
  EXPECT_THROW(add(t.constant(Matrix::Zero(2, 1)), t.constant(Matrix::Zero(3, 1))),
               DimensionMismatch);
  Var nan = t.constant_scalar(std::nan(""));
  EXPECT_THROW(t.backward(nan), NonFiniteLoss);
}

TEST(Adam, MinimizesQuadratic) {
  ParamStore s;
  s.add_value("x", Matrix::Constant(3, 1, 5.0));
  Adam opt({0.05, 0.9, 0.999, 1e-8, 0.0});
  const Matrix target = (Matrix(3, 1) << 1.0, -2.0, 0.5).finished();
  for (int i = 0; i < 2000; ++i) {
    Tape t;
    Var d = sub(t.param(s.at("x")), t.constant(target));
    t.backward(squared_norm(d));
    opt.step(s);
  }
  EXPECT_TRUE(s.at("x").value.isApprox(target, 1e-3));
}

TEST(Adam, FirstStepIsLearningRate) {
  // With bias correction the first update is lr * sign(g).
  ParamStore s;
  s.add_value("x", Matrix::Constant(1, 1, 1.0));
  s.at("x").grad(0, 0) = 3.0;
  Adam opt;
  opt.step(s);
  EXPECT_NEAR(s.at("x").value(0, 0), 1.0 - 0.0004, 1e-9);
  EXPECT_EQ(s.at("x").grad(0, 0), 0.0);
}

TEST(Checkpoint, RoundTripAndCorruption) {
  Rng rng(9);
  Checkpoint ck;
  ck.params.add("w", 5, 7, rng);
  ck.params.add("b", 5, 1, rng);
  ck.metadata = {{"kind", "test"}, {"dims", {5, 7}}};
  const auto path = std::filesystem::temp_directory_path() / "tabletop_ckpt_test.bin";
  save_checkpoint(path, ck);
  const auto back = load_checkpoint(path);
  EXPECT_TRUE(back.params == ck.params);
  EXPECT_EQ(back.metadata, ck.metadata);

  // Flip one byte in the tail (array payload).
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekg(-3, std::ios::end);
    char c;
    f.get(c);
    f.seekp(-3, std::ios::end);
    f.put(static_cast<char>(c ^ 0x5a));
  }
  EXPECT_THROW(load_checkpoint(path), CheckpointError);
  std::filesystem::remove(path);
  EXPECT_THROW(load_checkpoint(path), CheckpointError);
}

}  // namespace
}  // namespace tabletop::nn
