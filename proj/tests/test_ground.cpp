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

#include <algorithm>
#include <numeric>

#include "tabletop/common/error.hpp"
#include "tabletop/ground/train.hpp"

namespace tabletop {
namespace {

using nn::Var;

SceneObject object(int id, Category c, Color col, int x, int y) {
  SceneObject o;
  o.id = id;
  o.category = c;
  o.color = col;
  o.center = {x, y};
  return o;
}

Scene three_object_scene() {
  Scene s;
  s.objects = {object(0, Category::cup, Color::red, 14, 30), object(1, Category::ball, Color::blue, 40, 20),
               object(2, Category::box, Color::green, 44, 48)};
  s.next_id = 3;
  return s;
}

std::vector<int> words(const Vocabulary& v, const std::string& text) {
  auto t = v.encode_strict(tokenize(text));
  t.push_back(Vocabulary::kEos);
  return t;
}

ModelDims tiny_dims() {
  ModelDims d;
  d.embed = 4;
  d.hidden = 3;
  d.joint = 4;
  d.vis_gen = 3;
  d.dec_hidden = 4;
  return d;
}

void grad_check(nn::ParamStore& store, const std::function<Var(nn::Tape&, nn::ParamStore&)>& f,
                int min_checked = 50) {
  store.zero_grad();
  {
    nn::Tape t;
    t.backward(f(t, store));
  }
  const double h = 1e-5;
  int checked = 0;
  for (auto& [name, p] : store.all()) {
    for (Eigen::Index i = 0; i < p.value.size(); ++i) {
      const double orig = p.value(i);
      p.value(i) = orig + h;
      double up, down;
      {
        nn::Tape t;
        up = f(t, store).scalar();
      }
      p.value(i) = orig - h;
      {
        nn::Tape t;
        down = f(t, store).scalar();
      }
      p.value(i) = orig;
      const double num = (up - down) / (2 * h);
      const double ana = p.grad.size() ? p.grad(i) : 0.0;
      // below finite-difference resolution
      if (std::max(std::abs(num), std::abs(ana)) < 1e-6) continue;
      ++checked;
      const double rel = std::abs(num - ana) / (std::abs(num) + std::abs(ana));
      EXPECT_LT(rel, 1e-4) << name << "[" << i << "] num " << num << " ana " << ana;
    }
  }
  EXPECT_GE(checked, min_checked);
}

TEST(Hinge, HandExamples) {
  TrainConfig cfg;
  EXPECT_NEAR(hinge_loss(0.9, 0.5, 0.85, cfg), 0.05, 1e-9);
  EXPECT_NEAR(hinge_loss(0.2, 0.9, 0.9, cfg), 1.6, 1e-9);
  EXPECT_EQ(hinge_loss(0.9, 0.7, 0.8, cfg), 0.0);
  nn::Tape t;
  Var l = hinge_loss(t.constant_scalar(0.2), t.constant_scalar(0.9), t.constant_scalar(0.9), cfg);
  EXPECT_NEAR(l.scalar(), 1.6, 1e-9);
}

TEST(Hinge, MonotoneInPositive) {
  TrainConfig cfg;
  double prev = 1e9;
  for (double s = -1.0; s <= 1.0; s += 0.01) {
    const double l = hinge_loss(s, 0.3, 0.1, cfg);
    EXPECT_GE(l, 0.0);
    EXPECT_LE(l, prev + 1e-12);
    prev = l;
  }
}

TEST(Hinge, GradientAgainstScores) {
  TrainConfig cfg;
  cfg.lambda1 = 0.7;
  cfg.lambda2 = 1.3;
  nn::ParamStore s;
  s.add_value("s", (nn::Matrix(3, 1) << 0.2, 0.35, 0.31).finished());
  grad_check(s, [&](nn::Tape& t, nn::ParamStore& p) {
    Var v = t.param(p.at("s"));
    return hinge_loss(nn::pick(v, 0), nn::pick(v, 1), nn::pick(v, 2), cfg);
  }, 3);
}

TEST(MatchScore, WeightedAverage) {
  EXPECT_NEAR(combine_module_scores({0.5, 0.3, 0.2}, {0.8, 0.6, 0.4}), 0.66, 1e-12);
  EXPECT_NEAR(combine_module_scores({0.1, 0.6, 0.3}, {0.4, 0.4, 0.4}), 0.4, 1e-12);
  EXPECT_DOUBLE_EQ(combine_module_scores({1, 0, 0}, {0.37, -0.9, 0.2}), 0.37);
}

TEST(AmbiguousSet, ThresholdArithmetic) {
  EXPECT_EQ(ambiguous_set({0, 1, 2}, {0.92, 0.88, 0.40}, 0.1), (std::vector<int>{0, 1}));
  EXPECT_EQ(ambiguous_set({0, 1, 2}, {0.9, 0.2, 0.1}, 0.1), (std::vector<int>{0}));
  EXPECT_EQ(ambiguous_set({7}, {-0.3}, 0.1), (std::vector<int>{7}));
  EXPECT_EQ(rank_by_score({3, 1, 2}, {0.5, 0.5, 0.9}), (std::vector<int>{2, 1, 3}));
}

TEST(AmbiguousSet, SingletonIffGapAtLeastMargin) {
  Rng rng(5);
  for (int trial = 0; trial < 500; ++trial) {
    const int n = 1 + static_cast<int>(rng.index(5));
    std::vector<int> ids(n);
    std::iota(ids.begin(), ids.end(), 0);
    std::vector<double> s(n);
    for (auto& x : s) x = std::round(rng.uniform(-1.0, 1.0) * 20) / 20;
    const auto set = ambiguous_set(ids, s, 0.1);
    auto sorted = s;
    std::sort(sorted.rbegin(), sorted.rend());
    const bool singleton = n == 1 || sorted[0] - sorted[1] >= 0.1;
    EXPECT_EQ(set.size() == 1, singleton);
    EXPECT_EQ(set.front(), rank_by_score(ids, s).front());
  }
}

class GrounderModel : public ::testing::Test {
 protected:
  Scene scene = three_object_scene();
  std::vector<ObjectCandidate> cands = encode_candidates(scene, TableId::pick);
  GroundingModel model = GroundingModel::create(Vocabulary::standard(), ModelDims{}, 3);
};

TEST_F(GrounderModel, EncoderInvariants) {
  const auto e = encode_expression(words(model.vocab, "the red cup left of the green box"), model);
  EXPECT_NEAR(e.module_weights.sum(), 1.0, 1e-6);
  for (const auto& a : e.word_attention) EXPECT_NEAR(a.sum(), 1.0, 1e-6);
  EXPECT_EQ(e.hidden_states.cols(), 8);

  const auto one = encode_expression(words(model.vocab, "cup"), model);
  for (int m = 0; m < kNumModules; ++m) {
    EXPECT_NEAR(one.word_attention[m][0], 1.0, 1e-12);
  }
  // phrase embedding of a single word is its (projected) hidden state: equal
  // for any attention parameters
  auto other = model;
  other.params.at("att.subj.w").value.setRandom();
  const auto one2 = encode_expression(words(model.vocab, "cup"), other);
  EXPECT_TRUE(one.phrase[0].isApprox(one2.phrase[0], 1e-12));
}

TEST_F(GrounderModel, ExpressionErrors) {
  EXPECT_THROW(encode_expression(std::vector<int>{Vocabulary::kEos}, model), InvalidArgument);
  EXPECT_THROW(encode_expression(std::vector<int>{model.vocab.size() + 4, Vocabulary::kEos}, model),
               UnknownToken);
}

TEST_F(GrounderModel, ScoresBoundedAndRankingConsistent) {
  for (const char* text : {"the red cup", "the ball", "the leftmost cup", "the cup in front of the blue ball"}) {
    const auto m = comprehend(cands, words(model.vocab, text), model);
    ASSERT_EQ(m.scores.size(), 3u);
    for (std::size_t i = 0; i < m.scores.size(); ++i) {
      EXPECT_GE(m.scores[i], -1.0);
      EXPECT_LE(m.scores[i], 1.0);
      EXPECT_NEAR(m.scores[i],
                  combine_module_scores(m.encoded.module_weights, m.module_scores[i]), 1e-12);
    }
    EXPECT_EQ(m.ranking, rank_by_score(m.ids, m.scores));
    EXPECT_NE(std::find(m.ambiguous_set.begin(), m.ambiguous_set.end(), m.top()),
              m.ambiguous_set.end());
  }
}

TEST_F(GrounderModel, TapeAndPlainScoresAgree) {
  const auto tokens = words(model.vocab, "the red cup left of the green box");
  const auto enc = encode_expression(tokens, model);
  nn::Tape t;
  nn::Binder b(t, std::as_const(model.params));
  const auto ev = encode_expression(b, tokens, model.vocab.size());
  for (const auto& c : cands) {
    EXPECT_NEAR(match_score(ev, encode_candidate(b, c)).total.scalar(), match_score(c, enc, model),
                1e-12);
  }
}

TEST_F(GrounderModel, CosineIgnoresVisualScale) {
  const auto tokens = words(model.vocab, "the blue ball");
  nn::Tape t;
  nn::Binder b(t, std::as_const(model.params));
  const auto ev = encode_expression(b, tokens, model.vocab.size());
  for (const auto& c : cands) {
    auto cv = encode_candidate(b, c);
    const double base = match_score(ev, cv).total.scalar();
    for (double alpha : {0.01, 3.0, 250.0}) {
      CandidateVars scaled = cv;
      scaled.subj = nn::scale(cv.subj, alpha);
      scaled.loc = nn::scale(cv.loc, alpha);
      for (auto& r : scaled.rel) r = nn::scale(r, alpha);
      EXPECT_NEAR(match_score(ev, scaled).total.scalar(), base, 1e-12);
    }
  }
}

TEST_F(GrounderModel, VocabularyPermutationInvariance) {
  const auto& toks = model.vocab.tokens();
  const int v = model.vocab.size();
  std::vector<int> perm(v);  // new index of old token i
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(17);
  // keep the special tokens in place
  std::vector<int> tail(perm.begin() + 3, perm.end());
  rng.shuffle(tail);
  std::copy(tail.begin(), tail.end(), perm.begin() + 3);
  std::vector<std::string> new_tokens(v);
  for (int i = 0; i < v; ++i) new_tokens[perm[i]] = toks[i];
  GroundingModel permuted = model;
  permuted.vocab = Vocabulary(new_tokens);
  auto& emb = permuted.params.at("embedding").value;
  const auto& old_emb = model.params.at("embedding").value;
  for (int i = 0; i < v; ++i) emb.col(perm[i]) = old_emb.col(i);

  for (const char* text : {"the red cup", "the rightmost ball", "the box behind the red cup"}) {
    const auto a = comprehend(cands, words(model.vocab, text), model);
    const auto b = comprehend(cands, words(permuted.vocab, text), permuted);
    EXPECT_EQ(a.ranking, b.ranking);
    for (std::size_t i = 0; i < a.scores.size(); ++i) EXPECT_NEAR(a.scores[i], b.scores[i], 1e-12);
    EXPECT_TRUE(a.encoded.module_weights.isApprox(b.encoded.module_weights, 1e-12));
  }
}

TEST(GrounderGradient, HingeThroughNetwork) {
  const Scene scene = three_object_scene();
  const auto cands = encode_candidates(scene, TableId::pick);
  auto model = GroundingModel::create(Vocabulary::standard(), tiny_dims(), 9);
  TrainConfig cfg;
  cfg.m1 = 3.0;  // keeps both hinge terms active
  const auto ri = words(model.vocab, "the red cup");
  const auto rj = words(model.vocab, "the ball right of the cup");
  const int vs = model.vocab.size();
  grad_check(model.params, [&](nn::Tape& t, nn::ParamStore& p) {
    nn::Binder b(t, p);
    const auto ei = encode_expression(b, ri, vs);
    const auto ej = encode_expression(b, rj, vs);
    const auto ci = encode_candidate(b, cands[0]);
    const auto ck = encode_candidate(b, cands[1]);
    return hinge_loss(match_score(ei, ci).total, match_score(ej, ci).total,
                      match_score(ei, ck).total, cfg);
  });
}

GroundingDataset toy_dataset() {
  GroundingDataset ds;
  Scene s;
  s.objects = {object(0, Category::cup, Color::red, 16, 32), object(1, Category::ball, Color::blue, 48, 32)};
  s.next_id = 2;
  ds.scenes = {s};
  ds.scene_split = {Split::train};
  ExpressionSample a;
  a.tokens = words(ds.vocab, "the red cup");
  a.target_id = 0;
  ExpressionSample b;
  b.tokens = words(ds.vocab, "the blue ball");
  b.target_id = 1;
  ds.records = {a, b};
  return ds;
}

TEST(TrainGrounding, ToyProblemSeparates) {
  const auto ds = toy_dataset();
  TrainConfig cfg;
  cfg.epochs = 200;
  cfg.batch_size = 1;
  cfg.seed = 4;
  const auto r = train_grounding(ds, cfg);
  ASSERT_EQ(r.curves.size(), 200u);
  EXPECT_EQ(r.curves.back().l1, 0.0);
  const auto cands = encode_candidates(ds.scenes[0], TableId::pick);
  for (const auto& rec : ds.records) {
    EXPECT_EQ(comprehend(cands, rec.tokens, r.model).top(), rec.target_id);
  }
}

TEST(TrainGrounding, ZeroEpochsKeepsInitialization) {
  const auto ds = toy_dataset();
  TrainConfig cfg;
  cfg.epochs = 0;
  cfg.seed = 12;
  const auto r = train_grounding(ds, cfg);
  const auto init = GroundingModel::create(ds.vocab, ModelDims{}, derive_seed(cfg.seed, 1));
  EXPECT_TRUE(r.model.params == init.params);
  EXPECT_TRUE(r.curves.empty());
}

TEST(TrainGrounding, BitReproducible) {
  const auto ds = toy_dataset();
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.joint = true;
  cfg.seed = 21;
  const auto a = train_grounding(ds, cfg, tiny_dims());
  const auto b = train_grounding(ds, cfg, tiny_dims());
  EXPECT_TRUE(a.model.params == b.model.params);
  cfg.seed = 22;
  EXPECT_FALSE(train_grounding(ds, cfg, tiny_dims()).model.params == a.model.params);
}

TEST(TrainConfig, JsonRoundTripAndValidation) {
  TrainConfig c;
  c.epochs = 3;
  c.negatives = "uniform";
  const auto back = TrainConfig::from_json(c.to_json());
  EXPECT_EQ(back.to_json(), c.to_json());
  auto j = c.to_json();
  j["bogus"] = 1;
  EXPECT_THROW(TrainConfig::from_json(j), InvalidArgument);
  c.negatives = "random";
  EXPECT_THROW(c.validate(), InvalidArgument);
  c.negatives = "hardest";
  c.m1 = 0;
  EXPECT_THROW(c.validate(), InvalidArgument);
}

}  // namespace
}  // namespace tabletop
