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

#include "tabletop/common/error.hpp"
#include "tabletop/common/png.hpp"
#include "tabletop/spatial/train.hpp"

namespace tabletop {
namespace {

using Vec6 = Eigen::Matrix<double, kNumRelations, 1>;

Scene one_object_scene(Category c, Size s, Cell center) {
  Scene scene;
  SceneObject o;
  o.id = 0;
  o.category = c;
  o.size = s;
  o.center = center;
  o.table = TableId::place;
  scene.objects = {o};
  scene.next_id = 1;
  return scene;
}

ProbMaps constant_maps(int h, int w, double v) {
  ProbMaps m;
  m.h = h;
  m.w = w;
  for (auto& c : m.channels) c = Eigen::MatrixXd::Constant(h, w, v);
  return m;
}

TEST(OraclePosterior, HandExamples) {
  // cup, small: footprint 30..33 x 30..33
  const auto q = PlacementQuery::make(one_object_scene(Category::cup, Size::small, {31, 31}),
                                      TableId::place, 0);
  Vec6 left;
  left << 0, 1, 0, 0, 0, 0;
  EXPECT_EQ(aux_posterior(q, {29, 31}, AuxClassifier::oracle()), left);
  EXPECT_TRUE(aux_posterior(q, {0, 0}, AuxClassifier::oracle()).isZero());
  // a box interior cell is both inside and on top
  const auto b = PlacementQuery::make(one_object_scene(Category::box, Size::small, {20, 20}),
                                      TableId::place, 0);
  Vec6 both;
  both << 0.5, 0, 0, 0, 0, 0.5;
  EXPECT_EQ(aux_posterior(b, {20, 20}, AuxClassifier::oracle()), both);
  EXPECT_THROW(aux_posterior(b, {64, 3}, AuxClassifier::oracle()), OutOfBounds);
}

TEST(RelnetLoss, HandExamples) {
  Vec6 g, f;
  g << 1, 0, 0, 0, 0, 0;
  f << 0, 1, 0, 0, 0, 0;
  RelationSet all;
  all.fill(true);
  EXPECT_NEAR(relnet_sample_loss(g, f, all), 2.0, 1e-12);
  EXPECT_EQ(relnet_sample_loss(f, f, all), 0.0);
  RelationSet no_inside = all;
  no_inside[0] = false;
  EXPECT_NEAR(relnet_sample_loss(g, f, no_inside), 1.0, 1e-12);
}

TEST(RelnetLoss, GradientMatchesFiniteDifferences) {
  PlacementNetConfig cfg;
  cfg.hidden = 5;
  auto net = PlacementNet::create(cfg, 3);
  Rng rng(8);
  Eigen::MatrixXd feats = Eigen::MatrixXd::Random(kPlacementFeatureDim, 7);
  Eigen::MatrixXd target = (Eigen::MatrixXd::Random(kNumRelations, 7).array() + 1.0) / 2.0;
  const auto f = [&](nn::Tape& t) {
    nn::Binder b(t, net.params);
    return nn::scale(nn::squared_norm(nn::sub(predict_cells(b, feats), t.constant(target))), 1.0 / 7);
  };
  net.params.zero_grad();
  {
    nn::Tape t;
    t.backward(f(t));
  }
  int checked = 0;
  for (auto& [name, p] : net.params.all()) {
    for (Eigen::Index i = 0; i < p.value.size(); ++i) {
      const double orig = p.value(i), h = 1e-5;
      p.value(i) = orig + h;
      double up, down;
      {
        nn::Tape t;
        up = f(t).scalar();
      }
      p.value(i) = orig - h;
      {
        nn::Tape t;
        down = f(t).scalar();
      }
      p.value(i) = orig;
      const double num = (up - down) / (2 * h), ana = p.grad(i);
      if (std::max(std::abs(num), std::abs(ana)) < 1e-6) continue;
      ++checked;
      EXPECT_LT(std::abs(num - ana) / (std::abs(num) + std::abs(ana)), 1e-4) << name << "[" << i << "]";
    }
  }
  EXPECT_GT(checked, 20);
}

TEST(Exploration, EpsilonOneIsUniformChiSquare) {
  Eigen::MatrixXd ch = Eigen::MatrixXd::Zero(8, 8);
  ch(2, 3) = 5.0;
  ch(7, 7) = 1.0;
  const auto p = exploration_distribution(ch, 1.0);
  for (double v : p) EXPECT_DOUBLE_EQ(v, 1.0 / 64);
  const auto cdf = cumulative(p);
  Rng rng(99);
  std::vector<int> counts(64, 0);
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const Cell c = draw_cell(cdf, 8, rng);
    ++counts[c.y * 8 + c.x];
  }
  double chi2 = 0.0;
  const double e = double(n) / 64;
  for (int c : counts) chi2 += (c - e) * (c - e) / e;
  EXPECT_LT(chi2, 103.4);  // chi-square, 63 dof, p = 0.001
}

TEST(Exploration, MixtureAndDegenerate) {
  Eigen::MatrixXd ch = Eigen::MatrixXd::Zero(2, 2);
  ch(0, 1) = 3.0;
  const auto p = exploration_distribution(ch, 0.1);
  EXPECT_NEAR(p[1], 0.9 + 0.025, 1e-12);
  EXPECT_NEAR(p[0], 0.025, 1e-12);
  bool deg = false;
  const auto u = exploration_distribution(Eigen::MatrixXd::Zero(2, 2), 0.1, &deg);
  EXPECT_TRUE(deg);
  for (double v : u) EXPECT_DOUBLE_EQ(v, 0.25);
  EXPECT_THROW(exploration_distribution(ch, 1.5), InvalidArgument);
}

TEST(RelnetStep, DegenerateChannels) {
  const auto q = PlacementQuery::make(one_object_scene(Category::box, Size::medium, {30, 30}),
                                      TableId::place, 0);
  auto net = PlacementNet::create({}, 1);
  net.params.at("place.out.w").value.setZero();
  net.params.at("place.out.b").value.setConstant(-1e4);
  RelnetConfig cfg;
  const auto r = relnet_step(q, net, AuxClassifier::oracle(), cfg, 5);
  for (bool d : r.degenerate) EXPECT_TRUE(d);  // box: every channel eligible
  EXPECT_EQ(r.samples, kNumRelations * cfg.k);
  cfg.strict = true;
  EXPECT_THROW(relnet_step(q, net, AuxClassifier::oracle(), cfg, 5), DegenerateChannel);
}

TEST(RelnetStep, SkipsIneligibleChannelsAndIsDeterministic) {
  const auto q = PlacementQuery::make(one_object_scene(Category::ball, Size::medium, {30, 30}),
                                      TableId::place, 0);
  auto a = PlacementNet::create({}, 2), b = a;
  RelnetConfig cfg;
  cfg.k = 4;
  const auto ra = relnet_step(q, a, AuxClassifier::oracle(), cfg, 11);
  const auto rb = relnet_step(q, b, AuxClassifier::oracle(), cfg, 11);
  EXPECT_EQ(ra.samples, 4 * 4);  // ball: directional only
  EXPECT_GE(ra.loss, 0.0);
  EXPECT_EQ(ra.loss, rb.loss);
  EXPECT_TRUE(a.params == b.params);
  for (const auto& [name, p] : a.params.all()) EXPECT_TRUE(p.grad == b.params.at(name).grad);
}

TEST(PredictMaps, BoundedAndChecked) {
  const auto scenes = build_placement_scenes(5, {}, 4);
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    auto net = PlacementNet::create({}, seed);
    for (auto& [name, p] : net.params.all()) p.value *= 6.0;  // push into saturation
    for (const auto& q : scenes) {
      const auto m = predict_maps(q.image, q.ref_mask, net);
      for (const auto& c : m.channels) {
        EXPECT_GE(c.minCoeff(), 0.0);
        EXPECT_LE(c.maxCoeff(), 1.0);
      }
    }
  }
  const auto& q = scenes[0];
  Mask bad(10, 1);
  EXPECT_THROW(predict_maps(q.image, bad, PlacementNet::create({}, 1)), DimensionMismatch);
  EXPECT_THROW(predict_maps(q.image, Mask(q.ref_mask.size(), 0), PlacementNet::create({}, 1)),
               InvalidArgument);
}

TEST(SampleLocation, SingleCellAndTwoCellSplit) {
  auto m = constant_maps(16, 16, 0.0);
  Mask mask(256, 0);
  mask[0] = 1;
  m.channels[index_of(RelationLabel::left)](5, 9) = 0.3;
  for (std::uint64_t s = 0; s < 50; ++s) {
    EXPECT_EQ(sample_location(m, RelationLabel::left, mask, s), (Cell{9, 5}));
  }
  m.channels[index_of(RelationLabel::behind)](1, 1) = 0.7;
  m.channels[index_of(RelationLabel::behind)](12, 3) = 0.7;
  int first = 0;
  const int n = 10000;
  for (int s = 0; s < n; ++s) first += sample_location(m, RelationLabel::behind, mask, s) == Cell{1, 1};
  EXPECT_NEAR(double(first) / n, 0.5, 0.02);
  EXPECT_THROW(sample_location(m, RelationLabel::right, mask, 0), NoMassAvailable);
}

TEST(SampleLocation, ReferenceFootprintMaskedForDirectional) {
  const auto q = PlacementQuery::make(one_object_scene(Category::plate, Size::large, {20, 40}),
                                      TableId::place, 0);
  const auto m = constant_maps(64, 64, 0.8);
  for (auto r : kAllRelations) {
    const auto p = placement_distribution(m, r, q.ref_mask);
    double total = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      total += p[i];
      if (is_directional(r) && q.ref_mask[i]) {
        EXPECT_EQ(p[i], 0.0);
      }
    }
    EXPECT_NEAR(total, 1.0, 1e-6);
    if (!is_directional(r)) continue;
    for (std::uint64_t s = 0; s < 2000; ++s) {
      const Cell c = sample_location(m, r, q.ref_mask, s);
      EXPECT_FALSE(q.ref_mask[std::size_t(c.y) * 64 + c.x]);
    }
  }
  // all mass under the reference: nothing left for a directional relation
  ProbMaps only_ref = constant_maps(64, 64, 0.0);
  for (std::size_t i = 0; i < q.ref_mask.size(); ++i) {
    if (q.ref_mask[i]) only_ref.channels[index_of(RelationLabel::left)](i / 64, i % 64) = 1.0;
  }
  EXPECT_THROW(placement_distribution(only_ref, RelationLabel::left, q.ref_mask), NoMassAvailable);
}

TEST(AuxClassifier, FastFeaturesMatchImplantedImage) {
  const auto scenes = build_placement_scenes(20, {}, 6);
  Rng rng(1);
  for (const auto& q : scenes) {
    for (const Cell c : aux_sample_cells(q, 12, rng)) {
      const auto slow = aux_features(implant(q.image, c, 3), q.ref_mask, 2.0);
      const auto fast = aux_features_at(q.image, q.ref_mask, c, 3, 2.0);
      EXPECT_TRUE(slow.isApprox(fast, 1e-12)) << c.x << "," << c.y;
    }
  }
  EXPECT_THROW(aux_features(scenes[0].image, scenes[0].ref_mask, 2.0), InvalidArgument);
}

TEST(AuxClassifier, LearnedOutputsBoundedAndCheckpointed) {
  const auto scenes = build_placement_scenes(3, {}, 2);
  auto clf = AuxClassifier::create_learned(8, 3);
  for (const auto& q : scenes) {
    const auto p = aux_posterior(q, {10, 10}, clf);
    EXPECT_GE(p.minCoeff(), 0.0);
    EXPECT_LE(p.maxCoeff(), 1.0);
  }
  const auto path = std::filesystem::temp_directory_path() / "tabletop_aux_test.ckpt";
  clf.save(path);
  const auto back = AuxClassifier::load(path);
  EXPECT_EQ(back.mode, AuxMode::learned);
  EXPECT_TRUE(back.params == clf.params);
  EXPECT_EQ(aux_posterior(scenes[0], {3, 4}, back), aux_posterior(scenes[0], {3, 4}, clf));
  AuxClassifier::oracle().save(path);
  EXPECT_EQ(AuxClassifier::load(path).mode, AuxMode::oracle);
  PlacementNet::create({}, 1).save(path);
  EXPECT_THROW(AuxClassifier::load(path), CheckpointError);
  std::filesystem::remove(path);
}

TEST(TrainPlacement, ZeroEpochsAndDeterminism) {
  const auto scenes = build_placement_scenes(6, {}, 3);
  PlacementTrainConfig cfg;
  cfg.epochs = 0;
  const auto init = PlacementNet::create({}, 9);
  EXPECT_TRUE(train_placement(scenes, scenes, AuxClassifier::oracle(), cfg, init).net.params ==
              init.params);
  cfg.epochs = 2;
  cfg.seed = 4;
  cfg.mirror_augment = true;
  const auto a = train_placement(scenes, scenes, AuxClassifier::oracle(), cfg, init);
  const auto b = train_placement(scenes, scenes, AuxClassifier::oracle(), cfg, init);
  EXPECT_TRUE(a.net.params == b.net.params);
  EXPECT_FALSE(a.net.params == init.params);
  ASSERT_EQ(a.curves.size(), 2u);
  const auto path = std::filesystem::temp_directory_path() / "tabletop_place_test.ckpt";
  a.net.save(path);
  EXPECT_TRUE(PlacementNet::load(path).params == a.net.params);
  std::filesystem::remove(path);
}

TEST(Mirror, FlipsGeometry) {
  const auto q = PlacementQuery::make(one_object_scene(Category::cup, Size::medium, {10, 30}),
                                      TableId::place, 0);
  const auto m = mirror(q);
  EXPECT_EQ(m.ref().center.x, 53);
  for (int y = 0; y < 64; ++y) {
    for (int x = 0; x < 64; ++x) {
      EXPECT_EQ(m.ref_mask[y * 64 + x], q.ref_mask[y * 64 + (63 - x)]);
      EXPECT_EQ(contains(relation_oracle(BBox::unit({x, y}), m.ref()), RelationLabel::left),
                contains(relation_oracle(BBox::unit({63 - x, y}), q.ref()), RelationLabel::right));
    }
  }
}

// A short oracle-mode run shared by the behavioral checks below.
class TrainedPlacement : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    PlacementSceneConfig pc;
    auto train = build_placement_scenes(400, pc, 21);
    PlacementTrainConfig cfg;
    cfg.epochs = 6;
    cfg.seed = 2;
    cfg.mirror_augment = true;
    net_ = new PlacementNet(
        train_placement(train, {}, AuxClassifier::oracle(), cfg, PlacementNet::create({}, 5)).net);
  }
  static void TearDownTestSuite() {
    delete net_;
    net_ = nullptr;
  }
  static Cell argmax(const ProbMaps& m, RelationLabel r, const Mask& mask) {
    const auto p = placement_distribution(m, r, mask);
    const auto i = std::max_element(p.begin(), p.end()) - p.begin();
    return {static_cast<int>(i % m.w), static_cast<int>(i / m.w)};
  }
  static PlacementNet* net_;
};
PlacementNet* TrainedPlacement::net_ = nullptr;

TEST_F(TrainedPlacement, LoneContainerInsideArgmax) {
  PlacementSceneConfig pc;
  pc.min_objects = pc.max_objects = 1;
  pc.ref_categories = {Category::box, Category::bowl};
  const auto test = build_placement_scenes(40, pc, 77);
  int ok = 0;
  for (const auto& q : test) {
    const auto m = predict_maps(q.image, q.ref_mask, *net_);
    ok += contains(relation_oracle(BBox::unit(argmax(m, RelationLabel::inside, q.ref_mask)), q.ref()),
                   RelationLabel::inside);
  }
  EXPECT_GE(ok, 38);
}

TEST_F(TrainedPlacement, MirroredLeftMatchesRight) {
  const auto test = build_placement_scenes(40, {}, 78);
  int ok = 0;
  for (const auto& q : test) {
    const auto mq = mirror(q);
    const auto m = predict_maps(mq.image, mq.ref_mask, *net_);
    const Cell c = argmax(m, RelationLabel::left, mq.ref_mask);
    const Cell back{q.grid().w - 1 - c.x, c.y};
    ok += contains(relation_oracle(BBox::unit(back), q.ref()), RelationLabel::right);
  }
  EXPECT_GE(ok, 38);
}

TEST_F(TrainedPlacement, HeatmapExports) {
  const auto q = build_placement_scenes(1, {}, 5)[0];
  const auto m = predict_maps(q.image, q.ref_mask, *net_);
  const auto dir = std::filesystem::temp_directory_path() / "tabletop_heatmaps";
  write_heatmap_pngs(m, dir, "t");
  for (auto r : kAllRelations) {
    const auto img = read_png(dir / ("t_" + std::string(to_string(r)) + ".png"));
    ASSERT_EQ(img.width, 64);
    ASSERT_EQ(img.channels, 1);
    for (int y = 0; y < 64; y += 7) {
      for (int x = 0; x < 64; x += 5) {
        EXPECT_EQ(img.pixels[y * 64 + x], std::lround(m.channel(r)(y, x) * 255.0));
      }
    }
  }
  const auto j = m.to_json();
  EXPECT_EQ(j["relations"]["left"].size(), 64u);
  EXPECT_EQ(j["relations"]["left"][3].size(), 64u);
  EXPECT_DOUBLE_EQ(j["relations"]["left"][3][9].get<double>(), m.channel(RelationLabel::left)(3, 9));
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace tabletop
