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

#include "tabletop/percept/candidates.hpp"

namespace tabletop {
namespace {

SceneObject make(int id, Category c, int x, int y) {
  SceneObject o;
  o.id = id;
  o.category = c;
  o.color = Color::red;
  o.size = Size::small;
  o.center = {x, y};
  return o;
}

TEST(Candidates, Loc5HandArithmetic) {
  Scene s;
  SceneObject o = make(0, Category::box, 24, 24);
  o.size = Size::large;  // box large: half extent 4 -> 20..28, not 16..32
  s.objects = {o};
  auto c = encode_candidates(s, TableId::pick);
  ASSERT_EQ(c.size(), 1u);
  // Rebuild a 16..32 box directly through the loc5 definition.
  c[0].bbox = {16, 16, 32, 32};
  const BBox b = c[0].bbox;
  Eigen::VectorXd expected(5);
  expected << 16.0 / 64, 16.0 / 64, 32.0 / 64, 32.0 / 64, 256.0 / 4096;
  Eigen::VectorXd loc5(5);
  loc5 << b.x0 / 64.0, b.y0 / 64.0, b.x1 / 64.0, b.y1 / 64.0, b.area() / 4096.0;
  EXPECT_TRUE(loc5.isApprox(expected));
  EXPECT_DOUBLE_EQ(expected[4], 0.0625);
  // And the encoder's own output for the real footprint.
  Eigen::VectorXd real(5);
  real << 20.0 / 64, 20.0 / 64, 29.0 / 64, 29.0 / 64, 81.0 / 4096;
  EXPECT_TRUE(encode_candidates(s, TableId::pick)[0].loc5.isApprox(real));
}

TEST(Candidates, SoleObjectHasZeroContext) {
  Scene s;
  s.objects = {make(0, Category::cup, 30, 30)};
  const auto c = encode_candidates(s, TableId::pick);
  EXPECT_EQ(c[0].n_same, 0);
  EXPECT_EQ(c[0].n_any, 0);
  EXPECT_TRUE(c[0].same_cat_context.isZero());
  EXPECT_TRUE(c[0].any_cat_context.isZero());
  EXPECT_EQ(c[0].appearance.size(), kAppearanceDim);
  EXPECT_EQ(c[0].location_input().size(), kLocationInputDim);
}

TEST(Candidates, FiveNearestSameCategory) {
  Scene s;
  s.objects.push_back(make(0, Category::cup, 32, 32));
  const int xs[7] = {10, 22, 40, 55, 5, 48, 27};
  for (int i = 0; i < 7; ++i) s.objects.push_back(make(i + 1, Category::cup, xs[i], 32 + (i % 2) * 8));
  s.objects.push_back(make(8, Category::ball, 32, 50));
  const auto c = encode_candidates(s, TableId::pick);
  const auto& me = c[0];
  EXPECT_EQ(me.n_same, 5);
  // Oracle: sort the cups by center distance.
  std::vector<std::pair<double, int>> d;
  for (int i = 1; i <= 7; ++i) {
    const auto& o = s.objects[i];
    const double dx = o.center.x - 32.0, dy = o.center.y - 32.0;
    d.emplace_back(std::sqrt(dx * dx + dy * dy), o.id);
  }
  std::sort(d.begin(), d.end());
  for (int k = 0; k < 5; ++k) {
    const auto* o = s.find(d[k].second);
    const Eigen::VectorXd expected = offset_encoding(me.bbox, o->footprint());
    EXPECT_TRUE(me.same_cat_context.row(k).transpose().isApprox(expected)) << k;
  }
  EXPECT_EQ(me.n_any, 5);
}

TEST(Candidates, TranslationCovariance) {
  Scene s;
  s.objects = {make(0, Category::cup, 20, 20), make(1, Category::cup, 30, 24),
               make(2, Category::bowl, 15, 35)};
  Scene t = s;
  for (auto& o : t.objects) o.center = {o.center.x + 7, o.center.y + 5};
  const auto a = encode_candidates(s, TableId::pick);
  const auto b = encode_candidates(t, TableId::pick);
  for (std::size_t i = 0; i < a.size(); ++i) {
    Eigen::VectorXd shift(5);
    shift << 7.0 / 64, 5.0 / 64, 7.0 / 64, 5.0 / 64, 0.0;
    EXPECT_TRUE((b[i].loc5 - a[i].loc5).isApprox(shift, 1e-12));
    EXPECT_TRUE(b[i].same_cat_context.isApprox(a[i].same_cat_context));
    EXPECT_TRUE(b[i].any_cat_context.isApprox(a[i].any_cat_context));
  }
}

TEST(Candidates, JitterBoundAndDeterminism) {
  SceneConfig cfg;
  cfg.n_pick = 8;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const Scene s = generate_scene(cfg, seed);
    JitterConfig j{3, 0.2};
    const auto a = encode_candidates(s, TableId::pick, j, seed);
    const auto b = encode_candidates(s, TableId::pick, j, seed);
    for (std::size_t i = 0; i < a.size(); ++i) {
      EXPECT_GT(iou(a[i].bbox, a[i].true_bbox), 0.5);
      EXPECT_EQ(a[i].bbox, b[i].bbox);
      EXPECT_EQ(a[i].appearance, b[i].appearance);
      for (int k = 0; k < 5; ++k) {
        EXPECT_GE(a[i].loc5[k], 0.0);
        EXPECT_LE(a[i].loc5[k], 1.0);
      }
    }
  }
}

}  // namespace
}  // namespace tabletop
