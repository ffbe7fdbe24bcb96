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

#include "tabletop/world/types.hpp"

namespace tabletop {

namespace {

constexpr std::array<std::string_view, kNumCategories> kCategoryNames = {
    "cup", "box", "bowl", "ball", "banana", "bottle", "teddy", "plate"};
constexpr std::array<std::string_view, kNumColors> kColorNames = {"red",    "green", "blue",
                                                                  "yellow", "black", "white"};
constexpr std::array<std::string_view, kNumSizes> kSizeNames = {"small", "medium", "large"};
constexpr std::array<std::string_view, kNumRelations> kRelationNames = {
    "inside", "left", "right", "in_front", "behind", "on_top"};

template <typename E, std::size_t N>
std::optional<E> parse_from(const std::array<std::string_view, N>& names, std::string_view s) {
  for (std::size_t i = 0; i < N; ++i) {
    if (names[i] == s) return static_cast<E>(i);
  }
  return std::nullopt;
}

}  // namespace

std::string_view to_string(Category c) { return kCategoryNames[index_of(c)]; }
std::string_view to_string(Color c) { return kColorNames[index_of(c)]; }
std::string_view to_string(Size s) { return kSizeNames[index_of(s)]; }
std::string_view to_string(TableId t) { return t == TableId::pick ? "pick" : "place"; }
std::string_view to_string(RelationLabel r) { return kRelationNames[index_of(r)]; }

std::optional<Category> parse_category(std::string_view s) {
  return parse_from<Category>(kCategoryNames, s);
}
std::optional<Color> parse_color(std::string_view s) { return parse_from<Color>(kColorNames, s); }
std::optional<Size> parse_size(std::string_view s) { return parse_from<Size>(kSizeNames, s); }
std::optional<RelationLabel> parse_relation(std::string_view s) {
  return parse_from<RelationLabel>(kRelationNames, s);
}
std::optional<TableId> parse_table(std::string_view s) {
  if (s == "pick") return TableId::pick;
  if (s == "place") return TableId::place;
  return std::nullopt;
}

double iou(const BBox& a, const BBox& b) {
  const int ix = std::max(0, std::min(a.x1, b.x1) - std::max(a.x0, b.x0));
  const int iy = std::max(0, std::min(a.y1, b.y1) - std::max(a.y0, b.y0));
  const double inter = double(ix) * iy;
  const double uni = double(a.area()) + b.area() - inter;
  return uni > 0 ? inter / uni : 0.0;
}

HalfExtents half_extents(Category c, Size s) {
  const int base = 1 + index_of(s);
  switch (c) {
    case Category::box:
    case Category::bowl:
    case Category::plate:
      return {base + 1, base + 1};
    case Category::banana:
      return {base + 1, base};
    default:
      return {base, base};
  }
}

bool is_container_category(Category c) { return c == Category::box || c == Category::bowl; }

bool is_flat_topped_category(Category c) { return c == Category::box || c == Category::plate; }

std::optional<BBox> SceneObject::interior() const {
  if (!is_container()) return std::nullopt;
  const BBox f = footprint();
  return BBox{f.x0 + 1, f.y0 + 1, f.x1 - 1, f.y1 - 1};
}

const SceneObject* Scene::find(int id) const {
  for (const auto& o : objects) {
    if (o.id == id) return &o;
  }
  return nullptr;
}

SceneObject* Scene::find(int id) {
  for (auto& o : objects) {
    if (o.id == id) return &o;
  }
  return nullptr;
}

std::vector<const SceneObject*> Scene::on_table(TableId t) const {
  std::vector<const SceneObject*> out;
  for (const auto& o : objects) {
    if (o.table == t) out.push_back(&o);
  }
  std::sort(out.begin(), out.end(), [](auto* a, auto* b) { return a->id < b->id; });
  return out;
}

}  // namespace tabletop
