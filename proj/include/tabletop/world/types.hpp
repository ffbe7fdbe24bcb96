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

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace tabletop {

using json = nlohmann::json;

enum class Category : std::uint8_t { cup, box, bowl, ball, banana, bottle, teddy, plate };
enum class Color : std::uint8_t { red, green, blue, yellow, black, white };
enum class Size : std::uint8_t { small, medium, large };
enum class TableId : std::uint8_t { pick, place };

/// Channel order of every relation-indexed array in the project.
enum class RelationLabel : std::uint8_t { inside, left, right, in_front, behind, on_top };

inline constexpr int kNumCategories = 8;
inline constexpr int kNumColors = 6;
inline constexpr int kNumSizes = 3;
inline constexpr int kNumRelations = 6;

inline constexpr std::array<Category, kNumCategories> kAllCategories = {
    Category::cup,    Category::box,    Category::bowl,  Category::ball,
    Category::banana, Category::bottle, Category::teddy, Category::plate};
inline constexpr std::array<Color, kNumColors> kAllColors = {
    Color::red, Color::green, Color::blue, Color::yellow, Color::black, Color::white};
inline constexpr std::array<Size, kNumSizes> kAllSizes = {Size::small, Size::medium,
                                                         Size::large};
inline constexpr std::array<RelationLabel, kNumRelations> kAllRelations = {
    RelationLabel::inside,   RelationLabel::left,   RelationLabel::right,
    RelationLabel::in_front, RelationLabel::behind, RelationLabel::on_top};

std::string_view to_string(Category c);
std::string_view to_string(Color c);
std::string_view to_string(Size s);
std::string_view to_string(TableId t);
std::string_view to_string(RelationLabel r);

std::optional<Category> parse_category(std::string_view s);
std::optional<Color> parse_color(std::string_view s);
std::optional<Size> parse_size(std::string_view s);
std::optional<TableId> parse_table(std::string_view s);
std::optional<RelationLabel> parse_relation(std::string_view s);

inline constexpr int index_of(RelationLabel r) { return static_cast<int>(r); }
inline constexpr int index_of(Category c) { return static_cast<int>(c); }
inline constexpr int index_of(Color c) { return static_cast<int>(c); }
inline constexpr int index_of(Size s) { return static_cast<int>(s); }

inline constexpr bool is_directional(RelationLabel r) {
  return r == RelationLabel::left || r == RelationLabel::right ||
         r == RelationLabel::in_front || r == RelationLabel::behind;
}

/// Boolean set over the six relations, indexed by RelationLabel order.
using RelationSet = std::array<bool, kNumRelations>;

inline bool contains(const RelationSet& s, RelationLabel r) { return s[index_of(r)]; }
inline bool empty(const RelationSet& s) {
  return std::none_of(s.begin(), s.end(), [](bool b) { return b; });
}

/// Integer grid cell; x is the column (grows rightward), y the row (grows
/// toward the viewer).
struct Cell {
  int x = 0;
  int y = 0;
  friend bool operator==(const Cell&, const Cell&) = default;
};

/// Half-open axis-aligned box in cell-edge coordinates: covers cells
/// x0..x1-1 and y0..y1-1.
struct BBox {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  int width() const { return x1 - x0; }
  int height() const { return y1 - y0; }
  int area() const { return std::max(0, width()) * std::max(0, height()); }
  double center_x() const { return 0.5 * (x0 + x1); }
  double center_y() const { return 0.5 * (y0 + y1); }
  bool contains_point(double x, double y) const {
    return x >= x0 && x < x1 && y >= y0 && y < y1;
  }
  bool contains_cell(Cell c) const { return contains_point(c.x + 0.5, c.y + 0.5); }
  bool contains(const BBox& o) const {
    return o.x0 >= x0 && o.y0 >= y0 && o.x1 <= x1 && o.y1 <= y1;
  }
  bool overlaps(const BBox& o) const {
    return std::min(x1, o.x1) > std::max(x0, o.x0) && std::min(y1, o.y1) > std::max(y0, o.y0);
  }
  static BBox unit(Cell c) { return {c.x, c.y, c.x + 1, c.y + 1}; }
  friend bool operator==(const BBox&, const BBox&) = default;
};

double iou(const BBox& a, const BBox& b);

struct Grid {
  int h = 64;
  int w = 64;
  bool contains(Cell c) const { return c.x >= 0 && c.y >= 0 && c.x < w && c.y < h; }
  bool contains(const BBox& b) const { return b.x0 >= 0 && b.y0 >= 0 && b.x1 <= w && b.y1 <= h; }
  friend bool operator==(const Grid&, const Grid&) = default;
};

/// Half-extents (in cells) of an object's footprint. Containers and plates
/// are one cell larger than the base size; bananas are elongated along x.
struct HalfExtents {
  int hx = 1;
  int hy = 1;
};
HalfExtents half_extents(Category c, Size s);
bool is_container_category(Category c);
bool is_flat_topped_category(Category c);

struct SceneObject {
  int id = 0;
  Category category = Category::cup;
  Color color = Color::red;
  Size size = Size::small;
  Cell center;
  int z_layer = 0;
  TableId table = TableId::pick;

  HalfExtents extents() const { return half_extents(category, size); }
  BBox footprint() const {
    const auto e = extents();
    return {center.x - e.hx, center.y - e.hy, center.x + e.hx + 1, center.y + e.hy + 1};
  }
  bool is_container() const { return is_container_category(category); }
  bool is_flat_topped() const { return is_flat_topped_category(category); }
  /// Footprint shrunk by one cell on every side; containers only.
  std::optional<BBox> interior() const;

  friend bool operator==(const SceneObject&, const SceneObject&) = default;
};

/// One entry of a scene's append-only action history.
struct Event {
  std::string kind;
  int object_id = -1;
  json detail = json::object();
  friend bool operator==(const Event& a, const Event& b) {
    return a.kind == b.kind && a.object_id == b.object_id && a.detail == b.detail;
  }
};

struct Scene {
  Grid pick_table;
  Grid place_table;
  std::vector<SceneObject> objects;
  std::optional<SceneObject> gripper;
  std::vector<Event> event_log;
  std::uint64_t rng_seed = 0;
  int next_id = 0;

  const Grid& grid(TableId t) const { return t == TableId::pick ? pick_table : place_table; }
  const SceneObject* find(int id) const;
  SceneObject* find(int id);
  /// Objects on the given table in id order.
  std::vector<const SceneObject*> on_table(TableId t) const;

  friend bool operator==(const Scene&, const Scene&) = default;
};

}  // namespace tabletop
