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

#include <cstdint>
#include <optional>
#include <vector>

#include "tabletop/world/types.hpp"

namespace tabletop {

// ---------------------------------------------------------------------------
// Relation oracle
// ---------------------------------------------------------------------------

struct RelationParams {
  /// Maximum edge gap (cells) for the directional relations.
  int proximity_gap = 8;
};

/// Geometric ground truth for "subject <relation> ref".
///
///   left      subject entirely left of ref, >= 1 shared row, gap <= G
///   right     mirrored
///   behind    subject entirely above ref (smaller y), >= 1 shared column, gap <= G
///   in_front  mirrored (larger y)
///   inside    ref is a container and subject lies within its interior
///   on_top    ref is flat-topped, subject center within ref footprint and
///             subject area <= ref area
///
/// Directional labels need disjoint boxes while inside/on_top need the
/// subject center over the ref, so the two groups never co-occur.
RelationSet relation_oracle(const BBox& subject, const SceneObject& ref,
                            const RelationParams& params = {});

// ---------------------------------------------------------------------------
// Scene generation
// ---------------------------------------------------------------------------

struct SceneConfig {
  int grid_h = 64;
  int grid_w = 64;
  int n_pick = 5;
  int n_place = 1;
  /// Forces at least two pick-table objects to share (category, color, size).
  bool ambiguity = false;
  /// Probability that a new object is set into / onto an existing host.
  double stack_rate = 0.0;
  /// When non-empty, the place table gets exactly these categories.
  std::vector<Category> place_categories;
  int max_attempts = 1000;

  json to_json() const;
  static SceneConfig from_json(const json& j);
};

/// Builds a scene by rejection sampling object centers. Throws
/// PlacementInfeasible when one object needs more than max_attempts draws.
Scene generate_scene(const SceneConfig& config, std::uint64_t seed);

/// Adds one z-layer-0 object at a free random location on a table.
SceneObject& add_random_object(Scene& scene, TableId table, Category category, Color color,
                               Size size, std::uint64_t seed, int max_attempts = 1000);

/// True when every SceneObject invariant holds (grid bounds, no base-layer
/// overlap, support for stacked objects, gripper object absent from tables).
bool check_invariants(const Scene& scene, std::string* why = nullptr);

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

/// Channel layout of a rendered table.
struct RenderChannels {
  static constexpr int kOccupancy = 0;
  static constexpr int kColor0 = 1;
  static constexpr int kCategory0 = kColor0 + kNumColors;
  static constexpr int kZLayer = kCategory0 + kNumCategories;
  static constexpr int kCount = kZLayer + 1;
};

/// Dense channels x H x W tensor, row-major per channel.
struct ImageTensor {
  int channels = 0;
  int h = 0;
  int w = 0;
  std::vector<double> data;

  ImageTensor() = default;
  ImageTensor(int c, int h_, int w_) : channels(c), h(h_), w(w_), data(std::size_t(c) * h_ * w_) {}

  double& at(int c, int y, int x) { return data[(std::size_t(c) * h + y) * w + x]; }
  double at(int c, int y, int x) const { return data[(std::size_t(c) * h + y) * w + x]; }
  friend bool operator==(const ImageTensor&, const ImageTensor&) = default;
};

/// Top-down rendering; higher z layers overwrite lower ones. Empty cells are
/// all-zero; the z channel holds z_layer + 1 for occupied cells.
ImageTensor render(const Scene& scene, TableId table);

/// Glyph of an object in text renderings: 0-9, a-z, A-Z by id, then '#'.
char object_glyph(int id);

/// Text top view, one line per two grid rows and one character per column.
/// '.' is empty; the topmost object in either row wins.
std::string render_ascii(const Scene& scene, TableId table);

/// Binary H x W mask of an object's footprint (row-major).
std::vector<std::uint8_t> footprint_mask(const SceneObject& obj, const Grid& grid);

// ---------------------------------------------------------------------------
// Pick / place mechanics
// ---------------------------------------------------------------------------

struct PickOutcome {
  bool success = false;
  int object_id = -1;
};

/// Bernoulli grasp. Throws GripperOccupied, ObjectNotFound, ObjectBuried.
PickOutcome pick(Scene& scene, int object_id, double grasp_success_prob, std::uint64_t seed);

enum class PlaceKind { placed, stacked, inside, partial_overlap };
std::string_view to_string(PlaceKind k);

struct PlaceOutcome {
  PlaceKind kind = PlaceKind::placed;
  int object_id = -1;
  Cell requested;
  Cell final_center;
  int host_id = -1;
};

/// Releases the held object centered at `location`. Throws NothingHeld,
/// OutOfBounds; PlacementInfeasible when no free cell exists for a nudge.
PlaceOutcome place(Scene& scene, Cell location, TableId table);

/// Nearest center (Euclidean, ties by y then x) where the footprint of
/// `extents` fits the grid and overlaps no base-layer object on `table`.
std::optional<Cell> nearest_free_center(const Scene& scene, TableId table, HalfExtents extents,
                                        Cell from);

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

inline constexpr int kSceneSchemaVersion = 1;

json to_json(const SceneObject& o);
SceneObject object_from_json(const json& j);
json to_json(const Scene& scene);
Scene scene_from_json(const json& j);
/// Canonical compact serialization; equal scenes give equal strings.
std::string serialize(const Scene& scene);
std::uint64_t scene_hash(const Scene& scene);

}  // namespace tabletop
