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
#include <vector>

#include <Eigen/Core>

#include "tabletop/world/world.hpp"

namespace tabletop {

/// color one-hot | category one-hot | size one-hot | normalized area
inline constexpr int kAppearanceDim = kNumColors + kNumCategories + kNumSizes + 1;
inline constexpr int kLoc5Dim = 5;
inline constexpr int kContextSlots = 5;
inline constexpr int kOffsetDim = 5;
inline constexpr int kSameContextDim = kContextSlots * kOffsetDim;
inline constexpr int kAnySlotDim = kAppearanceDim + kOffsetDim;
inline constexpr int kAnyContextDim = kContextSlots * kAnySlotDim;
/// Location-module input: loc5 followed by the same-category context.
inline constexpr int kLocationInputDim = kLoc5Dim + kSameContextDim;

struct JitterConfig {
  /// Maximum perturbation of each bbox edge, in cells (0 disables).
  int max_cells = 0;
  /// Mixes each one-hot appearance group with a random distribution.
  double appearance_noise = 0.0;
};

/// Perception view of one object: what the grounding networks consume.
struct ObjectCandidate {
  int id = 0;
  BBox bbox;       ///< possibly jittered detector box
  BBox true_bbox;  ///< simulator footprint
  std::vector<std::uint8_t> mask;  ///< H x W footprint mask
  Eigen::VectorXd appearance;      ///< kAppearanceDim
  Eigen::VectorXd loc5;            ///< (x0/W, y0/H, x1/W, y1/H, area/(W*H))
  /// kContextSlots rows of kOffsetDim, nearest first, zero-padded.
  Eigen::MatrixXd same_cat_context;
  /// kContextSlots rows of kAnySlotDim (appearance | offset), zero-padded.
  Eigen::MatrixXd any_cat_context;
  int n_same = 0;
  int n_any = 0;

  Eigen::VectorXd location_input() const;
};

/// One candidate per object on the table, in id order.
std::vector<ObjectCandidate> encode_candidates(const Scene& scene, TableId table,
                                               const JitterConfig& jitter = {},
                                               std::uint64_t seed = 0);

/// Relative offset of `other` seen from `self`, normalized by self's
/// diagonal: (dx0, dy0, dx1, dy1, area ratio).
Eigen::VectorXd offset_encoding(const BBox& self, const BBox& other);

const ObjectCandidate* find_candidate(const std::vector<ObjectCandidate>& c, int id);

}  // namespace tabletop
