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

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "tabletop/nn/tape.hpp"
#include "tabletop/world/world.hpp"

namespace tabletop {

using Mask = std::vector<std::uint8_t>;

/// Per-relation placement scores Γ, one H x W channel per RelationLabel.
struct ProbMaps {
  int h = 0;
  int w = 0;
  std::array<Eigen::MatrixXd, kNumRelations> channels;  ///< rows = y, cols = x

  const Eigen::MatrixXd& channel(RelationLabel r) const { return channels[index_of(r)]; }
  Eigen::Matrix<double, kNumRelations, 1> at(Cell c) const;

  json to_json() const;
  /// Rows of one channel, for the UI.
  json channel_json(RelationLabel r) const;
};

/// Bounding box of a non-empty H x W mask. Throws InvalidArgument when empty.
BBox mask_extent(const Mask& mask, int h, int w);

struct PlacementNetConfig {
  int hidden = 48;
  /// Cells per unit of the offset features.
  double scale = 2.0;

  json to_json() const;
  static PlacementNetConfig from_json(const json& j);
};

/// Signed offsets to the mask extent (left, right, top, bottom edges), the
/// per-axis and overall signed distance to it, mask-pooled category and z
/// channels, cell occupancy and mask membership.
inline constexpr int kPlacementFeatureDim = 4 + 3 + kNumCategories + 1 + 2;

/// Γ as a per-cell network over a coordinate front end: the reference mask
/// is reduced to its extent and pooled appearance, every cell is described
/// relative to them, and two ReLU layers map that to six sigmoid scores.
struct PlacementNet {
  PlacementNetConfig config;
  nn::ParamStore params;

  static PlacementNet create(const PlacementNetConfig& config, std::uint64_t seed);
  void save(const std::filesystem::path& path, const json& extra = {}) const;
  static PlacementNet load(const std::filesystem::path& path);
};

/// kPlacementFeatureDim x (H*W), column y*W + x. Throws DimensionMismatch
/// when image and mask disagree.
Eigen::MatrixXd placement_features(const ImageTensor& image, const Mask& ref_mask,
                                   double scale);

/// Scores for feature columns: kNumRelations x n, on a tape.
nn::Var predict_cells(const nn::Binder& b, const Eigen::MatrixXd& features);

ProbMaps predict_maps(const ImageTensor& image, const Mask& ref_mask, const PlacementNet& net);
ProbMaps predict_maps_from_features(const Eigen::MatrixXd& features, int h, int w,
                                    const PlacementNet& net);

/// The sampling distribution over cells (row-major) for one relation: the
/// channel with the reference footprint zeroed for directional relations,
/// renormalized. Throws NoMassAvailable when nothing is left.
std::vector<double> placement_distribution(const ProbMaps& maps, RelationLabel r,
                                           const Mask& ref_mask);

Cell sample_location(const ProbMaps& maps, RelationLabel r, const Mask& ref_mask,
                     std::uint64_t seed);

/// Inverse-CDF draw from a normalized distribution over row-major cells.
Cell draw_cell(std::span<const double> cdf, int w, Rng& rng);
std::vector<double> cumulative(std::span<const double> p);

/// One linear grayscale PNG per relation (0 -> black, 1 -> white), named
/// <prefix>_<relation>.png.
void write_heatmap_pngs(const ProbMaps& maps, const std::filesystem::path& dir,
                        const std::string& prefix);

}  // namespace tabletop
