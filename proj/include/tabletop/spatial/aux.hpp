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
#include <filesystem>
#include <string>

#include "tabletop/spatial/maps.hpp"

namespace tabletop {

/// A table, its rendering and one reference object.
struct PlacementQuery {
  Scene scene;
  TableId table = TableId::place;
  int ref_id = 0;
  ImageTensor image;
  Mask ref_mask;

  static PlacementQuery make(Scene scene, TableId table, int ref_id);
  const SceneObject& ref() const;
  const Grid& grid() const { return scene.grid(table); }
};

/// True when the relation can hold for `ref` at all: inside needs a
/// container, on_top a flat-topped object.
bool relation_eligible(RelationLabel r, const SceneObject& ref);

/// Writes a generic object (occupied, no color or category, ground layer)
/// over a footprint x footprint square centered at `at`, clipped to the grid.
ImageTensor implant(const ImageTensor& image, Cell at, int footprint = 3);

/// Oracle relations of a unit box at `at`, normalized to sum 1 when non-empty.
Eigen::Matrix<double, kNumRelations, 1> oracle_posterior(const SceneObject& ref, Cell at,
                                                         const RelationParams& rel = {});

enum class AuxMode { learned, oracle };
std::string_view to_string(AuxMode m);

/// Geometry of an implant relative to the reference mask: signed offsets of
/// the implant center to the mask extent, per-axis and overall signed
/// distance, then mask-pooled category and z.
inline constexpr int kAuxFeatureDim = 4 + 3 + kNumCategories + 1;

struct AuxClassifier {
  AuxMode mode = AuxMode::oracle;
  int hidden = 48;
  double scale = 2.0;
  int footprint = 3;
  RelationParams relation;
  nn::ParamStore params;  ///< learned mode only

  static AuxClassifier oracle(const RelationParams& relation = {});
  static AuxClassifier create_learned(int hidden, std::uint64_t seed);

  void save(const std::filesystem::path& path, const json& extra = {}) const;
  static AuxClassifier load(const std::filesystem::path& path);
};

/// Features of a hallucinated image (one implant present) for the learned
/// classifier. Throws InvalidArgument when no implant is visible.
Eigen::VectorXd aux_features(const ImageTensor& hallucinated, const Mask& ref_mask, double scale);

/// Same features as aux_features(implant(image, at, footprint), ...) without
/// building the hallucinated image. `image` must hold no implant already.
Eigen::VectorXd aux_features_at(const ImageTensor& image, const Mask& ref_mask, Cell at,
                                int footprint, double scale);

nn::Var aux_forward(const nn::Binder& b, const Eigen::MatrixXd& features);

/// f_phi at `at`: the oracle indicator in oracle mode, the classifier's
/// sigmoid outputs on the implanted image in learned mode.
Eigen::Matrix<double, kNumRelations, 1> aux_posterior(const PlacementQuery& q, Cell at,
                                                      const AuxClassifier& clf);

/// Relation set read from a posterior (entries >= 0.25).
RelationSet posterior_set(const Eigen::Matrix<double, kNumRelations, 1>& p);

}  // namespace tabletop
