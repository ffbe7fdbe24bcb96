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
#include <iosfwd>
#include <optional>
#include <vector>

#include "tabletop/spatial/aux.hpp"

namespace tabletop {

struct PlacementSceneConfig {
  int grid = 64;
  int min_objects = 1;
  int max_objects = 3;
  /// Reference categories drawn from; empty means all.
  std::vector<Category> ref_categories;

  json to_json() const;
  static PlacementSceneConfig from_json(const json& j);
};

/// Place-table scenes with a designated ground-layer reference. Objects are
/// scattered without stacking; the reference is added first.
std::vector<PlacementQuery> build_placement_scenes(int n, const PlacementSceneConfig& cfg,
                                                   std::uint64_t seed);

/// Horizontal mirror of a query (x -> W - 1 - x for every object).
PlacementQuery mirror(const PlacementQuery& q);

struct RelnetConfig {
  int k = 16;            ///< samples per relation channel
  double epsilon = 0.1;  ///< uniform exploration weight
  /// Throw DegenerateChannel instead of falling back to uniform sampling.
  bool strict = false;
};

/// Loss contribution of one sampled cell: squared distance between Γ and
/// the posterior over the channels in `active`.
double relnet_sample_loss(const Eigen::Matrix<double, kNumRelations, 1>& gamma,
                          const Eigen::Matrix<double, kNumRelations, 1>& posterior,
                          const RelationSet& active);

/// (1 - eps) * normalize(channel) + eps * uniform over row-major cells. An
/// all-zero channel yields the uniform distribution and sets *degenerate.
std::vector<double> exploration_distribution(const Eigen::MatrixXd& channel, double epsilon,
                                             bool* degenerate = nullptr);

struct RelnetStepResult {
  double loss = 0.0;
  int samples = 0;
  RelationSet degenerate{};
};

/// One Fig.-3 style update: sample K cells per eligible channel from Γ,
/// query f_phi there and accumulate the gradient of the mean squared
/// mismatch into net.params. The classifier is never modified.
RelnetStepResult relnet_step(const PlacementQuery& q, PlacementNet& net, const AuxClassifier& clf,
                             const RelnetConfig& cfg, std::uint64_t seed);

struct SatisfactionReport {
  std::array<double, kNumRelations> rate{};
  std::array<int, kNumRelations> trials{};

  double min_rate() const;
  json to_json() const;
};

/// For every eligible (scene, relation): draw `samples` placements with
/// sample_location and score them with the oracle on the unit cell.
SatisfactionReport placement_satisfaction(const PlacementNet& net,
                                          const std::vector<PlacementQuery>& scenes, int samples,
                                          std::uint64_t seed,
                                          const RelationParams& rel = {});

struct PlacementTrainConfig {
  int epochs = 15;
  double learning_rate = 3e-3;
  int batch_size = 4;  ///< scenes per update
  RelnetConfig relnet;
  std::uint64_t seed = 0;
  bool mirror_augment = false;
  int val_samples = 1;

  void validate() const;
  json to_json() const;
  static PlacementTrainConfig from_json(const json& j);
};

struct PlacementEpoch {
  int epoch = 0;
  double loss = 0.0;
  int degenerate = 0;
  SatisfactionReport val;
};

struct PlacementTrainResult {
  PlacementNet net;
  std::vector<PlacementEpoch> curves;
};

PlacementTrainResult train_placement(const std::vector<PlacementQuery>& train,
                                     const std::vector<PlacementQuery>& val,
                                     const AuxClassifier& clf, const PlacementTrainConfig& cfg,
                                     PlacementNet init, std::ostream* log = nullptr);

struct AuxTrainConfig {
  int epochs = 30;
  int samples_per_scene = 64;
  double learning_rate = 1e-3;
  int batch_size = 32;
  std::uint64_t seed = 0;
  int hidden = 48;

  json to_json() const;
  static AuxTrainConfig from_json(const json& j);
};

/// Query cells for classifier training and agreement checks, in equal
/// thirds: uniform over the grid, within the proximity band of the
/// reference, and within two cells of its footprint.
std::vector<Cell> aux_sample_cells(const PlacementQuery& q, int n, Rng& rng,
                                   const RelationParams& rel = {});

/// Fits a learned classifier to the oracle posterior on implanted images.
AuxClassifier pretrain_aux(const std::vector<PlacementQuery>& scenes, const AuxTrainConfig& cfg,
                           std::ostream* log = nullptr);

/// Fraction of sampled cells where the learned relation set equals the
/// oracle's.
double aux_agreement(const AuxClassifier& clf, const std::vector<PlacementQuery>& scenes,
                     int samples_per_scene, std::uint64_t seed);

/// epoch,loss,degenerate,<relation>... satisfaction
void write_placement_curves_csv(const std::vector<PlacementEpoch>& curves, std::ostream& out);

}  // namespace tabletop
