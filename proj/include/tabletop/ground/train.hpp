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
#include <iosfwd>
#include <string>
#include <vector>

#include "tabletop/ground/grounder.hpp"
#include "tabletop/lang/dataset.hpp"

namespace tabletop {

struct TrainConfig {
  double m1 = 0.1;
  double m2 = 1.0;
  double lambda1 = 1.0;
  double lambda2 = 1.0;
  double lambda3 = 0.1;
  double lambda_attr = 1.0;
  double learning_rate = 0.0004;
  int batch_size = 8;
  int epochs = 10;
  std::uint64_t seed = 0;
  /// Adds the generator's NLL and MMI terms on the same triplets.
  bool joint = false;
  JitterConfig jitter;
  /// Validation records scored after each epoch (0 = all).
  int val_limit = 500;
  /// Weight of the tie term on ambiguous records: every pair of objects the
  /// expression denotes is pulled within m1 / 2 of each other.
  double lambda_tie = 1.0;
  /// "hardest": the wrong object and wrong expression are the highest
  /// scoring ones in the scene. "uniform": drawn at random.
  std::string negatives = "hardest";

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

/// lambda1 * max(0, m1 + S(o_i|r_j) - S(o_i|r_i))
///   + lambda2 * max(0, m1 + S(o_k|r_i) - S(o_i|r_i))
double hinge_loss(double s_pos, double s_wrong_expr, double s_wrong_obj, const TrainConfig& cfg);
nn::Var hinge_loss(nn::Var s_pos, nn::Var s_wrong_expr, nn::Var s_wrong_obj,
                   const TrainConfig& cfg);

struct EpochStats {
  int epoch = 0;
  double l1 = 0.0;
  double l_attr = 0.0;
  double l2 = 0.0;
  double l3 = 0.0;
  double val_accuracy = 0.0;
};

struct GroundingTrainResult {
  GroundingModel model;
  std::vector<EpochStats> curves;
};

/// Candidates for every scene of a dataset (pick table), jittered with a
/// per-scene seed derived from `seed`.
std::vector<std::vector<ObjectCandidate>> dataset_candidates(const GroundingDataset& ds,
                                                             const JitterConfig& jitter,
                                                             std::uint64_t seed);

/// Adam over shuffled triplets. Throws NonFiniteLoss with the offending
/// record on divergence.
GroundingTrainResult train_grounding(const GroundingDataset& ds, const TrainConfig& cfg,
                                     const ModelDims& dims = {}, std::ostream* log = nullptr);

/// Continues training an existing model.
GroundingTrainResult train_grounding(const GroundingDataset& ds, const TrainConfig& cfg,
                                     GroundingModel init, std::ostream* log = nullptr);

/// epoch,L1,L_attr,L2,L3,val_accuracy
void write_curves_csv(const std::vector<EpochStats>& curves, std::ostream& out);

}  // namespace tabletop
