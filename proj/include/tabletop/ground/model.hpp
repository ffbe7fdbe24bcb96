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

#include "tabletop/lang/vocabulary.hpp"
#include "tabletop/nn/tape.hpp"
#include "tabletop/percept/candidates.hpp"

namespace tabletop {

struct ModelDims {
  int embed = 32;
  int hidden = 32;      ///< per encoder direction
  int joint = 64;       ///< phrase / visual comparison space
  int vis_gen = 32;     ///< generator-exclusive appearance projection
  int dec_hidden = 64;

  int encoder_states() const { return 2 * hidden; }
  /// |v_vis| + |v_loc| + |v_rel|
  int visual_rep() const { return vis_gen + 2 * joint; }

  nlohmann::json to_json() const;
  static ModelDims from_json(const nlohmann::json& j);
  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

/// Parameters of the grounder and the expression generator. Both read the
/// single "embedding" table and the "vis.shared" projection.
struct GroundingModel {
  Vocabulary vocab = Vocabulary::standard();
  ModelDims dims;
  nn::ParamStore params;

  static GroundingModel create(const Vocabulary& vocab, const ModelDims& dims,
                               std::uint64_t seed);

  void save(const std::filesystem::path& path, const nlohmann::json& extra = {}) const;
  /// Throws CheckpointError on dimension, vocabulary or embedding-hash mismatch.
  static GroundingModel load(const std::filesystem::path& path,
                             const Vocabulary& expected_vocab = Vocabulary::standard());
};

}  // namespace tabletop
