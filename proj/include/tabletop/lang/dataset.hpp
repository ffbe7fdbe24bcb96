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
#include <string>
#include <vector>

#include "tabletop/lang/grammar.hpp"

namespace tabletop {

enum class Split : std::uint8_t { train, val, test };
std::string_view to_string(Split s);

struct DatasetConfig {
  int n_records = 1000;
  /// Probabilities of attribute, location and relational clauses.
  std::array<double, kNumClauseKinds> mixture = {0.5, 0.3, 0.2};
  /// Fraction of attribute-clause records drawn as ambiguous.
  double ambiguity_rate = 0.0;
  int min_objects = 3;
  int max_objects = 8;
  int records_per_scene = 3;
  double stack_rate = 0.15;
  int grid = 64;
  /// Scene-level train / val / test fractions.
  std::array<double, 3> split = {0.8, 0.1, 0.1};
  /// Scenes a pending record may be tried against before giving up.
  int max_retries = 50;
  RelationParams relation;

  nlohmann::json to_json() const;
};

/// Scenes plus referring-expression records over their pick tables. Every
/// record of a scene has a distinct target; splits partition scenes.
struct GroundingDataset {
  Vocabulary vocab = Vocabulary::standard();
  std::vector<Scene> scenes;
  std::vector<Split> scene_split;
  std::vector<ExpressionSample> records;

  std::vector<std::size_t> records_in(Split s) const;
  /// Record indices grouped by scene.
  std::vector<std::vector<std::size_t>> by_scene() const;

  friend bool operator==(const GroundingDataset&, const GroundingDataset&) = default;
};

/// Deterministic under seed. Clause kinds and ambiguity flags are drawn per
/// record up front; a record no template can satisfy in one scene carries
/// over to the next, so the empirical mixture tracks the configured one.
GroundingDataset build_dataset(const DatasetConfig& config, std::uint64_t seed);

/// One JSON object per line: scene, scene_id, split, tokens, text,
/// target_id, clause_kind, is_ambiguous.
void write_jsonl(const GroundingDataset& ds, std::ostream& out);
GroundingDataset read_jsonl(std::istream& in, const Vocabulary& vocab = Vocabulary::standard());

}  // namespace tabletop
