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

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "tabletop/gen/generator.hpp"
#include "tabletop/ground/grounder.hpp"
#include "tabletop/spatial/maps.hpp"

namespace tabletop {

/// Scores every candidate on `table` against token ids (EOS-terminated).
using Comprehender = std::function<MatchResult(
    const Scene& scene, TableId table, const std::vector<ObjectCandidate>& candidates,
    std::span<const int> tokens)>;

/// Words of an expression meant to single out `target_id`.
using Describer = std::function<std::vector<std::string>(
    const Scene& scene, TableId table, const std::vector<ObjectCandidate>& candidates,
    int target_id)>;

/// Γ for one reference object on a table.
using MapProvider = std::function<ProbMaps(const Scene& scene, TableId table, int ref_id)>;

/// The three learned capabilities the executor consults. The factories
/// capture their arguments by reference; those must outlive the result.
struct TaskModels {
  Vocabulary vocab = Vocabulary::standard();
  Comprehender comprehend;
  Describer describe;
  MapProvider maps;

  static TaskModels trained(const GroundingModel& grounder, const PlacementNet& placement,
                            double m1 = 0.1, const BeamConfig& beam = {});
  /// Grammar denotation for comprehension, the grammar's first
  /// discriminative expression for description and oracle maps.
  static TaskModels oracle(const RelationParams& rel = {});
};

/// Score 1 for denoted candidates and 0 otherwise; unparseable text ties
/// every candidate.
MatchResult oracle_comprehend(const Scene& scene, TableId table,
                              const std::vector<ObjectCandidate>& candidates,
                              std::span<const int> tokens, const Vocabulary& vocab,
                              const RelationParams& rel = {});

/// First attribute, location, then relational realization denoting only the
/// target; "the <color> <category>" when none exists.
std::vector<std::string> oracle_describe(const Scene& scene, int target_id,
                                         const RelationParams& rel = {});

/// Channel r is 1 on cells whose unit box satisfies r for the reference and
/// 0 elsewhere.
ProbMaps oracle_maps(const Scene& scene, TableId table, int ref_id, const RelationParams& rel = {});

ProbMaps learned_maps(const Scene& scene, TableId table, int ref_id, const PlacementNet& net);

/// "the small red cup"
std::string describe_object(const SceneObject& o);

}  // namespace tabletop
