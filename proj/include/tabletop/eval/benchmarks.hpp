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
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "tabletop/dialogue/executor.hpp"
#include "tabletop/eval/task_metrics.hpp"
#include "tabletop/lang/dataset.hpp"
#include "tabletop/spatial/aux.hpp"

namespace tabletop {

enum class Criterion : std::uint8_t { exact_id, iou_0_5 };
std::string_view to_string(Criterion c);

struct ComprehensionReport {
  Ratio exact;
  Ratio iou;
  std::array<Ratio, kNumClauseKinds> exact_by_kind;
  std::array<Ratio, kNumClauseKinds> iou_by_kind;
  long skipped_ambiguous = 0;

  double accuracy(Criterion c) const { return (c == Criterion::exact_id ? exact : iou).value(); }
  nlohmann::json to_json() const;
};

/// Scores for `candidates` (in their order) against one record.
using RecordScorer = std::function<std::vector<double>(
    const ExpressionSample& record, const Scene& scene,
    const std::vector<ObjectCandidate>& candidates)>;

struct EvalOptions {
  JitterConfig jitter;
  std::uint64_t seed = 0;
  /// Ambiguous records have no single correct object.
  bool skip_ambiguous = true;
};

/// The top-ranked candidate (ties by id) is correct under exact_id when its
/// id is the target, and under iou_0_5 when its detector box overlaps the
/// target's true footprint with IoU > 0.5.
ComprehensionReport eval_comprehension(const GroundingDataset& ds,
                                       std::span<const std::size_t> records,
                                       const RecordScorer& scorer, const EvalOptions& opt = {});
ComprehensionReport eval_comprehension(const GroundingDataset& ds,
                                       std::span<const std::size_t> records,
                                       const GroundingModel& model, const EvalOptions& opt = {});

struct GenerationReport {
  Ratio reranked;  ///< rerank(beam) output comprehended back to the target
  Ratio beam_top;  ///< the most probable beam hypothesis, for reference
  nlohmann::json to_json() const;
};

/// One query per record target; ambiguity flags are irrelevant here.
GenerationReport eval_generation(const GroundingDataset& ds, std::span<const std::size_t> records,
                                 const GroundingModel& model, const BeamConfig& beam = {},
                                 const EvalOptions& opt = {});

using QueryMaps = std::function<ProbMaps(const PlacementQuery& q)>;

struct PlacementReport {
  std::array<Ratio, kNumRelations> sampled;
  std::array<Ratio, kNumRelations> argmax;
  /// Queries for which the relation was applicable (eligible reference and
  /// at least one satisfying cell), out of all queries.
  std::array<Ratio, kNumRelations> coverage;
  /// Predictions with a value outside [0, 1] or a distribution not summing to 1.
  long invariant_violations = 0;
  long predictions = 0;

  double min_sampled() const;
  nlohmann::json to_json() const;
  std::string to_csv() const;
};

/// Samples `samples` placements per applicable (query, relation) and scores
/// them with the oracle on a unit box at the sampled cell.
PlacementReport eval_placement(const std::vector<PlacementQuery>& queries, const QueryMaps& maps,
                               int samples, std::uint64_t seed, const RelationParams& rel = {});
QueryMaps net_maps(const PlacementNet& net);
/// Oracle maps of the query's reference.
QueryMaps ideal_maps(const RelationParams& rel = {});

struct AmbiguityReport {
  Ratio asked;                   ///< instructions that triggered a question
  Ratio correct_when_asked;      ///< confirmed target = record target, over asked instructions
  Ratio correct_when_not_asked;  ///< top pick = target, over the rest
  std::vector<int> questions;    ///< questions per instruction
  nlohmann::json to_json() const;
};

/// Drives the executor with a grammar pick instruction per record and a
/// truthful scripted user, on a copy of the record's scene.
AmbiguityReport eval_ambiguity(const GroundingDataset& ds, std::span<const std::size_t> records,
                               const TaskModels& models, const ExecutorConfig& cfg,
                               std::uint64_t seed);

struct Table2Report {
  TaskMetrics metrics;
  long lines = 0;
  long malformed = 0;
};

/// Reads JSON-lines session logs (see metrics_from_records). Lines that are
/// not JSON objects count as malformed and are skipped.
Table2Report table2_report(std::istream& in);
Table2Report table2_report(std::span<const std::string> lines);

// ---------------------------------------------------------------------------
// Plots

struct Series {
  std::string name;
  std::vector<double> y;
};

/// Line chart of several series against their index, auto-scaled, with
/// light grid lines at tenths.
void plot_lines(const std::filesystem::path& path, const std::vector<Series>& series,
                int width = 480, int height = 320);
/// One bar per value, values in [0, 1], with a reference line at `threshold`.
void plot_bars(const std::filesystem::path& path, const std::vector<double>& values,
               double threshold = 0.9, int width = 480, int height = 320);

}  // namespace tabletop
