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

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace tabletop {

/// Workload of the acceptance run. quick() shrinks every stage so that the
/// report format can be exercised in seconds; its numbers mean nothing.
struct AcceptanceSizes {
  int ground_records = 5000;
  int ground_epochs = 20;
  int ambiguity_scenes = 500;
  int place_train = 2000;
  int place_val = 200;
  int place_test = 1000;
  int place_epochs = 15;
  int place_samples = 10;
  int aux_epochs = 30;
  int tidy_runs = 20;
  int monte_carlo_runs = 10000;
  int sessions = 12;

  static AcceptanceSizes quick();
};

struct AcceptanceConfig {
  /// Checkpoints, curves, plots, session logs and the CSV land here.
  std::filesystem::path work_dir = "acceptance";
  AcceptanceSizes sizes;
  /// Progress lines; null for silence.
  std::ostream* log = nullptr;
};

/// One measured quantity against its bound. op is ">=", "<=", "==" or
/// "info" (reported, not judged).
struct MetricRow {
  std::string metric;
  double value = 0.0;
  std::string op;
  double threshold = 0.0;
  bool pass = true;
};

struct CriterionOutcome {
  std::string name;
  std::vector<MetricRow> rows;
  double seconds = 0.0;
  /// Set when the criterion could not be evaluated at all.
  std::string error;

  bool pass() const;
  /// "PASS name: metric=value (op threshold), ..."
  std::string line() const;
};

struct AcceptanceReport {
  std::vector<CriterionOutcome> criteria;

  bool all_pass() const;
  /// criterion,metric,value,op,threshold,pass
  std::string to_csv() const;
};

/// Trains every model from scratch and evaluates the criteria in a fixed
/// order: loss arithmetic, comprehension, generation, placement, ambiguity,
/// tidy-up, determinism and replay, Table 2. A criterion whose models could
/// not be trained fails with an error instead of aborting the run.
AcceptanceReport run_acceptance(const AcceptanceConfig& config);

}  // namespace tabletop
