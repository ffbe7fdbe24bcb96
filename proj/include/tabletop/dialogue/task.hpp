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
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "tabletop/dialogue/executor.hpp"
#include "tabletop/eval/task_metrics.hpp"

namespace tabletop {

struct TaskStep {
  std::string text;
  /// Ground truth: the object to pick, or the reference of a placement.
  std::optional<int> target_id;
  /// Set on placement steps.
  std::optional<RelationLabel> relation;
};

struct TaskScript {
  std::string name;
  std::vector<TaskStep> steps;
  std::function<bool(const Scene&)> goal;

  /// Throws InvalidArgument unless steps alternate pick and place intent,
  /// starting with a pick.
  void validate() const;
};

struct TaskResult {
  Scene scene;
  TaskMetrics metrics;
  std::vector<Turn> transcript;
  std::vector<ActionRecord> actions;
  /// Action records interleaved with assessment records and a task_end.
  std::vector<json> log;
  int failed_steps = 0;
  std::optional<bool> goal_reached;
};

/// Runs the steps in order. With a scripted user, questions about a step's
/// ground-truth target are answered truthfully; without one, or without
/// ground truth, a question fails the step. Failed steps do not stop the
/// script.
TaskResult run_task(const TaskScript& script, Scene scene, const TaskModels& models,
                    const ExecutorConfig& config, std::uint64_t seed, bool scripted_user = true);

struct TidyUpConfig {
  int n_objects = 4;
  int n_distractors = 2;
  /// Objects sharing the left container's color go left, the rest right.
  int n_left = 2;
  int max_attempts = 200;
};

/// Pick table: colored objects plus distractors, each target singled out
/// by an attribute expression. Place table: two large boxes of different
/// colors, left and right.
std::pair<Scene, TaskScript> build_tidy_up(std::uint64_t seed, const TidyUpConfig& config = {});

}  // namespace tabletop
