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

#include <istream>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace tabletop {

/// A count pair; the ratio is always recomputed, never stored.
struct Ratio {
  long num = 0;
  long den = 0;

  double value() const { return den > 0 ? double(num) / double(den) : 0.0; }
  void add(bool ok) {
    ++den;
    num += ok ? 1 : 0;
  }
  Ratio& operator+=(const Ratio& o) {
    num += o.num;
    den += o.den;
    return *this;
  }
  friend bool operator==(const Ratio&, const Ratio&) = default;
};

/// Pick-and-place outcome counts in the layout of the robot study table.
struct TaskMetrics {
  Ratio target_selection;        ///< correct / pick commands
  Ratio grasping;                ///< successful grasps / grasp attempts
  Ratio placing_base_grounding;  ///< correct references / place commands
  Ratio placing_success;         ///< satisfied placements / placements executed
  Ratio feedback;                ///< questions / commands
  Ratio pick_and_place;          ///< fully successful pairs / pairs
  long actions = 0;              ///< pick attempts plus places
  long tasks = 0;
  long questions() const { return feedback.num; }
  long commands() const { return feedback.den; }

  double feedback_per_command() const { return feedback.value(); }
  double mean_task_length() const { return tasks > 0 ? double(actions) / double(tasks) : 0.0; }

  TaskMetrics& operator+=(const TaskMetrics& o);
  friend bool operator==(const TaskMetrics&, const TaskMetrics&) = default;

  nlohmann::json to_json() const;
  /// Header plus one row: the seven table columns, each as "value (num/den)".
  std::string to_csv() const;
};

/// Folds session records into metrics. Recognized kinds: pick_attempt
/// (payload.success), place, question, user_turn (payload.response false
/// marks a command), assessment (stage selection | reference | placement |
/// pick_and_place, success) and task_end. Other kinds are ignored; records
/// of a known kind with missing fields count as malformed and are skipped.
/// Lines whose "type" is present and not "record" are framing and skipped.
TaskMetrics metrics_from_records(std::span<const nlohmann::json> records, long* malformed = nullptr);

/// "78.3% (47/60)" or, with as_percent=false, "0.36 (35/95)". Values are
/// truncated to `decimals`.
std::string format_ratio(const Ratio& r, bool as_percent, int decimals = 1);

}  // namespace tabletop
