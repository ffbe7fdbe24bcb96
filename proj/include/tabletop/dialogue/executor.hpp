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
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tabletop/dialogue/models.hpp"

namespace tabletop {

enum class Phase : std::uint8_t { idle, awaiting_confirmation, holding_object };
std::string_view to_string(Phase p);

enum class ActionKind : std::uint8_t { pick_attempt, place, question, user_turn, regrasp };
std::string_view to_string(ActionKind k);

struct Turn {
  std::string speaker;  ///< "user" or "robot"
  std::string text;
  friend bool operator==(const Turn&, const Turn&) = default;
};

struct ActionRecord {
  ActionKind kind = ActionKind::user_turn;
  json payload = json::object();
  long tick = 0;
  json to_json() const;
  friend bool operator==(const ActionRecord&, const ActionRecord&) = default;
};

/// Task length counts pick attempts and places.
long task_length(const std::vector<ActionRecord>& actions);

struct DialogueState {
  Phase phase = Phase::idle;
  /// Instruction currently being resolved.
  std::vector<std::string> pending_tokens;
  /// Plausible targets still to ask about, best first.
  std::vector<int> candidate_queue;
  std::optional<int> confirmed_target;
  /// Set while the pending instruction is a placement.
  std::optional<RelationLabel> pending_relation;
  int questions_this_instruction = 0;
  std::vector<Turn> transcript;
  std::vector<ActionRecord> actions;
  long tick = 0;

  /// Drops any unresolved instruction; the phase follows the gripper.
  void abandon(const Scene& scene);
  json to_json() const;
};

enum class SystemActionKind : std::uint8_t { picked, placed, question, error };
std::string_view to_string(SystemActionKind k);

struct CandidateScore {
  int id = 0;
  double score = 0.0;
  BBox bbox;
};

struct SystemAction {
  SystemActionKind kind = SystemActionKind::error;
  std::string text;
  int object_id = -1;  ///< picked, placed or asked-about object
  std::optional<Cell> cell;
  std::vector<CandidateScore> candidates;  ///< ranking of the last comprehension
  json to_json() const;
};

struct ExecutorConfig {
  double grasp_p = 1.0;
  /// Probability that a release lands where it was aimed; otherwise at a
  /// uniformly random cell of the table.
  double place_p = 1.0;
  int retry_cap = 5;
  JitterConfig jitter;
  RelationParams relation;

  void validate() const;
  json to_json() const;
  static ExecutorConfig from_json(const json& j);
};

enum class Intent : std::uint8_t { pick, place };

/// A leading place verb means place and a leading pick verb means pick.
/// Otherwise the text is a placement exactly when an object is held and a
/// relation phrase occurs.
Intent classify_intent(const std::vector<std::string>& words, bool holding);

/// True for a bare yes or no, the only replies that answer a question
/// without correcting it.
bool is_yes_no(std::string_view text);

/// Advances the dialogue by one user utterance. Mutates the state and the
/// scene; every call appends the user turn and one robot turn.
SystemAction step(DialogueState& state, Scene& scene, std::string_view user_text,
                  const TaskModels& models, const ExecutorConfig& config, std::uint64_t seed);

}  // namespace tabletop
