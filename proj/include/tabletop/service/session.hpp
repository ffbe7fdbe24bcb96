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

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iosfwd>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "tabletop/common/error.hpp"
#include "tabletop/dialogue/executor.hpp"

namespace tabletop {

/// An instruction arrived while a question awaits a yes/no answer.
class Conflict : public Error {
 public:
  explicit Conflict(const std::string& what) : Error("Conflict: " + what) {}
};

/// No live session has the requested id.
class SessionNotFound : public Error {
 public:
  explicit SessionNotFound(const std::string& what) : Error("SessionNotFound: " + what) {}
};

inline constexpr int kSessionLogVersion = 1;

/// 32 lowercase hex digits from the OS entropy source.
std::string new_session_id();

/// Seed of the n-th utterance of a session.
std::uint64_t utterance_seed(std::uint64_t session_seed, long index);

/// One dialogue with its scene and append-only JSON-lines log.
///
/// Log lines, each a JSON object with a "type":
///   session  {version, session_id, seed, scene_config, executor, models, scene}
///   record   {kind, tick, payload}   one per new ActionRecord
///   step     {index, endpoint, text, seed, response, phase, scene}
/// The records of a step precede it and are written with it in one flush.
/// Replaying the step lines through the executor rebuilds the session.
///
/// Not internally synchronized: callers hold mutex() for every access.
class Session {
 public:
  using Clock = std::chrono::steady_clock;

  /// New session: generates the scene and writes the header line. A
  /// session without a log directory is kept in memory only.
  Session(std::string id, std::uint64_t seed, const SceneConfig& scene_config,
          const TaskModels& models, const ExecutorConfig& executor, const json& model_info,
          const std::optional<std::filesystem::path>& log_dir);
  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  /// Rebuilds a session from its log and keeps appending to it. Throws
  /// SchemaError on an unreadable header and Error when a step no longer
  /// reproduces.
  static std::unique_ptr<Session> recover(const std::filesystem::path& log_path,
                                          const TaskModels& models);

  /// A new instruction. Throws Conflict while a question awaits a yes/no
  /// answer and the text is not one.
  SystemAction instruction(std::string_view text);
  /// An answer to the last question, or any other utterance.
  SystemAction response(std::string_view text);

  const std::string& id() const { return id_; }
  std::uint64_t seed() const { return seed_; }
  const Scene& scene() const { return scene_; }
  const DialogueState& state() const { return state_; }
  const std::optional<std::filesystem::path>& log_path() const { return log_path_; }
  std::chrono::system_clock::time_point created_at() const { return created_at_; }
  long utterances() const { return index_; }

  std::mutex& mutex() const { return mutex_; }
  void touch() { last_used_ = Clock::now(); }
  Clock::time_point last_used() const { return last_used_; }

 private:
  Session(const TaskModels& models) : models_(&models) {}
  SystemAction advance(std::string_view endpoint, std::string_view text);
  void append(const std::string& lines);

  std::string id_;
  std::uint64_t seed_ = 0;
  const TaskModels* models_;
  ExecutorConfig executor_;
  Scene scene_;
  DialogueState state_;
  long index_ = 0;
  std::optional<std::filesystem::path> log_path_;
  std::ofstream log_;
  std::chrono::system_clock::time_point created_at_;
  Clock::time_point last_used_;
  mutable std::mutex mutex_;
};

struct ReplayResult {
  std::string session_id;
  std::uint64_t seed = 0;
  ExecutorConfig executor;
  Scene scene;
  DialogueState state;
  long steps = 0;
  /// Every step reproduced its logged response and scene.
  bool verified = false;
  /// First divergence, empty when verified.
  std::string mismatch;
  /// Lines that did not parse; only a torn final line is tolerated.
  long torn_lines = 0;
  /// Length of the log prefix made of complete lines.
  std::uintmax_t valid_bytes = 0;
};

/// Re-executes a session log against `models`.
ReplayResult replay_log(std::istream& log, const TaskModels& models);
ReplayResult replay_log(const std::filesystem::path& path, const TaskModels& models);

/// Live sessions by id with idle expiry. Thread-safe.
class SessionStore {
 public:
  SessionStore(std::chrono::seconds ttl, std::optional<std::filesystem::path> log_dir)
      : ttl_(ttl), log_dir_(std::move(log_dir)) {}

  std::shared_ptr<Session> create(std::uint64_t seed, const SceneConfig& scene_config,
                                  const TaskModels& models, const ExecutorConfig& executor,
                                  const json& model_info);
  /// Throws SessionNotFound for unknown or expired ids.
  std::shared_ptr<Session> get(const std::string& id);
  void insert(std::shared_ptr<Session> session);
  /// Drops sessions idle for longer than the TTL; returns how many.
  std::size_t expire(Session::Clock::time_point now = Session::Clock::now());
  std::size_t size() const;
  /// Recovers every *.jsonl log in the log directory; returns how many.
  std::size_t recover_all(const TaskModels& models);

 private:
  std::chrono::seconds ttl_;
  std::optional<std::filesystem::path> log_dir_;
  mutable std::mutex mutex_;
  std::unordered_map<std::string, std::shared_ptr<Session>> sessions_;
};

}  // namespace tabletop
