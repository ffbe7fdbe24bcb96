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
#include <memory>
#include <optional>
#include <string>

#include "tabletop/dialogue/models.hpp"
#include "tabletop/dialogue/executor.hpp"
#include "tabletop/ground/train.hpp"

namespace tabletop {

/// Everything the service and the command line read at startup. Every level
/// of the JSON document is closed: unknown keys raise SchemaError.
struct AppConfig {
  int grid = 64;
  int pick_min = 4;
  int pick_max = 7;
  int place_min = 1;
  int place_max = 2;
  double stack_rate = 0.0;

  TrainConfig train;
  ExecutorConfig executor;

  /// Empty paths select the grammar oracles.
  std::filesystem::path grounder_checkpoint;
  std::filesystem::path placement_checkpoint;

  std::string host = "127.0.0.1";
  int port = 8080;
  int threads = 4;
  int session_ttl_s = 3600;
  std::filesystem::path data_dir = "data";

  void validate() const;
  json to_json() const;
  static AppConfig from_json(const json& j);
  static AppConfig load(const std::filesystem::path& path);

  /// Scene config for one session; the object counts are drawn from the
  /// configured ranges with `seed`.
  SceneConfig scene_config(std::uint64_t seed) const;
};

/// Loaded weights plus the executor-facing view of them. Not copyable:
/// `models` refers into the owned networks.
class ModelBundle {
 public:
  /// Oracle models.
  ModelBundle();
  /// Loads the checkpoints named in the config (oracles when empty).
  explicit ModelBundle(const AppConfig& config);
  /// Caller-supplied capabilities, for tests and embedding.
  ModelBundle(TaskModels models, json description);
  ModelBundle(const ModelBundle&) = delete;
  ModelBundle& operator=(const ModelBundle&) = delete;

  const TaskModels& models() const { return models_; }
  /// {"grounder": path or "oracle", "placement": ..., "vocab_hash": hex}
  const json& description() const { return description_; }

 private:
  std::unique_ptr<GroundingModel> grounder_;
  std::unique_ptr<PlacementNet> placement_;
  TaskModels models_;
  json description_;
};

}  // namespace tabletop
