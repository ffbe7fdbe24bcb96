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
#include "tabletop/service/config.hpp"

#include <cstdio>
#include <fstream>

#include "tabletop/common/rng.hpp"
#include "tabletop/common/error.hpp"

namespace tabletop {

namespace {

void require_object(const json& j, const std::string& where) {
  if (!j.is_object()) throw SchemaError(where + " must be an object");
}

template <typename T>
T read(const json& v, const std::string& key) {
  try {
    return v.get<T>();
  } catch (const json::exception&) {
    throw SchemaError("config key '" + key + "' has the wrong type");
  }
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

void AppConfig::validate() const {
  if (grid < 16) throw InvalidArgument("grid must be >= 16");
  if (pick_min < 1 || pick_max > 12 || pick_min > pick_max)
    throw InvalidArgument("pick object range must lie within [1, 12]");
  if (place_min < 1 || place_max > 12 || place_min > place_max)
    throw InvalidArgument("place object range must lie within [1, 12]");
  if (!(stack_rate >= 0.0 && stack_rate <= 1.0)) throw InvalidArgument("stack_rate must lie in [0, 1]");
  if (port < 0 || port > 65535) throw InvalidArgument("port must lie in [0, 65535]");
  if (threads < 1) throw InvalidArgument("threads must be >= 1");
  if (session_ttl_s < 1) throw InvalidArgument("session_ttl_s must be >= 1");
  if (host.empty()) throw InvalidArgument("host must not be empty");
  train.validate();
  executor.validate();
}

json AppConfig::to_json() const {
  return {{"scene",
           {{"grid", grid},
            {"pick_objects", {pick_min, pick_max}},
            {"place_objects", {place_min, place_max}},
            {"stack_rate", stack_rate}}},
          {"train", train.to_json()},
          {"executor", executor.to_json()},
          {"models",
           {{"grounder", grounder_checkpoint.string()},
            {"placement", placement_checkpoint.string()}}},
          {"server",
           {{"host", host}, {"port", port}, {"threads", threads}, {"session_ttl_s", session_ttl_s}}},
          {"data_dir", data_dir.string()}};
}

AppConfig AppConfig::from_json(const json& j) {
  require_object(j, "config");
  AppConfig c;
  auto range = [](const json& v, const std::string& key, int& lo, int& hi) {
    if (v.is_number_integer()) {
      lo = hi = v.get<int>();
    } else if (v.is_array() && v.size() == 2) {
      lo = read<int>(v[0], key);
      hi = read<int>(v[1], key);
    } else {
      throw SchemaError("config key '" + key + "' must be an integer or [min, max]");
    }
  };
  for (const auto& [key, value] : j.items()) {
    if (key == "scene") {
      require_object(value, "scene");
      for (const auto& [k, v] : value.items()) {
        if (k == "grid") c.grid = read<int>(v, k);
        else if (k == "pick_objects") range(v, k, c.pick_min, c.pick_max);
        else if (k == "place_objects") range(v, k, c.place_min, c.place_max);
        else if (k == "stack_rate") c.stack_rate = read<double>(v, k);
        else throw SchemaError("unknown config key 'scene." + k + "'");
      }
    } else if (key == "train") {
      require_object(value, "train");
      try {
        c.train = TrainConfig::from_json(value);
      } catch (const InvalidArgument& e) {
        throw SchemaError(e.what());
      } catch (const json::exception& e) {
        throw SchemaError(std::string("train: ") + e.what());
      }
    } else if (key == "executor") {
      try {
        c.executor = ExecutorConfig::from_json(value);
      } catch (const json::exception& e) {
        throw SchemaError(std::string("executor: ") + e.what());
      }
    } else if (key == "models") {
      require_object(value, "models");
      for (const auto& [k, v] : value.items()) {
        if (k == "grounder") c.grounder_checkpoint = read<std::string>(v, k);
        else if (k == "placement") c.placement_checkpoint = read<std::string>(v, k);
        else throw SchemaError("unknown config key 'models." + k + "'");
      }
    } else if (key == "server") {
      require_object(value, "server");
      for (const auto& [k, v] : value.items()) {
        if (k == "host") c.host = read<std::string>(v, k);
        else if (k == "port") c.port = read<int>(v, k);
        else if (k == "threads") c.threads = read<int>(v, k);
        else if (k == "session_ttl_s") c.session_ttl_s = read<int>(v, k);
        else throw SchemaError("unknown config key 'server." + k + "'");
      }
    } else if (key == "data_dir") {
      c.data_dir = read<std::string>(value, key);
    } else {
      throw SchemaError("unknown config key '" + key + "'");
    }
  }
  c.validate();
  return c;
}

AppConfig AppConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
  return from_json(j);
}

SceneConfig AppConfig::scene_config(std::uint64_t seed) const {
  Rng rng(derive_seed(seed, 0x5ce7e));
  SceneConfig s;
  s.grid_h = s.grid_w = grid;
  s.n_pick = static_cast<int>(rng.uniform_int(pick_min, pick_max));
  s.n_place = static_cast<int>(rng.uniform_int(place_min, place_max));
  s.stack_rate = stack_rate;
  return s;
}

ModelBundle::ModelBundle() : models_(TaskModels::oracle()) {
  description_ = {{"grounder", "oracle"},
                  {"placement", "oracle"},
                  {"vocab_hash", hex64(models_.vocab.hash())}};
}

ModelBundle::ModelBundle(TaskModels models, json description)
    : models_(std::move(models)), description_(std::move(description)) {}

ModelBundle::ModelBundle(const AppConfig& config) : ModelBundle() {
  const bool g = !config.grounder_checkpoint.empty();
  const bool p = !config.placement_checkpoint.empty();
  if (g) grounder_ = std::make_unique<GroundingModel>(GroundingModel::load(config.grounder_checkpoint));
  if (p) placement_ = std::make_unique<PlacementNet>(PlacementNet::load(config.placement_checkpoint));
  models_ = TaskModels::oracle(config.executor.relation);
  if (g) {
    // The discarded maps of this view would refer to `unused`.
    static const PlacementNet unused;
    const TaskModels t = TaskModels::trained(*grounder_, unused, config.train.m1);
    models_.vocab = t.vocab;
    models_.comprehend = t.comprehend;
    models_.describe = t.describe;
  }
  if (p) {
    const PlacementNet& net = *placement_;
    models_.maps = [&net](const Scene& s, TableId t, int ref) { return learned_maps(s, t, ref, net); };
  }
  description_ = {{"grounder", g ? config.grounder_checkpoint.string() : "oracle"},
                  {"placement", p ? config.placement_checkpoint.string() : "oracle"},
                  {"vocab_hash", hex64(models_.vocab.hash())}};
}

}  // namespace tabletop
