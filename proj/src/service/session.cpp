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
#include "tabletop/service/session.hpp"

#include <cstdio>
#include <istream>
#include <random>
#include <sstream>

#include "tabletop/common/rng.hpp"

namespace tabletop {

namespace {

json header_line(const std::string& id, std::uint64_t seed, const SceneConfig& sc,
                 const ExecutorConfig& ex, const json& models, const Scene& scene) {
  return {{"type", "session"},   {"version", kSessionLogVersion},
          {"session_id", id},    {"seed", seed},
          {"scene_config", sc.to_json()}, {"executor", ex.to_json()},
          {"models", models},    {"scene", to_json(scene)}};
}

json step_line(long index, std::string_view endpoint, std::string_view text, std::uint64_t seed,
               const SystemAction& a, const DialogueState& st, const Scene& scene) {
  return {{"type", "step"},
          {"index", index},
          {"endpoint", std::string(endpoint)},
          {"text", std::string(text)},
          {"seed", seed},
          {"response", a.to_json()},
          {"phase", std::string(to_string(st.phase))},
          {"scene", to_json(scene)}};
}

json record_line(const ActionRecord& r) {
  json j = r.to_json();
  j["type"] = "record";
  return j;
}

}  // namespace

std::string new_session_id() {
  static std::mutex m;
  static std::random_device rd;
  std::lock_guard lock(m);
  std::string out;
  for (int i = 0; i < 4; ++i) {
    char buf[9];
    std::snprintf(buf, sizeof buf, "%08x", static_cast<unsigned>(rd()));
    out += buf;
  }
  return out;
}

std::uint64_t utterance_seed(std::uint64_t session_seed, long index) {
  return derive_seed(session_seed, 1000 + static_cast<std::uint64_t>(index));
}

Session::Session(std::string id, std::uint64_t seed, const SceneConfig& scene_config,
                 const TaskModels& models, const ExecutorConfig& executor, const json& model_info,
                 const std::optional<std::filesystem::path>& log_dir)
    : id_(std::move(id)),
      seed_(seed),
      models_(&models),
      executor_(executor),
      scene_(generate_scene(scene_config, seed)),
      created_at_(std::chrono::system_clock::now()),
      last_used_(Clock::now()) {
  executor_.validate();
  if (log_dir) {
    std::filesystem::create_directories(*log_dir);
    log_path_ = *log_dir / (id_ + ".jsonl");
    log_.open(*log_path_, std::ios::binary | std::ios::trunc);
    if (!log_) throw Error("cannot open session log " + log_path_->string());
  }
  append(header_line(id_, seed_, scene_config, executor_, model_info, scene_).dump() + "\n");
}

std::unique_ptr<Session> Session::recover(const std::filesystem::path& log_path,
                                          const TaskModels& models) {
  ReplayResult r = replay_log(log_path, models);
  if (!r.verified) throw Error("session log " + log_path.string() + " diverges: " + r.mismatch);
  if (r.torn_lines > 0) std::filesystem::resize_file(log_path, r.valid_bytes);

  std::unique_ptr<Session> s(new Session(models));
  s->id_ = r.session_id;
  s->seed_ = r.seed;
  s->executor_ = r.executor;
  s->scene_ = std::move(r.scene);
  s->state_ = std::move(r.state);
  s->index_ = r.steps;
  s->log_path_ = log_path;
  s->created_at_ = std::chrono::system_clock::now();
  s->last_used_ = Clock::now();
  s->log_.open(log_path, std::ios::binary | std::ios::app);
  if (!s->log_) throw Error("cannot open session log " + log_path.string());
  return s;
}

SystemAction Session::instruction(std::string_view text) {
  if (state_.phase == Phase::awaiting_confirmation && !is_yes_no(text)) {
    throw Conflict("a question is awaiting a yes/no answer; send corrections as a response");
  }
  return advance("instruction", text);
}

SystemAction Session::response(std::string_view text) { return advance("response", text); }

SystemAction Session::advance(std::string_view endpoint, std::string_view text) {
  const std::uint64_t seed = utterance_seed(seed_, index_);
  const std::size_t before = state_.actions.size();
  SystemAction a = step(state_, scene_, text, *models_, executor_, seed);
  std::string lines;
  for (std::size_t i = before; i < state_.actions.size(); ++i) {
    lines += record_line(state_.actions[i]).dump() + "\n";
  }
  lines += step_line(index_, endpoint, text, seed, a, state_, scene_).dump() + "\n";
  ++index_;
  append(lines);
  return a;
}

void Session::append(const std::string& lines) {
  if (!log_.is_open()) return;
  log_ << lines;
  log_.flush();
  if (!log_) throw Error("write to session log " + log_path_->string() + " failed");
}

ReplayResult replay_log(std::istream& in, const TaskModels& models) {
  ReplayResult r;
  std::vector<json> lines;
  std::string line;
  std::uintmax_t offset = 0;
  while (std::getline(in, line)) {
    const bool terminated = !in.eof();
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error&) {
      if (terminated) throw SchemaError("corrupt line " + std::to_string(lines.size() + 1));
      ++r.torn_lines;
      break;
    }
    if (!terminated) {
      ++r.torn_lines;
      break;
    }
    offset += line.size() + 1;
    lines.push_back(std::move(j));
  }
  r.valid_bytes = offset;
  if (lines.empty() || lines[0].value("type", "") != "session") {
    throw SchemaError("session log must start with a session line");
  }
  const json& h = lines[0];
  try {
    if (h.at("version").get<int>() != kSessionLogVersion) {
      throw SchemaError("unsupported session log version " + h.at("version").dump());
    }
    r.session_id = h.at("session_id").get<std::string>();
    r.seed = h.at("seed").get<std::uint64_t>();
    r.executor = ExecutorConfig::from_json(h.at("executor"));
    const SceneConfig sc = SceneConfig::from_json(h.at("scene_config"));
    r.scene = generate_scene(sc, r.seed);
    if (to_json(r.scene) != h.at("scene")) {
      r.mismatch = "generated scene differs from the logged initial scene";
      return r;
    }
  } catch (const json::exception& e) {
    throw SchemaError(std::string("session header: ") + e.what());
  }

  std::vector<json> pending;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const json& j = lines[i];
    const std::string type = j.value("type", "");
    if (type == "record") {
      pending.push_back(j);
      continue;
    }
    if (type != "step") throw SchemaError("unknown line type '" + type + "'");
    std::string text;
    std::uint64_t seed = 0;
    long index = 0;
    try {
      text = j.at("text").get<std::string>();
      seed = j.at("seed").get<std::uint64_t>();
      index = j.at("index").get<long>();
    } catch (const json::exception& e) {
      throw SchemaError(std::string("step line: ") + e.what());
    }
    const auto fail = [&](const std::string& what) {
      r.mismatch = "step " + std::to_string(index) + ": " + what;
      return r;
    };
    if (index != r.steps) return fail("out of order");
    if (seed != utterance_seed(r.seed, index)) return fail("seed does not follow the session seed");
    const std::size_t before = r.state.actions.size();
    const SystemAction a = step(r.state, r.scene, text, models, r.executor, seed);
    ++r.steps;
    if (a.to_json() != j.value("response", json())) return fail("response differs");
    if (r.state.actions.size() - before != pending.size()) return fail("record count differs");
    for (std::size_t k = 0; k < pending.size(); ++k) {
      if (record_line(r.state.actions[before + k]) != pending[k]) return fail("record differs");
    }
    pending.clear();
    if (serialize(r.scene) != j.value("scene", json()).dump()) return fail("scene differs");
  }
  r.verified = true;
  return r;
}

ReplayResult replay_log(const std::filesystem::path& path, const TaskModels& models) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open session log " + path.string());
  return replay_log(in, models);
}

std::shared_ptr<Session> SessionStore::create(std::uint64_t seed, const SceneConfig& scene_config,
                                              const TaskModels& models,
                                              const ExecutorConfig& executor,
                                              const json& model_info) {
  expire();
  std::string id;
  {
    std::lock_guard lock(mutex_);
    do {
      id = new_session_id();
    } while (sessions_.count(id) > 0);
  }
  auto s = std::make_shared<Session>(id, seed, scene_config, models, executor, model_info, log_dir_);
  insert(s);
  return s;
}

void SessionStore::insert(std::shared_ptr<Session> session) {
  std::lock_guard lock(mutex_);
  const std::string id = session->id();
  if (!sessions_.emplace(id, std::move(session)).second) {
    throw InvalidArgument("duplicate session id " + id);
  }
}

std::shared_ptr<Session> SessionStore::get(const std::string& id) {
  expire();
  std::lock_guard lock(mutex_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw SessionNotFound(id);
  return it->second;
}

std::size_t SessionStore::expire(Session::Clock::time_point now) {
  std::lock_guard lock(mutex_);
  std::size_t n = 0;
  for (auto it = sessions_.begin(); it != sessions_.end();) {
    // A busy session is in use, not idle.
    std::unique_lock busy(it->second->mutex(), std::try_to_lock);
    if (busy.owns_lock() && now - it->second->last_used() > ttl_) {
      busy.unlock();
      it = sessions_.erase(it);
      ++n;
    } else {
      ++it;
    }
  }
  return n;
}

std::size_t SessionStore::size() const {
  std::lock_guard lock(mutex_);
  return sessions_.size();
}

std::size_t SessionStore::recover_all(const TaskModels& models) {
  if (!log_dir_ || !std::filesystem::is_directory(*log_dir_)) return 0;
  std::vector<std::filesystem::path> logs;
  for (const auto& e : std::filesystem::directory_iterator(*log_dir_)) {
    if (e.is_regular_file() && e.path().extension() == ".jsonl") logs.push_back(e.path());
  }
  std::sort(logs.begin(), logs.end());
  const auto cutoff = std::filesystem::file_time_type::clock::now() - ttl_;
  std::size_t n = 0;
  for (const auto& p : logs) {
    if (std::filesystem::last_write_time(p) < cutoff) continue;
    insert(Session::recover(p, models));
    ++n;
  }
  return n;
}

}  // namespace tabletop
