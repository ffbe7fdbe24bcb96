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
#include "tabletop/service/server.hpp"

#include <iostream>
#include <random>

// After Eigen: <resolv.h> defines a _res macro.
#include <httplib.h>

namespace tabletop {

namespace {

json parse_body(const std::string& body, bool allow_empty) {
  if (body.empty() && allow_empty) return json::object();
  json j;
  try {
    j = json::parse(body);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("body is not JSON: ") + e.what());
  }
  if (!j.is_object()) throw SchemaError("body must be a JSON object");
  return j;
}

json action_body(const SystemAction& a, const Session& s) {
  json j = a.to_json();
  j["scene"] = to_json(s.scene());
  j["phase"] = std::string(to_string(s.state().phase));
  return j;
}

json error_body(std::string_view kind, const std::string& message) {
  return {{"error", std::string(kind)}, {"message", message}};
}

}  // namespace

Service::Service(AppConfig config, const ModelBundle& models, bool persist)
    : config_(std::move(config)),
      models_(&models),
      store_(std::chrono::seconds(config_.session_ttl_s),
             persist ? std::optional(config_.data_dir / "sessions") : std::nullopt),
      error_log_(&std::cerr) {
  config_.validate();
}

template <typename F>
Reply Service::guarded(F&& f) {
  try {
    return f();
  } catch (const SessionNotFound& e) {
    return {404, error_body("not_found", e.what())};
  } catch (const ObjectNotFound& e) {
    return {404, error_body("not_found", e.what())};
  } catch (const Conflict& e) {
    return {409, error_body("conflict", e.what())};
  } catch (const SchemaError& e) {
    return {422, error_body("invalid_body", e.what())};
  } catch (const InvalidArgument& e) {
    return {422, error_body("invalid_body", e.what())};
  } catch (const PlacementInfeasible& e) {
    return {422, error_body("invalid_body", e.what())};
  } catch (const json::exception& e) {
    return {422, error_body("invalid_body", e.what())};
  } catch (const std::exception& e) {
    const std::string id = new_session_id().substr(0, 16);
    if (error_log_) {
      std::lock_guard lock(error_mutex_);
      *error_log_ << "error " << id << ": " << e.what() << std::endl;
    }
    json b = error_body("internal", "internal error");
    b["error_id"] = id;
    return {500, b};
  }
}

Reply Service::create_session(const std::string& body) {
  return guarded([&] {
    const json j = parse_body(body, true);
    std::optional<std::uint64_t> seed;
    json overrides = json::object();
    for (const auto& [k, v] : j.items()) {
      if (k == "seed") {
        if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
          throw SchemaError("seed must be a non-negative integer");
        seed = v.get<std::uint64_t>();
      } else if (k == "scene_config") {
        if (!v.is_object()) throw SchemaError("scene_config must be an object");
        overrides = v;
      } else {
        throw SchemaError("unknown key '" + k + "'");
      }
    }
    if (!seed) {
      std::random_device rd;
      seed = (std::uint64_t(rd()) << 32) | rd();
    }
    json sc = config_.scene_config(*seed).to_json();
    for (const auto& [k, v] : overrides.items()) sc[k] = v;
    const SceneConfig scene_config = SceneConfig::from_json(sc);
    if (scene_config.n_pick < 1 || scene_config.n_pick > 12 || scene_config.n_place < 1 ||
        scene_config.n_place > 12)
      throw InvalidArgument("object counts must lie within [1, 12]");
    if (scene_config.grid_h < 16 || scene_config.grid_w < 16)
      throw InvalidArgument("grid must be at least 16 x 16");
    auto s = store_.create(*seed, scene_config, models_->models(), config_.executor,
                           models_->description());
    std::lock_guard lock(s->mutex());
    return Reply{200, {{"session_id", s->id()}, {"seed", s->seed()}, {"scene", to_json(s->scene())}}};
  });
}

Reply Service::get_scene(const std::string& id) {
  return guarded([&] {
    auto s = store_.get(id);
    std::lock_guard lock(s->mutex());
    s->touch();
    return Reply{200,
                 {{"session_id", s->id()},
                  {"scene", to_json(s->scene())},
                  {"phase", std::string(to_string(s->state().phase))}}};
  });
}

Reply Service::utterance(const std::string& id, const std::string& body, bool is_response) {
  return guarded([&] {
    auto s = store_.get(id);
    const json j = parse_body(body, false);
    for (const auto& [k, v] : j.items()) {
      if (k != "text") throw SchemaError("unknown key '" + k + "'");
    }
    if (!j.contains("text") || !j["text"].is_string()) throw SchemaError("text must be a string");
    const std::string text = j["text"].get<std::string>();
    if (text.find_first_not_of(" \t\r\n") == std::string::npos)
      throw SchemaError("text must not be blank");
    std::lock_guard lock(s->mutex());
    s->touch();
    const SystemAction a = is_response ? s->response(text) : s->instruction(text);
    return Reply{200, action_body(a, *s)};
  });
}

Reply Service::post_instruction(const std::string& id, const std::string& body) {
  return utterance(id, body, false);
}

Reply Service::post_response(const std::string& id, const std::string& body) {
  return utterance(id, body, true);
}

Reply Service::get_maps(const std::string& id, const std::string& relation,
                        const std::map<std::string, std::string>& query) {
  return guarded([&] {
    auto s = store_.get(id);
    const auto rel = parse_relation(relation);
    if (!rel) throw InvalidArgument("unknown relation '" + relation + "'");
    const auto it = query.find("ref");
    if (it == query.end()) throw InvalidArgument("query parameter ref is required");
    int ref = 0;
    std::size_t used = 0;
    try {
      ref = std::stoi(it->second, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != it->second.size()) throw InvalidArgument("ref must be an integer");
    std::lock_guard lock(s->mutex());
    s->touch();
    const auto& gripper = s->scene().gripper;
    if (gripper && gripper->id == ref)
      throw InvalidArgument("object " + std::to_string(ref) + " is held");
    const SceneObject* o = s->scene().find(ref);
    if (!o) throw ObjectNotFound("object " + std::to_string(ref));
    const ProbMaps maps = models_->models().maps(s->scene(), o->table, ref);
    return Reply{200,
                 {{"relation", std::string(to_string(*rel))},
                  {"ref", ref},
                  {"table", std::string(to_string(o->table))},
                  {"grid", maps.channel_json(*rel)}}};
  });
}

Reply Service::get_transcript(const std::string& id) {
  return guarded([&] {
    auto s = store_.get(id);
    std::lock_guard lock(s->mutex());
    s->touch();
    const json st = s->state().to_json();
    return Reply{200,
                 {{"session_id", s->id()},
                  {"transcript", st["transcript"]},
                  {"actions", st["actions"]},
                  {"phase", st["phase"]}}};
  });
}

Reply Service::healthz() {
  return guarded([&] {
    return Reply{200,
                 {{"status", "ok"}, {"sessions", store_.size()}, {"models", models_->description()}}};
  });
}

void Service::mount(httplib::Server& server) {
  const auto send = [](httplib::Response& res, const Reply& r) {
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json; charset=utf-8");
  };
  server.Post("/sessions", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, create_session(req.body));
  });
  server.Get(R"(/sessions/([0-9a-f]+)/scene)",
             [this, send](const httplib::Request& req, httplib::Response& res) {
               send(res, get_scene(req.matches[1]));
             });
  server.Post(R"(/sessions/([0-9a-f]+)/instruction)",
              [this, send](const httplib::Request& req, httplib::Response& res) {
                send(res, post_instruction(req.matches[1], req.body));
              });
  server.Post(R"(/sessions/([0-9a-f]+)/response)",
              [this, send](const httplib::Request& req, httplib::Response& res) {
                send(res, post_response(req.matches[1], req.body));
              });
  server.Get(R"(/sessions/([0-9a-f]+)/maps/([a-z_]+))",
             [this, send](const httplib::Request& req, httplib::Response& res) {
               std::map<std::string, std::string> q;
               for (const auto& [k, v] : req.params) q.emplace(k, v);
               send(res, get_maps(req.matches[1], req.matches[2], q));
             });
  server.Get(R"(/sessions/([0-9a-f]+)/transcript)",
             [this, send](const httplib::Request& req, httplib::Response& res) {
               send(res, get_transcript(req.matches[1]));
             });
  server.Get("/healthz", [this, send](const httplib::Request&, httplib::Response& res) {
    send(res, healthz());
  });
  server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (res.status == 404 && res.body.empty()) {
      res.set_content(error_body("not_found", "no such route").dump(),
                      "application/json; charset=utf-8");
    }
  });
  const int threads = config_.threads;
  server.new_task_queue = [threads] { return new httplib::ThreadPool(threads); };
}

void Service::serve(httplib::Server& server) {
  mount(server);
  if (!server.listen(config_.host, config_.port)) {
    throw Error("cannot listen on " + config_.host + ":" + std::to_string(config_.port));
  }
}

}  // namespace tabletop
