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

#include <atomic>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <mutex>
#include <string>

#include "tabletop/service/config.hpp"
#include "tabletop/service/session.hpp"

namespace httplib {
class Server;
}

namespace tabletop {

/// Status code and JSON body of one API call.
struct Reply {
  int status = 200;
  json body;
};

/// The session API over HTTP. Handlers are plain member functions so they
/// can be exercised without a socket; mount() binds them to routes.
class Service {
 public:
  /// `models` must outlive the service. Sessions are logged under
  /// config.data_dir/sessions unless `persist` is false.
  Service(AppConfig config, const ModelBundle& models, bool persist = true);

  Reply create_session(const std::string& body);
  Reply get_scene(const std::string& id);
  Reply post_instruction(const std::string& id, const std::string& body);
  Reply post_response(const std::string& id, const std::string& body);
  Reply get_maps(const std::string& id, const std::string& relation,
                 const std::map<std::string, std::string>& query);
  Reply get_transcript(const std::string& id);
  Reply healthz();

  void mount(httplib::Server& server);
  /// Binds config.host:config.port and blocks until `server.stop()`.
  void serve(httplib::Server& server);

  SessionStore& sessions() { return store_; }
  const AppConfig& config() const { return config_; }
  /// Where 500 replies are described by error id (null when not persisted).
  void set_error_log(std::ostream* out) { error_log_ = out; }

 private:
  template <typename F>
  Reply guarded(F&& f);
  Reply utterance(const std::string& id, const std::string& body, bool is_response);

  AppConfig config_;
  const ModelBundle* models_;
  SessionStore store_;
  std::ostream* error_log_;
  std::mutex error_mutex_;
};

}  // namespace tabletop
