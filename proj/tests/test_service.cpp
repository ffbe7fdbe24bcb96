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
#include <gtest/gtest.h>

#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "tabletop/eval/benchmarks.hpp"
#include "tabletop/lang/grammar.hpp"
#include "tabletop/lang/vocabulary.hpp"
#include "tabletop/service/server.hpp"

// After Eigen: <resolv.h> defines a _res macro.
#include <httplib.h>

namespace tabletop {
namespace {

namespace fs = std::filesystem;

fs::path fresh_dir(const std::string& tag) {
  const fs::path p = fs::temp_directory_path() / ("tabletop_" + tag + "_" + new_session_id());
  fs::create_directories(p);
  return p;
}

AppConfig test_config(const fs::path& dir) {
  AppConfig c;
  c.data_dir = dir;
  c.threads = 4;
  return c;
}

/// Pick the first pick-table object, confirm every question, then put it to
/// the left of the first place-table object.
template <typename Send>
std::vector<json> scripted_user(const Scene& scene, Send&& send) {
  std::vector<json> replies;
  const auto pick = scene.on_table(TableId::pick);
  const auto place = scene.on_table(TableId::place);
  const int target = pick.front()->id;
  const std::string ref = detokenize(oracle_describe(scene, place.front()->id));
  json r = send("instruction", "pick up " + detokenize(oracle_describe(scene, target)));
  replies.push_back(r);
  for (int i = 0; i < 3 && r["action"] == "question"; ++i) {
    r = send("response", r["object_id"] == target ? "yes" : "no");
    replies.push_back(r);
  }
  replies.push_back(send("instruction", "put it to the left of " + ref));
  replies.push_back(send("instruction", "pick up the green teddy"));
  return replies;
}

TEST(AppConfigTest, DefaultsRoundTrip) {
  const AppConfig c;
  EXPECT_NO_THROW(c.validate());
  const AppConfig back = AppConfig::from_json(c.to_json());
  EXPECT_EQ(back.to_json(), c.to_json());
  EXPECT_DOUBLE_EQ(back.train.lambda1, 1.0);
  EXPECT_DOUBLE_EQ(back.train.lambda2, 1.0);
  EXPECT_EQ(back.session_ttl_s, 3600);
}

TEST(AppConfigTest, UnknownKeysRejectedAtEveryLevel) {
  EXPECT_THROW(AppConfig::from_json({{"colour", 1}}), SchemaError);
  EXPECT_THROW(AppConfig::from_json({{"scene", {{"gird", 64}}}}), SchemaError);
  EXPECT_THROW(AppConfig::from_json({{"server", {{"hots", "x"}}}}), SchemaError);
  EXPECT_THROW(AppConfig::from_json({{"models", {{"ground", "x"}}}}), SchemaError);
  EXPECT_THROW(AppConfig::from_json({{"train", {{"lambda9", 1}}}}), SchemaError);
  EXPECT_THROW(AppConfig::from_json({{"executor", {{"grasp", 1}}}}), SchemaError);
  EXPECT_THROW(AppConfig::from_json({{"server", {{"port", "eighty"}}}}), SchemaError);
  EXPECT_THROW(AppConfig::from_json(json::array()), SchemaError);
}

TEST(AppConfigTest, ValidationAndRanges) {
  EXPECT_THROW(AppConfig::from_json({{"scene", {{"grid", 8}}}}), InvalidArgument);
  EXPECT_THROW(AppConfig::from_json({{"scene", {{"pick_objects", {5, 13}}}}}), InvalidArgument);
  EXPECT_THROW(AppConfig::from_json({{"scene", {{"pick_objects", {6, 3}}}}}), InvalidArgument);
  EXPECT_THROW(AppConfig::from_json({{"executor", {{"grasp_p", 1.5}}}}), InvalidArgument);
  const AppConfig c = AppConfig::from_json({{"scene", {{"pick_objects", 6}, {"grid", 32}}},
                                            {"executor", {{"grasp_p", 0.744}}}});
  EXPECT_EQ(c.pick_min, 6);
  EXPECT_EQ(c.pick_max, 6);
  EXPECT_DOUBLE_EQ(c.executor.grasp_p, 0.744);
  const SceneConfig sc = c.scene_config(3);
  EXPECT_EQ(sc.n_pick, 6);
  EXPECT_EQ(sc.grid_w, 32);
}

TEST(AppConfigTest, SceneCountsStayInRange) {
  AppConfig c;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const SceneConfig sc = c.scene_config(seed);
    EXPECT_GE(sc.n_pick, c.pick_min);
    EXPECT_LE(sc.n_pick, c.pick_max);
    EXPECT_GE(sc.n_place, c.place_min);
    EXPECT_LE(sc.n_place, c.place_max);
  }
}

TEST(AppConfigTest, LoadFromFile) {
  const fs::path dir = fresh_dir("cfg");
  {
    std::ofstream(dir / "ok.json") << R"({"server": {"port": 9000}, "data_dir": "/tmp/x"})";
    std::ofstream(dir / "bad.json") << "{not json";
  }
  EXPECT_EQ(AppConfig::load(dir / "ok.json").port, 9000);
  EXPECT_THROW(AppConfig::load(dir / "bad.json"), SchemaError);
  EXPECT_THROW(AppConfig::load(dir / "missing.json"), InvalidArgument);
  fs::remove_all(dir);
}

TEST(AppConfigTest, MissingCheckpointFailsToLoad) {
  AppConfig c;
  c.grounder_checkpoint = "/nonexistent/model.ckpt";
  EXPECT_THROW(ModelBundle{c}, CheckpointError);
}

TEST(SessionIdTest, HexAndUnique) {
  std::set<std::string> ids;
  for (int i = 0; i < 1000; ++i) {
    const std::string id = new_session_id();
    ASSERT_EQ(id.size(), 32u);
    EXPECT_EQ(id.find_first_not_of("0123456789abcdef"), std::string::npos);
    ids.insert(id);
  }
  EXPECT_EQ(ids.size(), 1000u);
}

class ServiceTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = fresh_dir("svc");
    service = std::make_unique<Service>(test_config(dir), bundle);
  }
  void TearDown() override { fs::remove_all(dir); }

  std::string create(std::uint64_t seed, json scene_config = json::object()) {
    json body = {{"seed", seed}};
    if (!scene_config.empty()) body["scene_config"] = scene_config;
    const Reply r = service->create_session(body.dump());
    EXPECT_EQ(r.status, 200) << r.body.dump();
    return r.body.value("session_id", "");
  }
  Reply say(const std::string& id, const std::string& text, bool response = false) {
    const std::string body = json{{"text", text}}.dump();
    return response ? service->post_response(id, body) : service->post_instruction(id, body);
  }
  Scene scene_of(const std::string& id) {
    return scene_from_json(service->get_scene(id).body["scene"]);
  }

  fs::path dir;
  ModelBundle bundle;
  std::unique_ptr<Service> service;
};

TEST_F(ServiceTest, FixedSeedGivesIdenticalScenesAndDistinctIds) {
  const Reply a = service->create_session(R"({"seed": 42})");
  const Reply b = service->create_session(R"({"seed": 42})");
  ASSERT_EQ(a.status, 200);
  ASSERT_EQ(b.status, 200);
  EXPECT_NE(a.body["session_id"], b.body["session_id"]);
  EXPECT_EQ(a.body["scene"].dump(), b.body["scene"].dump());
  const Reply c = service->create_session(R"({"seed": 43})");
  EXPECT_NE(a.body["scene"].dump(), c.body["scene"].dump());
  EXPECT_EQ(service->sessions().size(), 3u);
}

TEST_F(ServiceTest, SceneConfigOverridesApply) {
  const std::string id = create(5, {{"n_pick", 9}, {"n_place", 3}});
  const Scene s = scene_of(id);
  EXPECT_EQ(s.on_table(TableId::pick).size(), 9u);
  EXPECT_EQ(s.on_table(TableId::place).size(), 3u);
}

TEST_F(ServiceTest, AmbiguousInstructionAsks) {
  const std::string id = create(7, {{"ambiguity", true}});
  const Scene s = scene_of(id);
  const Reply r = say(id, "pick up " + describe_object(*s.find(0)));
  ASSERT_EQ(r.status, 200) << r.body.dump();
  EXPECT_EQ(r.body["action"], "question");
  EXPECT_NE(r.body["detail"].get<std::string>().find("Do you mean"), std::string::npos);
  EXPECT_GE(r.body["candidates"].size(), 2u);
  EXPECT_EQ(r.body["phase"], "awaiting_confirmation");
  EXPECT_EQ(r.body["scene"].dump(), to_json(s).dump());
}

TEST_F(ServiceTest, InstructionWhileAwaitingIsConflict) {
  const std::string id = create(7, {{"ambiguity", true}});
  const Scene s = scene_of(id);
  ASSERT_EQ(say(id, "pick up " + describe_object(*s.find(0))).body["action"], "question");
  const Reply c = say(id, "pick up the blue ball");
  EXPECT_EQ(c.status, 409);
  EXPECT_EQ(c.body["error"], "conflict");
  // A bare answer is a response whichever endpoint carries it.
  const Reply y = say(id, "yes");
  ASSERT_EQ(y.status, 200);
  EXPECT_EQ(y.body["action"], "picked");
  EXPECT_EQ(y.body["phase"], "holding_object");
}

TEST_F(ServiceTest, CorrectionThroughResponse) {
  const std::string id = create(7, {{"ambiguity", true}});
  const Scene s = scene_of(id);
  ASSERT_EQ(say(id, "pick up " + describe_object(*s.find(0))).body["action"], "question");
  const Reply r = say(id, "no, " + describe_object(*s.find(0)), true);
  ASSERT_EQ(r.status, 200);
  EXPECT_EQ(r.body["action"], "question");
}

TEST_F(ServiceTest, ErrorCodes) {
  EXPECT_EQ(service->get_scene("0123abcd").status, 404);
  EXPECT_EQ(say("0123abcd", "pick up the ball").status, 404);
  EXPECT_EQ(service->get_transcript("ffff").status, 404);
  EXPECT_EQ(service->create_session("{oops").status, 422);
  EXPECT_EQ(service->create_session("[1, 2]").status, 422);
  EXPECT_EQ(service->create_session(R"({"seed": -3})").status, 422);
  EXPECT_EQ(service->create_session(R"({"seed": "x"})").status, 422);
  EXPECT_EQ(service->create_session(R"({"sede": 1})").status, 422);
  EXPECT_EQ(service->create_session(R"({"scene_config": {"n_pik": 3}})").status, 422);
  EXPECT_EQ(service->create_session(R"({"scene_config": {"n_pick": 13}})").status, 422);
  EXPECT_EQ(service->create_session(R"({"scene_config": {"grid_w": 8}})").status, 422);
  const std::string id = create(1);
  EXPECT_EQ(service->post_instruction(id, "not json").status, 422);
  EXPECT_EQ(service->post_instruction(id, R"({"txt": "hi"})").status, 422);
  EXPECT_EQ(service->post_instruction(id, R"({"text": 5})").status, 422);
  EXPECT_EQ(service->post_instruction(id, R"({"text": "  "})").status, 422);
  EXPECT_EQ(service->post_instruction(id, R"({"text": "a", "extra": 1})").status, 422);
  EXPECT_EQ(service->get_maps(id, "near", {{"ref", "0"}}).status, 422);
  EXPECT_EQ(service->get_maps(id, "left", {}).status, 422);
  EXPECT_EQ(service->get_maps(id, "left", {{"ref", "1x"}}).status, 422);
  EXPECT_EQ(service->get_maps(id, "left", {{"ref", "999"}}).status, 404);
  // Nothing was logged for rejected requests beyond the header.
  EXPECT_EQ(service->get_transcript(id).body["transcript"].size(), 0u);
}

TEST_F(ServiceTest, NoSessionIsCreatedWithoutASeedCollision) {
  const Reply a = service->create_session("");
  const Reply b = service->create_session("{}");
  ASSERT_EQ(a.status, 200);
  ASSERT_EQ(b.status, 200);
  EXPECT_NE(a.body["seed"], b.body["seed"]);
}

TEST_F(ServiceTest, MapsAreGridShapedAndBounded) {
  const std::string id = create(11);
  const Scene s = scene_of(id);
  for (const SceneObject* ref : s.on_table(TableId::place)) {
    for (const char* rel : {"left", "right", "in_front", "behind", "inside", "on_top"}) {
      const Reply r = service->get_maps(id, rel, {{"ref", std::to_string(ref->id)}});
      ASSERT_EQ(r.status, 200) << r.body.dump();
      const json& g = r.body["grid"];
      ASSERT_EQ(static_cast<int>(g.size()), s.place_table.h);
      for (const auto& row : g) {
        ASSERT_EQ(static_cast<int>(row.size()), s.place_table.w);
        for (const auto& v : row) {
          ASSERT_GE(v.get<double>(), 0.0);
          ASSERT_LE(v.get<double>(), 1.0);
        }
      }
    }
  }
}

TEST_F(ServiceTest, GetsNeverMutate) {
  const std::string id = create(13);
  const Scene s = scene_of(id);
  scripted_user(s, [&](const std::string& ep, const std::string& text) {
    return say(id, text, ep == "response").body;
  });
  const Scene before = scene_of(id);
  const auto log = *service->sessions().get(id)->log_path();
  const auto log_size = fs::file_size(log);
  const json transcript = service->get_transcript(id).body;
  for (int i = 0; i < 5; ++i) {
    service->get_scene(id);
    service->get_transcript(id);
    service->get_maps(id, "left", {{"ref", std::to_string(s.on_table(TableId::place)[0]->id)}});
    service->healthz();
  }
  EXPECT_EQ(scene_hash(scene_of(id)), scene_hash(before));
  EXPECT_EQ(service->get_transcript(id).body, transcript);
  EXPECT_EQ(fs::file_size(log), log_size);
}

TEST_F(ServiceTest, EveryTransitionIsLoggedBeforeTheReply) {
  const std::string id = create(17);
  const Scene s = scene_of(id);
  const auto log = *service->sessions().get(id)->log_path();
  long steps = 0;
  scripted_user(s, [&](const std::string& ep, const std::string& text) {
    const Reply r = say(id, text, ep == "response");
    ++steps;
    std::ifstream in(log);
    std::string line, last;
    while (std::getline(in, line)) last = line;
    const json j = json::parse(last);
    EXPECT_EQ(j["type"], "step");
    EXPECT_EQ(j["index"], steps - 1);
    EXPECT_EQ(j["text"], text);
    EXPECT_EQ(j["endpoint"], ep);
    json expected = r.body;
    expected.erase("scene");
    expected.erase("phase");
    EXPECT_EQ(j["response"], expected);
    EXPECT_EQ(j["scene"], r.body["scene"]);
    return r.body;
  });
  const json t = service->get_transcript(id).body;
  EXPECT_EQ(static_cast<long>(t["transcript"].size()), 2 * steps);
}

TEST_F(ServiceTest, SessionLogFeedsTheStudyTable) {
  const std::string id = create(23, {{"ambiguity", true}});
  const Scene s = scene_of(id);
  scripted_user(s, [&](const std::string& ep, const std::string& text) {
    return say(id, text, ep == "response").body;
  });
  std::ifstream in(*service->sessions().get(id)->log_path());
  std::vector<std::string> lines;
  long attempts = 0, successes = 0, places = 0;
  for (std::string line; std::getline(in, line);) {
    lines.push_back(line);
    const json j = json::parse(line);
    if (j["type"] != "record") continue;
    if (j["kind"] == "pick_attempt") {
      ++attempts;
      successes += j["payload"]["success"].get<bool>() ? 1 : 0;
    }
    if (j["kind"] == "place") ++places;
  }
  const Table2Report r = table2_report(lines);
  EXPECT_EQ(r.malformed, 0);
  EXPECT_EQ(r.lines, static_cast<long>(lines.size()));
  EXPECT_EQ(r.metrics.grasping, (Ratio{successes, attempts}));
  EXPECT_EQ(r.metrics.actions, attempts + places);
  EXPECT_GE(attempts, 1);
}

TEST_F(ServiceTest, ReplayReproducesTheFinalScene) {
  const std::string id = create(19, {{"ambiguity", true}});
  const Scene s = scene_of(id);
  scripted_user(s, [&](const std::string& ep, const std::string& text) {
    return say(id, text, ep == "response").body;
  });
  const auto session = service->sessions().get(id);
  const ReplayResult r = replay_log(*session->log_path(), bundle.models());
  EXPECT_TRUE(r.verified) << r.mismatch;
  EXPECT_EQ(r.session_id, id);
  EXPECT_EQ(r.steps, session->utterances());
  EXPECT_EQ(serialize(r.scene), serialize(session->scene()));
  EXPECT_EQ(r.state.to_json(), session->state().to_json());
  EXPECT_EQ(r.torn_lines, 0);
}

TEST_F(ServiceTest, ReplayDetectsTampering) {
  const std::string id = create(23);
  const Scene s = scene_of(id);
  scripted_user(s, [&](const std::string& ep, const std::string& text) {
    return say(id, text, ep == "response").body;
  });
  std::ifstream in(*service->sessions().get(id)->log_path());
  std::stringstream out;
  std::string line;
  bool changed = false;
  while (std::getline(in, line)) {
    json j = json::parse(line);
    if (!changed && j["type"] == "step") {
      j["text"] = "pick up the green teddy";
      changed = true;
    }
    out << j.dump() << "\n";
  }
  const ReplayResult r = replay_log(out, bundle.models());
  EXPECT_FALSE(r.verified);
  EXPECT_NE(r.mismatch.find("step 0"), std::string::npos);
}

TEST_F(ServiceTest, ReplayRejectsGarbage) {
  std::stringstream empty;
  EXPECT_THROW(replay_log(empty, bundle.models()), SchemaError);
  std::stringstream headless(R"({"type": "step"})" "\n");
  EXPECT_THROW(replay_log(headless, bundle.models()), SchemaError);
  std::stringstream corrupt(R"({"type": "session"})" "\n{garbage\n" R"({"type": "x"})" "\n");
  EXPECT_THROW(replay_log(corrupt, bundle.models()), SchemaError);
}

TEST_F(ServiceTest, CrashRecoveryFromTornLog) {
  const std::string id = create(29, {{"ambiguity", true}});
  const Scene s0 = scene_of(id);
  const Reply first = say(id, "pick up " + describe_object(*s0.find(0)));
  ASSERT_EQ(first.body["action"], "question");
  const auto live = service->sessions().get(id);
  const fs::path log = *live->log_path();
  const json state_before = live->state().to_json();
  const std::string scene_before = serialize(live->scene());
  // A write torn by the crash.
  { std::ofstream(log, std::ios::app) << R"({"type": "record", "kind": "pick_a)"; }

  Service restarted(test_config(dir), bundle);
  EXPECT_EQ(restarted.sessions().recover_all(bundle.models()), 1u);
  const auto back = restarted.sessions().get(id);
  EXPECT_EQ(serialize(back->scene()), scene_before);
  EXPECT_EQ(back->state().to_json(), state_before);
  EXPECT_EQ(back->state().phase, Phase::awaiting_confirmation);

  // The session continues where it stopped, and its log stays replayable.
  const Reply y = restarted.post_response(id, R"({"text": "yes"})");
  ASSERT_EQ(y.status, 200);
  EXPECT_EQ(y.body["action"], "picked");
  const ReplayResult r = replay_log(log, bundle.models());
  EXPECT_TRUE(r.verified) << r.mismatch;
  EXPECT_EQ(r.steps, 2);
  EXPECT_EQ(r.torn_lines, 0);
}

TEST(SessionStoreTest, IdleSessionsExpire) {
  ModelBundle bundle;
  SessionStore store(std::chrono::seconds(60), std::nullopt);
  const auto a = store.create(1, SceneConfig{}, bundle.models(), {}, json::object());
  const auto b = store.create(2, SceneConfig{}, bundle.models(), {}, json::object());
  EXPECT_EQ(store.size(), 2u);
  EXPECT_EQ(store.expire(Session::Clock::now() + std::chrono::seconds(30)), 0u);
  {
    // A session in use is not idle.
    std::lock_guard busy(b->mutex());
    EXPECT_EQ(store.expire(Session::Clock::now() + std::chrono::seconds(61)), 1u);
  }
  EXPECT_THROW(store.get(a->id()), SessionNotFound);
  EXPECT_NO_THROW(store.get(b->id()));
  EXPECT_EQ(store.expire(Session::Clock::now() + std::chrono::seconds(61)), 1u);
  EXPECT_EQ(store.size(), 0u);
}

TEST(ServiceErrorTest, InternalFailureHasErrorId) {
  TaskModels models = TaskModels::oracle();
  models.comprehend = [](const Scene&, TableId, const std::vector<ObjectCandidate>&,
                         std::span<const int>) -> MatchResult {
    throw std::logic_error("model exploded");
  };
  ModelBundle bundle(models, {{"grounder", "broken"}});
  const fs::path dir = fresh_dir("err");
  Service service(test_config(dir), bundle);
  std::ostringstream errors;
  service.set_error_log(&errors);
  const std::string id = service.create_session(R"({"seed": 3})").body["session_id"];
  const Reply r = service.post_instruction(id, R"({"text": "pick up the red cup"})");
  EXPECT_EQ(r.status, 500);
  const std::string eid = r.body["error_id"];
  EXPECT_EQ(eid.size(), 16u);
  EXPECT_NE(errors.str().find(eid), std::string::npos);
  EXPECT_NE(errors.str().find("model exploded"), std::string::npos);
  fs::remove_all(dir);
}

class HttpTest : public ServiceTest {
 protected:
  void SetUp() override {
    ServiceTest::SetUp();
    service->mount(server);
    port = server.bind_to_any_port("127.0.0.1");
    ASSERT_GT(port, 0);
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  void TearDown() override {
    server.stop();
    thread.join();
    ServiceTest::TearDown();
  }
  httplib::Client client() {
    httplib::Client c("127.0.0.1", port);
    c.set_read_timeout(30, 0);
    return c;
  }

  httplib::Server server;
  std::thread thread;
  int port = 0;
};

TEST_F(HttpTest, EndpointsOverTheWire) {
  auto c = client();
  const auto h = c.Get("/healthz");
  ASSERT_TRUE(h);
  EXPECT_EQ(h->status, 200);
  EXPECT_EQ(json::parse(h->body)["status"], "ok");
  EXPECT_NE(h->get_header_value("Content-Type").find("application/json"), std::string::npos);

  const auto created = c.Post("/sessions", R"({"seed": 7, "scene_config": {"ambiguity": true}})",
                              "application/json");
  ASSERT_TRUE(created);
  ASSERT_EQ(created->status, 200);
  const json cj = json::parse(created->body);
  const std::string id = cj["session_id"];
  const Scene s = scene_from_json(cj["scene"]);

  const auto q = c.Post("/sessions/" + id + "/instruction",
                        json{{"text", "pick up " + describe_object(*s.find(0))}}.dump(),
                        "application/json");
  ASSERT_TRUE(q);
  EXPECT_EQ(q->status, 200);
  EXPECT_EQ(json::parse(q->body)["action"], "question");
  const auto conflict = c.Post("/sessions/" + id + "/instruction",
                               R"({"text": "pick up the ball"})", "application/json");
  EXPECT_EQ(conflict->status, 409);
  const auto yes = c.Post("/sessions/" + id + "/response", R"({"text": "yes"})", "application/json");
  EXPECT_EQ(json::parse(yes->body)["action"], "picked");

  const int ref = s.on_table(TableId::place)[0]->id;
  const auto m = c.Get("/sessions/" + id + "/maps/left?ref=" + std::to_string(ref));
  ASSERT_EQ(m->status, 200);
  EXPECT_EQ(static_cast<int>(json::parse(m->body)["grid"].size()), s.place_table.h);
  const auto t = c.Get("/sessions/" + id + "/transcript");
  EXPECT_EQ(json::parse(t->body)["transcript"].size(), 4u);
  EXPECT_EQ(c.Get("/sessions/" + id + "/scene")->status, 200);

  EXPECT_EQ(c.Get("/sessions/00ff/scene")->status, 404);
  EXPECT_EQ(c.Get("/nowhere")->status, 404);
  EXPECT_EQ(c.Post("/sessions", "{bad", "application/json")->status, 422);
}

TEST_F(HttpTest, ConcurrentSessionsMatchSequentialRuns) {
  constexpr int kSessions = 8;
  // Sequential reference in memory.
  std::vector<json> expected(kSessions);
  for (int i = 0; i < kSessions; ++i) {
    Session ref("ref", 100 + i, service->config().scene_config(100 + i), bundle.models(),
                service->config().executor, json::object(), std::nullopt);
    scripted_user(ref.scene(), [&](const std::string& ep, const std::string& text) {
      const SystemAction a = ep == "response" ? ref.response(text) : ref.instruction(text);
      return a.to_json();
    });
    expected[i] = ref.state().to_json();
    int places = 0;
    for (const auto& a : expected[i]["actions"]) places += a["kind"] == "place";
    EXPECT_EQ(places, 1) << "session " << i;
  }

  std::vector<std::string> ids(kSessions);
  std::vector<std::thread> workers;
  std::atomic<int> failures{0};
  for (int i = 0; i < kSessions; ++i) {
    workers.emplace_back([&, i] {
      auto c = client();
      const auto r = c.Post("/sessions", json{{"seed", 100 + i}}.dump(), "application/json");
      if (!r || r->status != 200) {
        ++failures;
        return;
      }
      const json cj = json::parse(r->body);
      ids[i] = cj["session_id"];
      scripted_user(scene_from_json(cj["scene"]), [&](const std::string& ep, const std::string& text) {
        const auto res = c.Post("/sessions/" + ids[i] + "/" + ep, json{{"text", text}}.dump(),
                                "application/json");
        if (!res || res->status != 200) {
          ++failures;
          return json{{"action", "error"}};
        }
        return json::parse(res->body);
      });
    });
  }
  for (auto& w : workers) w.join();
  ASSERT_EQ(failures.load(), 0);
  for (int i = 0; i < kSessions; ++i) {
    const auto s = service->sessions().get(ids[i]);
    std::lock_guard lock(s->mutex());
    EXPECT_EQ(s->state().to_json(), expected[i]) << "session " << i;
  }
}

}  // namespace
}  // namespace tabletop
