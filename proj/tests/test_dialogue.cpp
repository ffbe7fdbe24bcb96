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

#include "tabletop/common/error.hpp"
#include "tabletop/common/rng.hpp"
#include "tabletop/dialogue/task.hpp"
#include "tabletop/lang/dataset.hpp"
#include "tabletop/lang/grammar.hpp"
#include "tabletop/lang/lexicon.hpp"

namespace tabletop {
namespace {

SceneObject make(int id, Category c, Color col, Size s, Cell at, TableId t = TableId::pick) {
  SceneObject o;
  o.id = id;
  o.category = c;
  o.color = col;
  o.size = s;
  o.center = at;
  o.table = t;
  return o;
}

Scene two_red_cups() {
  Scene s;
  s.objects = {make(0, Category::cup, Color::red, Size::small, {10, 10}),
               make(1, Category::cup, Color::red, Size::small, {40, 12}),
               make(2, Category::ball, Color::blue, Size::small, {25, 40}),
               make(3, Category::box, Color::green, Size::medium, {32, 32}, TableId::place),
               make(4, Category::plate, Color::white, Size::medium, {12, 50}, TableId::place)};
  s.next_id = 5;
  return s;
}

std::size_t count(const DialogueState& st, ActionKind k) {
  return std::count_if(st.actions.begin(), st.actions.end(),
                       [k](const ActionRecord& a) { return a.kind == k; });
}

class DialogueTest : public ::testing::Test {
 protected:
  SystemAction say(const std::string& text, std::uint64_t seed = 1) {
    return step(state, scene, text, models, cfg, seed);
  }
  Scene scene = two_red_cups();
  DialogueState state;
  TaskModels models = TaskModels::oracle();
  ExecutorConfig cfg;
};

TEST_F(DialogueTest, UnambiguousPickHasNoQuestion) {
  scene.objects[2].color = Color::yellow;
  const auto a = say("fetch the yellow thing");
  EXPECT_EQ(a.kind, SystemActionKind::picked);
  EXPECT_EQ(a.object_id, 2);
  EXPECT_EQ(count(state, ActionKind::question), 0u);
  EXPECT_EQ(count(state, ActionKind::pick_attempt), 1u);
  EXPECT_EQ(state.phase, Phase::holding_object);
  ASSERT_TRUE(scene.gripper);
  EXPECT_EQ(scene.gripper->id, 2);
}

TEST_F(DialogueTest, AmbiguousPickAsksDiscriminativeQuestion) {
  const auto a = say("pick up the red cup");
  ASSERT_EQ(a.kind, SystemActionKind::question);
  EXPECT_NE(a.text.find("Do you mean"), std::string::npos);
  EXPECT_EQ(state.transcript.size(), 2u);
  EXPECT_EQ(state.phase, Phase::awaiting_confirmation);
  EXPECT_EQ(state.candidate_queue, (std::vector<int>{0, 1}));
  EXPECT_EQ(count(state, ActionKind::pick_attempt), 0u);
  // the asked expression picks out the queue head alone
  auto words = tokenize(a.text);
  words.erase(words.begin(), words.begin() + 3);
  const auto sem = parse_expression(words);
  ASSERT_TRUE(sem);
  EXPECT_EQ(denotation(*sem, scene, TableId::pick), (std::vector<int>{a.object_id}));
  EXPECT_EQ(a.object_id, 0);
  EXPECT_EQ(a.candidates.size(), 3u);
}

TEST_F(DialogueTest, YesConfirmsQueueHead) {
  say("pick up the red cup");
  const auto a = say("yes", 2);
  EXPECT_EQ(a.kind, SystemActionKind::picked);
  EXPECT_EQ(state.confirmed_target, 0);
  EXPECT_EQ(scene.gripper->id, 0);
  EXPECT_TRUE(state.candidate_queue.empty());
}

TEST_F(DialogueTest, NoIteratesThenApologizes) {
  say("pick up the red cup");
  auto a = say("no", 2);
  ASSERT_EQ(a.kind, SystemActionKind::question);
  EXPECT_EQ(a.object_id, 1);
  a = say("nope", 3);
  EXPECT_EQ(a.kind, SystemActionKind::error);
  EXPECT_NE(a.text.find("Sorry"), std::string::npos);
  EXPECT_EQ(state.phase, Phase::idle);
  EXPECT_TRUE(state.candidate_queue.empty());
  EXPECT_EQ(state.questions_this_instruction, 2);  // bounded by the ambiguous set
  EXPECT_EQ(count(state, ActionKind::pick_attempt), 0u);
  EXPECT_FALSE(scene.gripper);
}

TEST_F(DialogueTest, CorrectionRegroundsFullCandidateSet) {
  say("pick up the red cup");
  const auto a = say("no, the blue ball", 2);
  EXPECT_EQ(a.kind, SystemActionKind::picked);
  EXPECT_EQ(a.object_id, 2);  // outside the ambiguous subset
}

TEST_F(DialogueTest, CorrectionCanStillBeAmbiguous) {
  say("pick up the red cup");
  auto a = say("the cup", 2);
  EXPECT_EQ(a.kind, SystemActionKind::question);
  EXPECT_EQ(state.candidate_queue.size(), 2u);
  a = say("the rightmost cup", 3);
  EXPECT_EQ(a.kind, SystemActionKind::picked);
  EXPECT_EQ(a.object_id, 1);
}

TEST_F(DialogueTest, PlaceFlowWithRelationSpotting) {
  say("grab the blue ball");
  const auto a = say("put it to the left of the green box", 2);
  ASSERT_EQ(a.kind, SystemActionKind::placed);
  EXPECT_FALSE(scene.gripper);
  EXPECT_EQ(state.phase, Phase::idle);
  const auto& rec = state.actions.back();
  ASSERT_EQ(rec.kind, ActionKind::place);
  EXPECT_EQ(rec.payload["ref"], 3);
  EXPECT_EQ(rec.payload["relation"], "left");
  EXPECT_TRUE(rec.payload["satisfied"].get<bool>());
  const SceneObject* placed = scene.find(2);
  ASSERT_TRUE(placed);
  EXPECT_EQ(placed->table, TableId::place);
}

TEST_F(DialogueTest, AmbiguousReferenceOnPlaceTable) {
  scene.objects.push_back(make(5, Category::box, Color::green, Size::medium, {50, 12}, TableId::place));
  scene.next_id = 6;
  say("take the ball");
  auto a = say("place it inside the green box", 2);
  ASSERT_EQ(a.kind, SystemActionKind::question);
  EXPECT_EQ(state.phase, Phase::awaiting_confirmation);
  EXPECT_TRUE(scene.gripper);
  a = say("no", 3);
  ASSERT_EQ(a.kind, SystemActionKind::question);
  const int ref = a.object_id;
  a = say("yes", 4);
  ASSERT_EQ(a.kind, SystemActionKind::placed);
  EXPECT_EQ(state.actions.back().payload["ref"], ref);
  EXPECT_EQ(state.actions.back().payload["outcome"], "inside");
}

TEST_F(DialogueTest, MissingRelationAsksWhere) {
  say("grab the blue ball");
  auto a = say("put it down", 2);
  EXPECT_EQ(a.kind, SystemActionKind::question);
  EXPECT_EQ(a.text, "Where should I place it?");
  EXPECT_EQ(state.phase, Phase::holding_object);
  a = say("on top of the plate", 3);
  EXPECT_EQ(a.kind, SystemActionKind::placed);
  EXPECT_EQ(state.actions.back().payload["relation"], "on_top");
}

TEST_F(DialogueTest, NothingHeldAndIneligibleRelation) {
  auto a = say("put it left of the green box");
  EXPECT_EQ(a.kind, SystemActionKind::error);
  EXPECT_NE(a.text.find("not holding"), std::string::npos);
  say("grab the blue ball", 2);
  a = say("put it inside the plate", 3);
  EXPECT_EQ(a.kind, SystemActionKind::error);
  EXPECT_TRUE(scene.gripper);
  EXPECT_EQ(state.phase, Phase::holding_object);
  a = say("fetch the red cup", 4);
  EXPECT_EQ(a.kind, SystemActionKind::error);
  EXPECT_NE(a.text.find("already holding"), std::string::npos);
}

TEST_F(DialogueTest, GraspRetriesUpToCap) {
  cfg.grasp_p = 0.0;
  const auto a = say("grab the blue ball");
  EXPECT_EQ(a.kind, SystemActionKind::error);
  EXPECT_EQ(count(state, ActionKind::pick_attempt), 5u);
  EXPECT_EQ(count(state, ActionKind::regrasp), 4u);
  EXPECT_EQ(state.phase, Phase::idle);
  EXPECT_FALSE(scene.gripper);
}

TEST_F(DialogueTest, TranscriptHasEveryTurnOnce) {
  const std::vector<std::string> turns = {"pick up the red cup", "no", "yes",
                                          "put it behind the green box"};
  std::uint64_t seed = 10;
  for (const auto& t : turns) say(t, seed++);
  ASSERT_EQ(state.transcript.size(), 2 * turns.size());
  for (std::size_t i = 0; i < turns.size(); ++i) {
    EXPECT_EQ(state.transcript[2 * i].speaker, "user");
    EXPECT_EQ(state.transcript[2 * i].text, turns[i]);
    EXPECT_EQ(state.transcript[2 * i + 1].speaker, "robot");
  }
  EXPECT_EQ(count(state, ActionKind::user_turn), turns.size());
  for (std::size_t i = 1; i < state.actions.size(); ++i) {
    EXPECT_EQ(state.actions[i].tick, state.actions[i - 1].tick + 1);
  }
}

TEST_F(DialogueTest, ReplayReproducesSceneBytes) {
  const std::vector<std::string> turns = {"pick up the red cup", "yes",
                                          "put it in front of the green box", "grab the ball",
                                          "set it on top of the white plate"};
  const Scene initial = scene;
  for (std::size_t i = 0; i < turns.size(); ++i) say(turns[i], 100 + i);
  Scene again = initial;
  DialogueState st2;
  for (std::size_t i = 0; i < turns.size(); ++i) step(st2, again, turns[i], models, cfg, 100 + i);
  EXPECT_EQ(serialize(again), serialize(scene));
  EXPECT_EQ(st2.transcript, state.transcript);
  EXPECT_EQ(st2.actions, state.actions);
}

TEST_F(DialogueTest, ProtocolSafetyUnderRandomUtterances) {
  const std::vector<std::string> pool = {
      "pick up the red cup", "yes", "no", "nope", "the cup", "grab the ball",
      "put it left of the green box", "put it down", "on top of the plate", "fetch the box",
      "the leftmost cup", "blah", "drop it inside the box", "put it behind the white plate"};
  Rng rng(3);
  for (int i = 0; i < 400; ++i) {
    const bool held = scene.gripper.has_value();
    const std::size_t picks = count(state, ActionKind::pick_attempt);
    const std::size_t places = count(state, ActionKind::place);
    say(pool[rng.index(pool.size())], 1000 + i);
    EXPECT_EQ(state.candidate_queue.empty(), state.phase != Phase::awaiting_confirmation);
    EXPECT_TRUE(check_invariants(scene));
    if (count(state, ActionKind::place) > places) {
      EXPECT_TRUE(held);
    }
    if (count(state, ActionKind::pick_attempt) > picks) {
      EXPECT_FALSE(held);
    }
    if (scene.on_table(TableId::pick).empty() && !scene.gripper) {
      scene = two_red_cups();
      state.abandon(scene);
    }
  }
}

TEST(Intent, ExactOnGrammarInstructions) {
  DatasetConfig dc;
  dc.n_records = 300;
  const auto ds = build_dataset(dc, 17);
  const auto& vocab = ds.vocab;
  int n = 0;
  for (const auto& r : ds.records) {
    const auto words = tokenize(vocab.decode(r.tokens));
    const auto pick = pick_instruction(words, n);
    RelationLabel rel = kAllRelations[n % kNumRelations];
    const auto place = place_instruction(rel, words, n);
    for (bool holding : {false, true}) {
      EXPECT_EQ(classify_intent(pick, holding), Intent::pick) << detokenize(pick);
      EXPECT_EQ(classify_intent(place, holding), Intent::place) << detokenize(place);
    }
    EXPECT_EQ(spot_relation(strip_command(place)), rel);
    ++n;
  }
  EXPECT_EQ(n, 300);
}

TEST(RunTask, EmptyScript) {
  const auto r = run_task({}, two_red_cups(), TaskModels::oracle(), {}, 1);
  TaskMetrics zero;
  zero.tasks = 1;
  EXPECT_EQ(r.metrics, zero);
  EXPECT_EQ(r.metrics.actions, 0);
  EXPECT_TRUE(r.transcript.empty());
}

TEST(RunTask, TidyUpTakesEightActions) {
  for (std::uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
    const auto [scene, script] = build_tidy_up(seed);
    ASSERT_EQ(script.steps.size(), 8u);
    const auto r = run_task(script, scene, TaskModels::oracle(), {}, seed);
    EXPECT_EQ(r.metrics.actions, 8);
    EXPECT_EQ(task_length(r.actions), 8);
    EXPECT_EQ(r.failed_steps, 0);
    EXPECT_TRUE(r.goal_reached.value_or(false));
    EXPECT_EQ(r.metrics.target_selection, (Ratio{4, 4}));
    EXPECT_EQ(r.metrics.pick_and_place, (Ratio{4, 4}));
    EXPECT_EQ(r.metrics.feedback, (Ratio{0, 8}));
    // deterministic trace
    const auto again = run_task(script, scene, TaskModels::oracle(), {}, seed);
    EXPECT_EQ(serialize(again.scene), serialize(r.scene));
    EXPECT_EQ(again.log, r.log);
  }
}

TEST(RunTask, GraspAttemptsMatchGeometricMean) {
  const auto [scene, script] = build_tidy_up(9);
  ExecutorConfig cfg;
  cfg.grasp_p = 0.744;
  const auto models = TaskModels::oracle();
  long attempts = 0;
  long objects = 0;
  for (int run = 0; run < 10000; ++run) {
    const auto r = run_task(script, scene, models, cfg, derive_seed(77, run));
    attempts += r.metrics.grasping.den;
    objects += 4;
  }
  EXPECT_NEAR(double(attempts) / objects, 1.0 / 0.744, 0.02 / 0.744);
}

TEST(RunTask, AmbiguousScriptWithScriptedUser) {
  TaskScript script;
  script.steps = {{"pick up the red cup", 1, std::nullopt},
                  {"put it left of the green box", 3, RelationLabel::left}};
  const auto r = run_task(script, two_red_cups(), TaskModels::oracle(), {}, 4);
  EXPECT_EQ(r.metrics.questions(), 2);  // cup 0 first, then cup 1
  EXPECT_EQ(r.metrics.target_selection, (Ratio{1, 1}));
  EXPECT_EQ(r.metrics.placing_base_grounding, (Ratio{1, 1}));
  EXPECT_EQ(r.metrics.pick_and_place, (Ratio{1, 1}));
  const auto silent = run_task(script, two_red_cups(), TaskModels::oracle(), {}, 4, false);
  EXPECT_EQ(silent.failed_steps, 2);
  EXPECT_EQ(silent.metrics.target_selection, (Ratio{0, 1}));
  EXPECT_EQ(silent.metrics.actions, 0);
}

TEST(RunTask, MetricsRecomputeFromLog) {
  const auto [scene, script] = build_tidy_up(6);
  ExecutorConfig cfg;
  cfg.grasp_p = 0.6;
  cfg.place_p = 0.5;
  const auto r = run_task(script, scene, TaskModels::oracle(), cfg, 12);
  EXPECT_EQ(metrics_from_records(r.log), r.metrics);
  EXPECT_LE(r.metrics.placing_success.num, r.metrics.placing_success.den);
  EXPECT_EQ(r.metrics.actions, task_length(r.actions));
}

TEST(RunTask, ScriptMustAlternate) {
  TaskScript bad;
  bad.steps = {{"pick up the red cup", {}, {}}, {"grab the ball", {}, {}}};
  EXPECT_THROW(bad.validate(), InvalidArgument);
  EXPECT_THROW(run_task(bad, two_red_cups(), TaskModels::oracle(), {}, 1), InvalidArgument);
  ExecutorConfig cfg;
  cfg.grasp_p = 1.5;
  EXPECT_THROW(cfg.validate(), InvalidArgument);
  EXPECT_THROW(ExecutorConfig::from_json({{"grasp_probability", 0.5}}), SchemaError);
  json j = ExecutorConfig{}.to_json();
  j["grasp_p"] = 0.3;
  EXPECT_EQ(ExecutorConfig::from_json(j).grasp_p, 0.3);
}

TEST(OracleMaps, MatchOracleCellwise) {
  const Scene s = two_red_cups();
  const auto m = oracle_maps(s, TableId::place, 3);
  for (int y = 0; y < 64; y += 3) {
    for (int x = 0; x < 64; x += 3) {
      const auto rel = relation_oracle(BBox::unit({x, y}), *s.find(3));
      for (auto r : kAllRelations) EXPECT_EQ(m.channel(r)(y, x), contains(rel, r) ? 1.0 : 0.0);
    }
  }
  EXPECT_THROW(oracle_maps(s, TableId::place, 0), ObjectNotFound);
}

}  // namespace
}  // namespace tabletop
