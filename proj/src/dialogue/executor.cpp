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
#include "tabletop/dialogue/executor.hpp"

#include <set>

#include "tabletop/common/error.hpp"
#include "tabletop/common/rng.hpp"
#include "tabletop/lang/grammar.hpp"
#include "tabletop/lang/lexicon.hpp"
#include "tabletop/spatial/aux.hpp"

namespace tabletop {

std::string_view to_string(Phase p) {
  switch (p) {
    case Phase::idle: return "idle";
    case Phase::awaiting_confirmation: return "awaiting_confirmation";
    case Phase::holding_object: return "holding_object";
  }
  return "idle";
}

std::string_view to_string(ActionKind k) {
  switch (k) {
    case ActionKind::pick_attempt: return "pick_attempt";
    case ActionKind::place: return "place";
    case ActionKind::question: return "question";
    case ActionKind::user_turn: return "user_turn";
    case ActionKind::regrasp: return "regrasp";
  }
  return "user_turn";
}

std::string_view to_string(SystemActionKind k) {
  switch (k) {
    case SystemActionKind::picked: return "picked";
    case SystemActionKind::placed: return "placed";
    case SystemActionKind::question: return "question";
    case SystemActionKind::error: return "error";
  }
  return "error";
}

json ActionRecord::to_json() const {
  return {{"kind", std::string(tabletop::to_string(kind))}, {"tick", tick}, {"payload", payload}};
}

long task_length(const std::vector<ActionRecord>& actions) {
  return std::count_if(actions.begin(), actions.end(), [](const ActionRecord& a) {
    return a.kind == ActionKind::pick_attempt || a.kind == ActionKind::place;
  });
}

void DialogueState::abandon(const Scene& scene) {
  candidate_queue.clear();
  pending_relation.reset();
  pending_tokens.clear();
  phase = scene.gripper ? Phase::holding_object : Phase::idle;
}

json DialogueState::to_json() const {
  json turns = json::array();
  for (const auto& t : transcript) turns.push_back({{"speaker", t.speaker}, {"text", t.text}});
  json acts = json::array();
  for (const auto& a : actions) acts.push_back(a.to_json());
  return {{"phase", std::string(to_string(phase))},
          {"pending_tokens", pending_tokens},
          {"candidate_queue", candidate_queue},
          {"confirmed_target", confirmed_target ? json(*confirmed_target) : json(nullptr)},
          {"pending_relation",
           pending_relation ? json(std::string(to_string(*pending_relation))) : json(nullptr)},
          {"transcript", std::move(turns)},
          {"actions", std::move(acts)}};
}

json SystemAction::to_json() const {
  json c = json::array();
  for (const auto& s : candidates) {
    c.push_back({{"id", s.id},
                 {"score", s.score},
                 {"bbox", {s.bbox.x0, s.bbox.y0, s.bbox.x1, s.bbox.y1}}});
  }
  json j = {{"action", std::string(tabletop::to_string(kind))},
            {"detail", text},
            {"object_id", object_id},
            {"candidates", std::move(c)}};
  if (cell) j["cell"] = {cell->x, cell->y};
  return j;
}

void ExecutorConfig::validate() const {
  if (!(grasp_p >= 0.0 && grasp_p <= 1.0)) throw InvalidArgument("grasp_p must lie in [0, 1]");
  if (!(place_p >= 0.0 && place_p <= 1.0)) throw InvalidArgument("place_p must lie in [0, 1]");
  if (retry_cap < 1) throw InvalidArgument("retry_cap must be >= 1");
  if (jitter.max_cells < 0) throw InvalidArgument("jitter.max_cells must be >= 0");
  if (relation.proximity_gap < 0) throw InvalidArgument("proximity_gap must be >= 0");
}

json ExecutorConfig::to_json() const {
  return {{"grasp_p", grasp_p},
          {"place_p", place_p},
          {"retry_cap", retry_cap},
          {"jitter_cells", jitter.max_cells},
          {"appearance_noise", jitter.appearance_noise},
          {"proximity_gap", relation.proximity_gap}};
}

ExecutorConfig ExecutorConfig::from_json(const json& j) {
  static const std::set<std::string> known = {"grasp_p",      "place_p",          "retry_cap",
                                              "jitter_cells", "appearance_noise", "proximity_gap"};
  for (const auto& [k, v] : j.items()) {
    if (!known.count(k)) throw SchemaError("unknown executor key '" + k + "'");
  }
  ExecutorConfig c;
  c.grasp_p = j.value("grasp_p", c.grasp_p);
  c.place_p = j.value("place_p", c.place_p);
  c.retry_cap = j.value("retry_cap", c.retry_cap);
  c.jitter.max_cells = j.value("jitter_cells", c.jitter.max_cells);
  c.jitter.appearance_noise = j.value("appearance_noise", c.jitter.appearance_noise);
  c.relation.proximity_gap = j.value("proximity_gap", c.relation.proximity_gap);
  c.validate();
  return c;
}

namespace {

const std::set<std::string> kPickVerbs = {"pick", "fetch", "grab", "get", "take", "bring"};
const std::set<std::string> kPlaceVerbs = {"place", "put", "move", "set", "drop"};

bool is_yes(const std::vector<std::string>& w) {
  return w.size() == 1 && (w[0] == "yes" || w[0] == "yeah");
}
bool is_no(const std::vector<std::string>& w) {
  return w.size() == 1 && (w[0] == "no" || w[0] == "nope");
}

SystemAction act(SystemActionKind kind, std::string text, int id = -1,
                 std::optional<Cell> cell = std::nullopt) {
  SystemAction a;
  a.kind = kind;
  a.text = std::move(text);
  a.object_id = id;
  a.cell = cell;
  return a;
}

std::string phrase_text(RelationLabel r) {
  return detokenize(RelationLexicon::standard().phrase_for(r));
}

class Executor {
 public:
  Executor(DialogueState& s, Scene& scene, const TaskModels& m, const ExecutorConfig& c,
           std::uint64_t seed)
      : s_(s), scene_(scene), models_(m), cfg_(c), seed_(seed) {}

  SystemAction handle(const std::vector<std::string>& words);
  const MatchResult& last() const { return last_; }
  const std::vector<ObjectCandidate>& candidates() const { return candidates_; }

 private:
  TableId pending_table() const {
    return s_.pending_relation ? TableId::place : TableId::pick;
  }
  void record(ActionKind k, json payload) {
    s_.actions.push_back({k, std::move(payload), s_.tick++});
  }
  SystemAction fail(std::string text) {
    s_.abandon(scene_);
    return act(SystemActionKind::error, std::move(text));
  }
  void ensure_candidates(TableId table) {
    if (candidates_.empty()) {
      candidates_ = encode_candidates(scene_, table, cfg_.jitter, derive_seed(seed_, 1));
    }
  }
  SystemAction on_response(const std::vector<std::string>& words);
  SystemAction on_instruction(const std::vector<std::string>& words);
  SystemAction resolve(const std::vector<std::string>& expression, TableId table);
  SystemAction ask_head();
  SystemAction execute(int id) {
    s_.candidate_queue.clear();
    s_.confirmed_target = id;
    return s_.pending_relation ? execute_place(id) : execute_pick(id);
  }
  SystemAction execute_pick(int id);
  SystemAction execute_place(int ref_id);

  DialogueState& s_;
  Scene& scene_;
  const TaskModels& models_;
  const ExecutorConfig& cfg_;
  std::uint64_t seed_;
  std::vector<ObjectCandidate> candidates_;
  MatchResult last_;
};

SystemAction Executor::handle(const std::vector<std::string>& words) {
  if (words.empty()) return act(SystemActionKind::error, "I did not catch that.");
  if (s_.phase == Phase::awaiting_confirmation) return on_response(words);
  return on_instruction(words);
}

SystemAction Executor::on_response(const std::vector<std::string>& words) {
  if (is_yes(words)) return execute(s_.candidate_queue.front());
  if (is_no(words)) {
    s_.candidate_queue.erase(s_.candidate_queue.begin());
    if (s_.candidate_queue.empty()) {
      return fail("Sorry, I could not find the object you mean.");
    }
    return ask_head();
  }
  // A correcting response grounds afresh over every candidate.
  auto expression = strip_command(words);
  if (s_.pending_relation) {
    if (const auto m = RelationLexicon::standard().find(expression)) {
      s_.pending_relation = m->label;
      expression.erase(expression.begin(),
                       expression.begin() + static_cast<std::ptrdiff_t>(m->start + m->length));
    }
  }
  if (expression.empty()) return ask_head();
  s_.candidate_queue.clear();
  s_.questions_this_instruction = 0;
  s_.pending_tokens = words;
  return resolve(expression, pending_table());
}

SystemAction Executor::on_instruction(const std::vector<std::string>& words) {
  const bool holding = scene_.gripper.has_value();
  if (classify_intent(words, holding) == Intent::place) {
    if (!holding) return fail("I am not holding anything to place.");
    auto expression = strip_command(words);
    const auto m = RelationLexicon::standard().find(expression);
    if (!m || m->start + m->length >= expression.size()) {
      return act(SystemActionKind::question, "Where should I place it?");
    }
    s_.pending_relation = m->label;
    s_.pending_tokens = words;
    s_.questions_this_instruction = 0;
    expression.erase(expression.begin(),
                     expression.begin() + static_cast<std::ptrdiff_t>(m->start + m->length));
    return resolve(expression, TableId::place);
  }
  if (holding) {
    return act(SystemActionKind::error,
            "I am already holding " + describe_object(*scene_.gripper) + ".");
  }
  const auto expression = strip_command(words);
  if (expression.empty()) return act(SystemActionKind::error, "What should I pick up?");
  s_.pending_relation.reset();
  s_.pending_tokens = words;
  s_.questions_this_instruction = 0;
  return resolve(expression, TableId::pick);
}

SystemAction Executor::resolve(const std::vector<std::string>& expression, TableId table) {
  candidates_.clear();
  ensure_candidates(table);
  if (candidates_.empty()) {
    return fail("I do not see anything on the " + std::string(to_string(table)) + " table.");
  }
  auto tokens = models_.vocab.encode(expression);
  tokens.push_back(Vocabulary::kEos);
  last_ = models_.comprehend(scene_, table, candidates_, tokens);
  if (last_.ambiguous_set.size() <= 1) return execute(last_.top());
  s_.candidate_queue = last_.ambiguous_set;
  s_.phase = Phase::awaiting_confirmation;
  return ask_head();
}

SystemAction Executor::ask_head() {
  const int head = s_.candidate_queue.front();
  const TableId table = pending_table();
  ensure_candidates(table);
  const auto words = models_.describe(scene_, table, candidates_, head);
  std::string text = "Do you mean " + detokenize(words) + "?";
  ++s_.questions_this_instruction;
  record(ActionKind::question, {{"object", head}, {"text", text}, {"queue", s_.candidate_queue}});
  return act(SystemActionKind::question, std::move(text), head);
}

SystemAction Executor::execute_pick(int id) {
  const SceneObject* obj = scene_.find(id);
  if (!obj) return fail("I cannot find that object any more.");
  const std::string desc = describe_object(*obj);
  for (int attempt = 0; attempt < cfg_.retry_cap; ++attempt) {
    if (attempt > 0) record(ActionKind::regrasp, {{"object", id}, {"attempt", attempt}});
    PickOutcome out;
    try {
      out = pick(scene_, id, cfg_.grasp_p, derive_seed(seed_, 10 + attempt));
    } catch (const ObjectBuried&) {
      return fail("I cannot pick up " + desc + ", something is on top of it.");
    }
    record(ActionKind::pick_attempt, {{"object", id}, {"attempt", attempt}, {"success", out.success}});
    if (out.success) {
      s_.abandon(scene_);
      s_.confirmed_target = id;
      return act(SystemActionKind::picked, "I picked up " + desc + ".", id);
    }
  }
  return fail("I failed to grasp " + desc + " after " + std::to_string(cfg_.retry_cap) +
              " attempts.");
}

SystemAction Executor::execute_place(int ref_id) {
  const RelationLabel rel = *s_.pending_relation;
  const SceneObject* found = scene_.find(ref_id);
  if (!found) return fail("I cannot find that object any more.");
  const SceneObject ref = *found;
  const std::string where = phrase_text(rel) + " " + describe_object(ref);
  if (!relation_eligible(rel, ref)) {
    return fail("I cannot place anything " + where + ".");
  }
  const Grid& grid = scene_.grid(TableId::place);
  Cell sampled;
  try {
    const ProbMaps maps = models_.maps(scene_, TableId::place, ref_id);
    sampled = sample_location(maps, rel, footprint_mask(ref, grid), derive_seed(seed_, 2));
  } catch (const NoMassAvailable&) {
    return fail("I found no free spot " + where + ".");
  }
  Rng slip(derive_seed(seed_, 3));
  Cell aim = sampled;
  if (!slip.bernoulli(cfg_.place_p)) {
    aim = {static_cast<int>(slip.uniform_int(0, grid.w - 1)),
           static_cast<int>(slip.uniform_int(0, grid.h - 1))};
  }
  const std::string held = describe_object(*scene_.gripper);
  PlaceOutcome out;
  try {
    out = place(scene_, aim, TableId::place);
  } catch (const PlacementInfeasible&) {
    return fail("There is no room to place " + held + ".");
  }
  const bool satisfied =
      contains(relation_oracle(BBox::unit(out.final_center), ref, cfg_.relation), rel);
  record(ActionKind::place, {{"object", out.object_id},
                             {"ref", ref_id},
                             {"relation", std::string(to_string(rel))},
                             {"sampled", {sampled.x, sampled.y}},
                             {"aim", {aim.x, aim.y}},
                             {"final", {out.final_center.x, out.final_center.y}},
                             {"outcome", std::string(to_string(out.kind))},
                             {"host", out.host_id},
                             {"satisfied", satisfied}});
  s_.abandon(scene_);
  s_.confirmed_target.reset();
  return act(SystemActionKind::placed, "I placed " + held + " " + where + ".", out.object_id,
                 out.final_center);
}

}  // namespace

bool is_yes_no(std::string_view text) {
  const auto w = tokenize(text);
  return is_yes(w) || is_no(w);
}

Intent classify_intent(const std::vector<std::string>& words, bool holding) {
  if (words.empty()) return Intent::pick;
  if (kPlaceVerbs.count(words.front())) return Intent::place;
  if (kPickVerbs.count(words.front())) return Intent::pick;
  return holding && RelationLexicon::standard().find(words) ? Intent::place : Intent::pick;
}

SystemAction step(DialogueState& state, Scene& scene, std::string_view user_text,
                  const TaskModels& models, const ExecutorConfig& config, std::uint64_t seed) {
  const auto words = tokenize(user_text);
  state.transcript.push_back({"user", std::string(user_text)});
  state.actions.push_back({ActionKind::user_turn,
                           {{"text", std::string(user_text)},
                            {"response", state.phase == Phase::awaiting_confirmation},
                            {"seed", seed}},
                           state.tick++});
  Executor ex(state, scene, models, config, seed);
  SystemAction a = ex.handle(words);
  const auto& r = ex.last();
  for (int id : r.ranking) {
    const ObjectCandidate* c = find_candidate(ex.candidates(), id);
    a.candidates.push_back({id, r.score_of(id), c ? c->bbox : BBox{}});
  }
  state.transcript.push_back({"robot", a.text});
  return a;
}

}  // namespace tabletop
