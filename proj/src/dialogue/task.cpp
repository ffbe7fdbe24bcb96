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
#include "tabletop/dialogue/task.hpp"

#include "tabletop/common/error.hpp"
#include "tabletop/common/rng.hpp"
#include "tabletop/lang/grammar.hpp"

namespace tabletop {

void TaskScript::validate() const {
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const bool place_turn = i % 2 == 1;
    const Intent got = classify_intent(tokenize(steps[i].text), place_turn);
    if ((got == Intent::place) != place_turn) {
      throw InvalidArgument("step " + std::to_string(i) + " ('" + steps[i].text + "') should be a " +
                            (place_turn ? "place" : "pick") + " instruction");
    }
  }
}

namespace {

json assessment(const char* stage, bool ok) {
  return {{"kind", "assessment"}, {"stage", stage}, {"success", ok}};
}

const ActionRecord* first_of(const std::vector<ActionRecord>& actions, std::size_t from,
                             ActionKind kind) {
  for (std::size_t i = from; i < actions.size(); ++i) {
    if (actions[i].kind == kind) return &actions[i];
  }
  return nullptr;
}

}  // namespace

TaskResult run_task(const TaskScript& script, Scene scene, const TaskModels& models,
                    const ExecutorConfig& config, std::uint64_t seed, bool scripted_user) {
  script.validate();
  config.validate();
  DialogueState state;
  TaskResult res;
  std::size_t flushed = 0;
  bool pair_open = false;
  bool pair_ok = false;

  for (std::size_t i = 0; i < script.steps.size(); ++i) {
    const TaskStep& st = script.steps[i];
    const bool is_place = st.relation.has_value();
    const bool held_before = scene.gripper.has_value();
    const std::size_t first = state.actions.size();
    const std::uint64_t s = derive_seed(seed, i);

    SystemAction a = step(state, scene, st.text, models, config, derive_seed(s, 0));
    int replies = 0;
    while (a.kind == SystemActionKind::question && state.phase == Phase::awaiting_confirmation &&
           scripted_user && st.target_id && replies < 64) {
      const char* answer = a.object_id == *st.target_id ? "yes" : "no";
      a = step(state, scene, answer, models, config, derive_seed(s, ++replies));
    }
    if (a.kind == SystemActionKind::question) state.abandon(scene);
    const bool done = a.kind == (is_place ? SystemActionKind::placed : SystemActionKind::picked);
    if (!done) ++res.failed_steps;

    for (; flushed < state.actions.size(); ++flushed) res.log.push_back(state.actions[flushed].to_json());
    if (!st.target_id) continue;

    if (!is_place) {
      const ActionRecord* attempt = first_of(state.actions, first, ActionKind::pick_attempt);
      const bool correct = attempt && attempt->payload.at("object").get<int>() == *st.target_id;
      res.log.push_back(assessment("selection", correct));
      pair_open = true;
      pair_ok = correct && done;
      continue;
    }
    bool ok = false;
    if (held_before) {
      const ActionRecord* placed = first_of(state.actions, first, ActionKind::place);
      const bool ref_ok = placed && placed->payload.at("ref").get<int>() == *st.target_id;
      res.log.push_back(assessment("reference", ref_ok));
      if (ref_ok) {
        ok = placed->payload.at("satisfied").get<bool>() &&
             placed->payload.at("relation").get<std::string>() == to_string(*st.relation);
        res.log.push_back(assessment("placement", ok));
      }
    }
    if (pair_open) {
      res.log.push_back(assessment("pick_and_place", pair_ok && ok));
      pair_open = false;
    }
  }
  res.log.push_back({{"kind", "task_end"},
                     {"name", script.name},
                     {"actions", task_length(state.actions)},
                     {"failed_steps", res.failed_steps}});
  res.metrics = metrics_from_records(res.log);
  if (script.goal) res.goal_reached = script.goal(scene);
  res.scene = std::move(scene);
  res.transcript = std::move(state.transcript);
  res.actions = std::move(state.actions);
  return res;
}

std::pair<Scene, TaskScript> build_tidy_up(std::uint64_t seed, const TidyUpConfig& cfg) {
  if (cfg.n_objects < 1 || cfg.n_left < 0 || cfg.n_left > cfg.n_objects || cfg.n_distractors < 0) {
    throw InvalidArgument("tidy-up needs n_objects >= 1, 0 <= n_left <= n_objects, distractors >= 0");
  }
  static const std::vector<Category> movable = {Category::cup, Category::ball, Category::banana,
                                                Category::bottle, Category::teddy};
  const Vocabulary& vocab = Vocabulary::standard();
  for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(attempt)));
    Scene scene;
    scene.rng_seed = seed;
    const Color left = kAllColors[rng.index(kNumColors)];
    Color right = kAllColors[rng.index(kNumColors)];
    while (right == left) right = kAllColors[rng.index(kNumColors)];
    std::array<int, 2> boxes{};
    for (int side = 0; side < 2; ++side) {
      SceneObject box;
      box.id = scene.next_id++;
      box.category = Category::box;
      box.color = side == 0 ? left : right;
      box.size = Size::large;
      box.center = {side == 0 ? 20 : 44, 32};
      box.table = TableId::place;
      boxes[side] = box.id;
      scene.objects.push_back(box);
    }
    std::vector<int> targets;
    try {
      for (int k = 0; k < cfg.n_objects; ++k) {
        Color c = left;
        if (k >= cfg.n_left) {
          do c = kAllColors[rng.index(kNumColors)];
          while (c == left);
        }
        const Category cat = movable[rng.index(movable.size())];
        const Size size = kAllSizes[rng.index(2)];
        targets.push_back(add_random_object(scene, TableId::pick, cat, c, size, rng.next_u64()).id);
      }
      for (int k = 0; k < cfg.n_distractors; ++k) {
        const Category cat = kAllCategories[rng.index(kNumCategories)];
        const Color c = kAllColors[rng.index(kNumColors)];
        const Size size = kAllSizes[rng.index(kNumSizes)];
        add_random_object(scene, TableId::pick, cat, c, size, rng.next_u64());
      }
    } catch (const PlacementInfeasible&) {
      continue;
    }

    TaskScript script;
    script.name = "tidy_up";
    std::vector<std::pair<int, int>> routes;
    try {
      for (std::size_t k = 0; k < targets.size(); ++k) {
        const int id = targets[k];
        const auto sample = generate_expression(scene, id, ClauseKind::attribute, false,
                                                derive_seed(seed, 1000 + k));
        const auto expr = tokenize(vocab.decode(sample.tokens));
        const SceneObject& obj = *scene.find(id);
        const int box = obj.color == left ? boxes[0] : boxes[1];
        const SceneObject& host = *scene.find(box);
        const std::vector<std::string> ref = {"the", std::string(to_string(host.color)), "box"};
        script.steps.push_back(
            {detokenize(pick_instruction(expr, derive_seed(seed, 2000 + k))), id, std::nullopt});
        script.steps.push_back(
            {detokenize(place_instruction(RelationLabel::inside, ref, derive_seed(seed, 3000 + k))),
             box, RelationLabel::inside});
        routes.emplace_back(id, box);
      }
    } catch (const NoDiscriminativeExpression&) {
      continue;
    }
    script.goal = [routes](const Scene& s) {
      for (const auto& [id, box] : routes) {
        const SceneObject* o = s.find(id);
        const SceneObject* b = s.find(box);
        if (!o || !b || o->table != TableId::place || o->z_layer == 0) return false;
        if (!b->interior()->contains_cell(o->center)) return false;
      }
      return true;
    };
    return {std::move(scene), std::move(script)};
  }
  throw PlacementInfeasible("no tidy-up scene after " + std::to_string(cfg.max_attempts) +
                            " attempts");
}

}  // namespace tabletop
