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
#include "tabletop/dialogue/models.hpp"

#include <algorithm>

#include "tabletop/common/error.hpp"
#include "tabletop/lang/grammar.hpp"

namespace tabletop {

MatchResult oracle_comprehend(const Scene& scene, TableId table,
                              const std::vector<ObjectCandidate>& candidates,
                              std::span<const int> tokens, const Vocabulary& vocab,
                              const RelationParams& rel) {
  std::vector<std::string> words;
  for (int t : tokens) {
    if (t == Vocabulary::kBos || t == Vocabulary::kEos) continue;
    words.push_back(vocab.token(t));
  }
  std::vector<int> denoted;
  if (const auto sem = parse_expression(words)) denoted = denotation(*sem, scene, table, rel);
  const bool none = denoted.empty();
  MatchResult r;
  for (const auto& c : candidates) {
    r.ids.push_back(c.id);
    const bool hit = none || std::find(denoted.begin(), denoted.end(), c.id) != denoted.end();
    r.scores.push_back(hit ? 1.0 : 0.0);
    r.module_scores.push_back({0.0, 0.0, 0.0});
  }
  if (r.ids.empty()) return r;
  r.ranking = rank_by_score(r.ids, r.scores);
  r.ambiguous_set = ambiguous_set(r.ids, r.scores, 0.5);
  return r;
}

std::vector<std::string> oracle_describe(const Scene& scene, int target_id,
                                         const RelationParams& rel) {
  const SceneObject* t = scene.find(target_id);
  if (!t) throw ObjectNotFound("target " + std::to_string(target_id));
  for (ClauseKind kind : {ClauseKind::attribute, ClauseKind::location, ClauseKind::relational}) {
    for (const auto& sem : enumerate_expressions(scene, target_id, kind, rel)) {
      const auto d = denotation(sem, scene, t->table, rel);
      if (d.size() == 1 && d.front() == target_id) return realize(sem);
    }
  }
  return {"the", std::string(to_string(t->color)), std::string(to_string(t->category))};
}

ProbMaps oracle_maps(const Scene& scene, TableId table, int ref_id, const RelationParams& rel) {
  const SceneObject* ref = scene.find(ref_id);
  if (!ref || ref->table != table) throw ObjectNotFound("reference " + std::to_string(ref_id));
  const Grid& g = scene.grid(table);
  ProbMaps m;
  m.h = g.h;
  m.w = g.w;
  for (auto& c : m.channels) c = Eigen::MatrixXd::Zero(g.h, g.w);
  for (int y = 0; y < g.h; ++y) {
    for (int x = 0; x < g.w; ++x) {
      const RelationSet s = relation_oracle(BBox::unit({x, y}), *ref, rel);
      for (RelationLabel r : kAllRelations) {
        if (contains(s, r)) m.channels[index_of(r)](y, x) = 1.0;
      }
    }
  }
  return m;
}

ProbMaps learned_maps(const Scene& scene, TableId table, int ref_id, const PlacementNet& net) {
  const SceneObject* ref = scene.find(ref_id);
  if (!ref || ref->table != table) throw ObjectNotFound("reference " + std::to_string(ref_id));
  return predict_maps(render(scene, table), footprint_mask(*ref, scene.grid(table)), net);
}

std::string describe_object(const SceneObject& o) {
  return "the " + std::string(to_string(o.size)) + " " + std::string(to_string(o.color)) + " " +
         std::string(to_string(o.category));
}

TaskModels TaskModels::trained(const GroundingModel& grounder, const PlacementNet& placement,
                               double m1, const BeamConfig& beam) {
  TaskModels m;
  m.vocab = grounder.vocab;
  m.comprehend = [&grounder, m1](const Scene&, TableId, const std::vector<ObjectCandidate>& c,
                                 std::span<const int> tokens) {
    return tabletop::comprehend(c, tokens, grounder, m1);
  };
  m.describe = [&grounder, beam](const Scene&, TableId, const std::vector<ObjectCandidate>& c,
                                 int target) {
    const auto tokens = generate_referring_expression(c, target, grounder, beam);
    std::vector<std::string> words;
    for (int t : tokens) {
      if (t != Vocabulary::kBos && t != Vocabulary::kEos) words.push_back(grounder.vocab.token(t));
    }
    return words;
  };
  m.maps = [&placement](const Scene& s, TableId t, int ref) {
    return learned_maps(s, t, ref, placement);
  };
  return m;
}

TaskModels TaskModels::oracle(const RelationParams& rel) {
  TaskModels m;
  const Vocabulary vocab = m.vocab;
  m.comprehend = [vocab, rel](const Scene& s, TableId t, const std::vector<ObjectCandidate>& c,
                              std::span<const int> tokens) {
    return oracle_comprehend(s, t, c, tokens, vocab, rel);
  };
  m.describe = [rel](const Scene& s, TableId, const std::vector<ObjectCandidate>&, int target) {
    return oracle_describe(s, target, rel);
  };
  m.maps = [rel](const Scene& s, TableId t, int ref) { return oracle_maps(s, t, ref, rel); };
  return m;
}

}  // namespace tabletop
