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

#include "tabletop/lang/dataset.hpp"

#include <deque>
#include <istream>
#include <map>
#include <ostream>

#include "tabletop/common/error.hpp"
#include "tabletop/common/rng.hpp"

namespace tabletop {

std::string_view to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "train";
}

nlohmann::json DatasetConfig::to_json() const {
  return {{"n_records", n_records},
          {"mixture", mixture},
          {"ambiguity_rate", ambiguity_rate},
          {"min_objects", min_objects},
          {"max_objects", max_objects},
          {"records_per_scene", records_per_scene},
          {"stack_rate", stack_rate},
          {"grid", grid},
          {"split", split},
          {"max_retries", max_retries},
          {"proximity_gap", relation.proximity_gap}};
}

std::vector<std::size_t> GroundingDataset::records_in(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (scene_split[records[i].scene_ref] == s) out.push_back(i);
  }
  return out;
}

std::vector<std::vector<std::size_t>> GroundingDataset::by_scene() const {
  std::vector<std::vector<std::size_t>> out(scenes.size());
  for (std::size_t i = 0; i < records.size(); ++i) out[records[i].scene_ref].push_back(i);
  return out;
}

namespace {

struct Pending {
  ClauseKind kind;
  bool ambiguous;
  std::uint64_t seed;
  int tries = 0;
};

}  // namespace

GroundingDataset build_dataset(const DatasetConfig& config, std::uint64_t seed) {
  if (config.n_records < 1 || config.records_per_scene < 1) {
    throw InvalidArgument("dataset sizes must be >= 1");
  }
  if (config.min_objects < 1 || config.max_objects < config.min_objects) {
    throw InvalidArgument("bad object-count range");
  }
  Rng rng(seed);
  std::deque<Pending> pending;
  for (int i = 0; i < config.n_records; ++i) {
    const auto kind = static_cast<ClauseKind>(rng.categorical(config.mixture));
    const bool amb = rng.bernoulli(config.ambiguity_rate);
    // Ordinals always single out one object and ambiguous relational
    // phrasings are rare, so only attribute clauses carry the flag.
    pending.push_back({kind, amb && kind == ClauseKind::attribute, rng.next_u64()});
  }

  GroundingDataset ds;
  while (!pending.empty()) {
    SceneConfig sc;
    sc.grid_h = sc.grid_w = config.grid;
    sc.n_pick = static_cast<int>(rng.uniform_int(config.min_objects, config.max_objects));
    sc.n_place = 0;
    sc.stack_rate = config.stack_rate;
    sc.ambiguity = pending.front().ambiguous && sc.n_pick >= 2;
    Scene scene = generate_scene(sc, rng.next_u64());

    std::vector<int> targets;
    for (const auto* o : scene.on_table(TableId::pick)) targets.push_back(o->id);
    rng.shuffle(targets);

    std::vector<ExpressionSample> made;
    std::deque<Pending> carried;
    int examined = 0;
    while (!pending.empty() && static_cast<int>(made.size()) < config.records_per_scene &&
           !targets.empty() && examined++ < 4 * config.records_per_scene) {
      Pending p = pending.front();
      pending.pop_front();
      bool done = false;
      for (std::size_t t = 0; t < targets.size() && !done; ++t) {
        try {
          ExpressionSample s = generate_expression(scene, targets[t], p.kind, p.ambiguous, p.seed,
                                                   ds.vocab, config.relation);
          made.push_back(std::move(s));
          targets.erase(targets.begin() + static_cast<long>(t));
          done = true;
        } catch (const NoDiscriminativeExpression&) {
        }
      }
      if (!done) {
        if (++p.tries > config.max_retries) {
          throw NoDiscriminativeExpression("record unsatisfiable after " +
                                           std::to_string(config.max_retries) + " scenes");
        }
        carried.push_back(p);
      }
    }
    for (auto it = carried.rbegin(); it != carried.rend(); ++it) pending.push_front(*it);
    if (made.empty()) continue;
    const int scene_ref = static_cast<int>(ds.scenes.size());
    ds.scenes.push_back(std::move(scene));
    for (auto& s : made) {
      s.scene_ref = scene_ref;
      ds.records.push_back(std::move(s));
    }
  }

  // Scene-level split by a seeded permutation.
  std::vector<std::size_t> order(ds.scenes.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);
  ds.scene_split.assign(ds.scenes.size(), Split::train);
  const double total = config.split[0] + config.split[1] + config.split[2];
  const auto n = static_cast<double>(order.size());
  const auto n_train = static_cast<std::size_t>(n * config.split[0] / total + 0.5);
  const auto n_val = static_cast<std::size_t>(n * config.split[1] / total + 0.5);
  for (std::size_t i = 0; i < order.size(); ++i) {
    ds.scene_split[order[i]] = i < n_train ? Split::train
                               : i < n_train + n_val ? Split::val
                                                     : Split::test;
  }
  return ds;
}

void write_jsonl(const GroundingDataset& ds, std::ostream& out) {
  for (const auto& r : ds.records) {
    nlohmann::json j = {{"scene", to_json(ds.scenes[r.scene_ref])},
                        {"scene_id", r.scene_ref},
                        {"split", std::string(to_string(ds.scene_split[r.scene_ref]))},
                        {"tokens", r.tokens},
                        {"text", ds.vocab.decode(r.tokens)},
                        {"target_id", r.target_id},
                        {"clause_kind", std::string(to_string(r.clause_kind))},
                        {"is_ambiguous", r.is_ambiguous}};
    out << j.dump() << '\n';
  }
}

GroundingDataset read_jsonl(std::istream& in, const Vocabulary& vocab) {
  GroundingDataset ds;
  ds.vocab = vocab;
  std::map<int, int> scene_index;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      const int scene_id = j.at("scene_id").get<int>();
      auto it = scene_index.find(scene_id);
      if (it == scene_index.end()) {
        it = scene_index.emplace(scene_id, static_cast<int>(ds.scenes.size())).first;
        ds.scenes.push_back(scene_from_json(j.at("scene")));
        const auto split = j.at("split").get<std::string>();
        ds.scene_split.push_back(split == "val" ? Split::val
                                 : split == "test" ? Split::test
                                                   : Split::train);
      }
      ExpressionSample s;
      s.scene_ref = it->second;
      s.tokens = j.at("tokens").get<std::vector<int>>();
      for (int t : s.tokens) {
        if (t < 0 || t >= vocab.size()) throw SchemaError("token index out of range");
      }
      s.target_id = j.at("target_id").get<int>();
      auto kind = parse_clause_kind(j.at("clause_kind").get<std::string>());
      if (!kind) throw SchemaError("bad clause_kind");
      s.clause_kind = *kind;
      s.is_ambiguous = j.at("is_ambiguous").get<bool>();
      ds.records.push_back(std::move(s));
    } catch (const nlohmann::json::exception& e) {
      throw SchemaError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return ds;
}

}  // namespace tabletop
