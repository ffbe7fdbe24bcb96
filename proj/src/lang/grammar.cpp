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

#include "tabletop/lang/grammar.hpp"

#include <algorithm>
#include <set>

#include "tabletop/common/error.hpp"
#include "tabletop/common/rng.hpp"
#include "tabletop/lang/lexicon.hpp"

namespace tabletop {

std::string_view to_string(ClauseKind k) {
  switch (k) {
    case ClauseKind::attribute: return "attribute";
    case ClauseKind::location: return "location";
    case ClauseKind::relational: return "relational";
  }
  return "attribute";
}

std::optional<ClauseKind> parse_clause_kind(std::string_view s) {
  if (s == "attribute") return ClauseKind::attribute;
  if (s == "location") return ClauseKind::location;
  if (s == "relational") return ClauseKind::relational;
  return std::nullopt;
}

bool AttributeDesc::matches(const SceneObject& o) const {
  if (size && *size != o.size) return false;
  if (color && *color != o.color) return false;
  if (category && *category != o.category) return false;
  return true;
}

namespace {

void append_attr(std::vector<std::string>& out, const AttributeDesc& d) {
  out.emplace_back("the");
  if (d.size) out.emplace_back(to_string(*d.size));
  if (d.color) out.emplace_back(to_string(*d.color));
  out.emplace_back(d.category ? std::string(to_string(*d.category)) : d.hypernym);
}

std::optional<AttributeDesc> parse_attr(std::span<const std::string> w) {
  if (w.size() < 2 || w.size() > 4 || w[0] != "the") return std::nullopt;
  AttributeDesc d;
  std::size_t i = 1;
  if (i < w.size() - 1) {
    if (auto s = parse_size(w[i])) {
      d.size = s;
      ++i;
    }
  }
  if (i < w.size() - 1) {
    if (auto c = parse_color(w[i])) {
      d.color = c;
      ++i;
    }
  }
  if (i != w.size() - 1) return std::nullopt;
  if (auto c = parse_category(w[i])) {
    d.category = c;
  } else if (w[i] == "thing" || w[i] == "object") {
    d.hypernym = w[i];
  } else {
    return std::nullopt;
  }
  return d;
}

constexpr std::array<std::string_view, 5> kOrdinalWords = {"leftmost", "rightmost", "middle",
                                                           "second", "third"};

std::vector<const SceneObject*> ordered_same_category(const Scene& scene, TableId table,
                                                      Category c) {
  std::vector<const SceneObject*> v;
  for (const auto* o : scene.on_table(table)) {
    if (o->category == c) v.push_back(o);
  }
  std::sort(v.begin(), v.end(), [](auto* a, auto* b) {
    if (a->center.x != b->center.x) return a->center.x < b->center.x;
    if (a->center.y != b->center.y) return a->center.y < b->center.y;
    return a->id < b->id;
  });
  return v;
}

std::optional<std::size_t> ordinal_index(Ordinal o, std::size_t count) {
  switch (o) {
    case Ordinal::leftmost: return count >= 2 ? std::optional<std::size_t>(0) : std::nullopt;
    case Ordinal::rightmost:
      return count >= 2 ? std::optional<std::size_t>(count - 1) : std::nullopt;
    case Ordinal::middle:
      return count >= 3 && count % 2 == 1 ? std::optional<std::size_t>(count / 2) : std::nullopt;
    case Ordinal::second: return count >= 3 ? std::optional<std::size_t>(1) : std::nullopt;
    case Ordinal::third: return count >= 4 ? std::optional<std::size_t>(2) : std::nullopt;
  }
  return std::nullopt;
}

std::vector<AttributeDesc> attribute_variants(const SceneObject& t, bool allow_hypernym) {
  std::vector<AttributeDesc> out;
  for (int noun = 0; noun < (allow_hypernym ? 3 : 1); ++noun) {
    for (int use_size = 0; use_size < 2; ++use_size) {
      for (int use_color = 0; use_color < 2; ++use_color) {
        AttributeDesc d;
        if (noun == 0) d.category = t.category;
        else d.hypernym = noun == 1 ? "thing" : "object";
        if (use_size) d.size = t.size;
        if (use_color) d.color = t.color;
        if (noun != 0 && !use_size && !use_color) continue;
        out.push_back(d);
      }
    }
  }
  return out;
}

}  // namespace

std::vector<std::string> realize(const ExpressionSemantics& sem) {
  std::vector<std::string> out;
  switch (sem.kind) {
    case ClauseKind::attribute:
      append_attr(out, sem.subject);
      break;
    case ClauseKind::location: {
      out.emplace_back("the");
      const auto word = std::string(kOrdinalWords[static_cast<int>(sem.ordinal)]);
      out.push_back(word);
      out.emplace_back(to_string(*sem.subject.category));
      if (sem.ordinal == Ordinal::second || sem.ordinal == Ordinal::third) {
        out.insert(out.end(), {"from", "the", "left"});
      }
      break;
    }
    case ClauseKind::relational:
      append_attr(out, sem.subject);
      out.insert(out.end(), sem.relation_phrase.begin(), sem.relation_phrase.end());
      append_attr(out, sem.landmark);
      break;
  }
  return out;
}

std::optional<ExpressionSemantics> parse_expression(std::span<const std::string> w) {
  if (w.size() < 2 || w[0] != "the") return std::nullopt;
  ExpressionSemantics sem;
  // location
  for (std::size_t k = 0; k < kOrdinalWords.size(); ++k) {
    if (w[1] != kOrdinalWords[k]) continue;
    const auto ord = static_cast<Ordinal>(k);
    const bool counted = ord == Ordinal::second || ord == Ordinal::third;
    if (w.size() != (counted ? 6u : 3u)) return std::nullopt;
    auto cat = parse_category(w[2]);
    if (!cat) return std::nullopt;
    if (counted && !(w[3] == "from" && w[4] == "the" && w[5] == "left")) return std::nullopt;
    sem.kind = ClauseKind::location;
    sem.ordinal = ord;
    sem.subject.category = cat;
    return sem;
  }
  // relational
  if (auto m = RelationLexicon::standard().find(w); m && m->start >= 2) {
    auto subj = parse_attr(w.subspan(0, m->start));
    auto land = parse_attr(w.subspan(m->start + m->length));
    if (subj && land) {
      sem.kind = ClauseKind::relational;
      sem.subject = *subj;
      sem.landmark = *land;
      sem.relation = m->label;
      sem.relation_phrase.assign(w.begin() + m->start, w.begin() + m->start + m->length);
      return sem;
    }
  }
  if (auto a = parse_attr(w)) {
    sem.kind = ClauseKind::attribute;
    sem.subject = *a;
    return sem;
  }
  return std::nullopt;
}

std::vector<int> denotation(const ExpressionSemantics& sem, const Scene& scene, TableId table,
                            const RelationParams& params) {
  std::vector<int> out;
  const auto objs = scene.on_table(table);
  switch (sem.kind) {
    case ClauseKind::attribute:
      for (const auto* o : objs) {
        if (sem.subject.matches(*o)) out.push_back(o->id);
      }
      break;
    case ClauseKind::location: {
      if (!sem.subject.category) break;
      const auto ordered = ordered_same_category(scene, table, *sem.subject.category);
      if (auto idx = ordinal_index(sem.ordinal, ordered.size())) out.push_back(ordered[*idx]->id);
      break;
    }
    case ClauseKind::relational:
      for (const auto* o : objs) {
        if (!sem.subject.matches(*o)) continue;
        for (const auto* q : objs) {
          if (q->id == o->id || !sem.landmark.matches(*q)) continue;
          if (contains(relation_oracle(o->footprint(), *q, params), sem.relation)) {
            out.push_back(o->id);
            break;
          }
        }
      }
      break;
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<ExpressionSemantics> enumerate_expressions(const Scene& scene, int target_id,
                                                       ClauseKind kind,
                                                       const RelationParams& params) {
  const SceneObject* t = scene.find(target_id);
  if (!t) throw ObjectNotFound("target " + std::to_string(target_id));
  std::vector<ExpressionSemantics> out;
  switch (kind) {
    case ClauseKind::attribute:
      for (const auto& d : attribute_variants(*t, true)) {
        ExpressionSemantics s;
        s.kind = kind;
        s.subject = d;
        out.push_back(s);
      }
      break;
    case ClauseKind::location: {
      const auto ordered = ordered_same_category(scene, t->table, t->category);
      for (std::size_t k = 0; k < kOrdinalWords.size(); ++k) {
        const auto ord = static_cast<Ordinal>(k);
        auto idx = ordinal_index(ord, ordered.size());
        if (idx && ordered[*idx]->id == target_id) {
          ExpressionSemantics s;
          s.kind = kind;
          s.ordinal = ord;
          s.subject.category = t->category;
          out.push_back(s);
        }
      }
      break;
    }
    case ClauseKind::relational:
      for (const auto* q : scene.on_table(t->table)) {
        if (q->id == target_id) continue;
        const RelationSet rels = relation_oracle(t->footprint(), *q, params);
        for (RelationLabel r : kAllRelations) {
          if (!contains(rels, r)) continue;
          for (const auto& phrase : RelationLexicon::standard().phrases_for(r)) {
            for (const auto& land : attribute_variants(*q, false)) {
              ExpressionSemantics s;
              s.kind = kind;
              s.subject.category = t->category;
              s.relation = r;
              s.relation_phrase = phrase;
              s.landmark = land;
              out.push_back(s);
            }
          }
        }
      }
      break;
  }
  return out;
}

ExpressionSample generate_expression(const Scene& scene, int target_id, ClauseKind kind,
                                     bool ambiguity, std::uint64_t seed, const Vocabulary& vocab,
                                     const RelationParams& params) {
  const SceneObject* t = scene.find(target_id);
  if (!t) throw ObjectNotFound("target " + std::to_string(target_id));
  const auto variants = enumerate_expressions(scene, target_id, kind, params);
  std::vector<std::pair<const ExpressionSemantics*, std::size_t>> ok;
  for (const auto& v : variants) {
    if (static_cast<int>(realize(v).size()) > kMaxExpressionWords) continue;
    const auto den = denotation(v, scene, t->table, params);
    const bool unique = den.size() == 1 && den[0] == target_id;
    if ((!ambiguity && unique) || (ambiguity && den.size() >= 2)) ok.emplace_back(&v, den.size());
  }
  if (ok.empty()) {
    throw NoDiscriminativeExpression(std::string(to_string(kind)) + " template for object " +
                                     std::to_string(target_id) +
                                     (ambiguity ? " (ambiguous)" : " (unique)"));
  }
  Rng rng(seed);
  const auto& [sem, count] = ok[rng.index(ok.size())];
  ExpressionSample sample;
  sample.tokens = vocab.encode(realize(*sem));
  sample.tokens.push_back(Vocabulary::kEos);
  sample.target_id = target_id;
  sample.clause_kind = kind;
  sample.is_ambiguous = count > 1;
  return sample;
}

// ---------------------------------------------------------------------------

std::vector<std::string> pick_instruction(std::span<const std::string> expression,
                                          std::uint64_t seed) {
  static const std::vector<std::vector<std::string>> verbs = {
      {"pick", "up"}, {"fetch"}, {"grab"}, {"get"}, {"take"}, {"bring", "me"}};
  Rng rng(seed);
  std::vector<std::string> out = verbs[rng.index(verbs.size())];
  out.insert(out.end(), expression.begin(), expression.end());
  return out;
}

std::vector<std::string> place_instruction(RelationLabel relation,
                                           std::span<const std::string> reference,
                                           std::uint64_t seed) {
  static const std::vector<std::string> verbs = {"place", "put", "move", "set", "drop"};
  Rng rng(seed);
  std::vector<std::string> out = {verbs[rng.index(verbs.size())], "it"};
  auto phrases = RelationLexicon::standard().phrases_for(relation);
  if (relation == RelationLabel::inside) phrases.push_back({"into"});
  const auto& phrase = phrases[rng.index(phrases.size())];
  out.insert(out.end(), phrase.begin(), phrase.end());
  out.insert(out.end(), reference.begin(), reference.end());
  return out;
}

std::vector<std::string> strip_command(std::span<const std::string> words) {
  static const std::set<std::string> command = {
      "pick",  "up",  "fetch", "grab", "get",  "take", "bring", "me",   "place", "put",
      "move",  "set", "drop",  "it",   "please", "yes", "yeah", "no", "nope",  "a"};
  std::size_t i = 0;
  while (i < words.size() && command.count(words[i])) ++i;
  return {words.begin() + i, words.end()};
}

}  // namespace tabletop
