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

#include "tabletop/lang/lexicon.hpp"

#include "tabletop/common/error.hpp"
#include "tabletop/lang/vocabulary.hpp"

namespace tabletop {

namespace {

LexiconEntry entry(std::string_view phrase, RelationLabel label) {
  auto words = tokenize(phrase);
  return {std::vector<std::string>(words.begin(), words.end()), label};
}

}  // namespace

const RelationLexicon& RelationLexicon::standard() {
  static const RelationLexicon lexicon({
      entry("inside", RelationLabel::inside),
      entry("in", RelationLabel::inside),
      entry("into", RelationLabel::inside),
      entry("left of", RelationLabel::left),
      entry("to the left of", RelationLabel::left),
      entry("right of", RelationLabel::right),
      entry("to the right of", RelationLabel::right),
      entry("in front of", RelationLabel::in_front),
      entry("behind", RelationLabel::behind),
      entry("on top of", RelationLabel::on_top),
      entry("on", RelationLabel::on_top),
  });
  return lexicon;
}

RelationLexicon::RelationLexicon(std::vector<LexiconEntry> entries)
    : entries_(std::move(entries)) {
  for (RelationLabel r : kAllRelations) {
    bool found = false;
    for (const auto& e : entries_) found = found || e.label == r;
    if (!found) throw InvalidArgument("lexicon has no phrase for " + std::string(to_string(r)));
  }
}

std::optional<RelationMatch> RelationLexicon::find(std::span<const std::string> words) const {
  for (std::size_t pos = 0; pos < words.size(); ++pos) {
    const LexiconEntry* best = nullptr;
    for (const auto& e : entries_) {
      if (pos + e.phrase.size() > words.size()) continue;
      bool match = true;
      for (std::size_t k = 0; k < e.phrase.size() && match; ++k) {
        match = words[pos + k] == e.phrase[k];
      }
      if (match && (!best || e.phrase.size() > best->phrase.size())) best = &e;
    }
    if (best) return RelationMatch{best->label, pos, best->phrase.size()};
  }
  return std::nullopt;
}

const std::vector<std::string>& RelationLexicon::phrase_for(RelationLabel label) const {
  for (const auto& e : entries_) {
    if (e.label == label) return e.phrase;
  }
  throw InvalidArgument("no phrase");
}

std::vector<std::vector<std::string>> RelationLexicon::phrases_for(RelationLabel label) const {
  std::vector<std::vector<std::string>> out;
  for (const auto& e : entries_) {
    // "into" reads as a command, not as a description of where something is.
    if (e.label == label && !(e.phrase.size() == 1 && e.phrase[0] == "into")) {
      out.push_back(e.phrase);
    }
  }
  return out;
}

RelationMatch spot_relation_match(std::span<const std::string> words) {
  if (words.empty()) throw InvalidArgument("spot_relation needs at least one token");
  auto m = RelationLexicon::standard().find(words);
  if (!m) throw NoRelationFound("no relation phrase in '" + detokenize(words) + "'");
  return *m;
}

RelationLabel spot_relation(std::span<const std::string> words) {
  return spot_relation_match(words).label;
}

}  // namespace tabletop
