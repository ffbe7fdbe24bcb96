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

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tabletop/world/types.hpp"

namespace tabletop {

struct LexiconEntry {
  std::vector<std::string> phrase;
  RelationLabel label;
};

/// A relation keyword found in an utterance.
struct RelationMatch {
  RelationLabel label;
  std::size_t start = 0;   ///< first token of the phrase
  std::size_t length = 0;  ///< phrase length in tokens
};

/// Phrase -> relation table used for keyword spotting.
class RelationLexicon {
 public:
  static const RelationLexicon& standard();

  explicit RelationLexicon(std::vector<LexiconEntry> entries);

  const std::vector<LexiconEntry>& entries() const { return entries_; }

  /// Scans left to right; at the first position where any phrase matches,
  /// the longest matching phrase wins.
  std::optional<RelationMatch> find(std::span<const std::string> words) const;

  /// Canonical phrase for a label (the first listed).
  const std::vector<std::string>& phrase_for(RelationLabel label) const;
  /// Phrases the expression grammar may use for a label.
  std::vector<std::vector<std::string>> phrases_for(RelationLabel label) const;

 private:
  std::vector<LexiconEntry> entries_;
};

/// Throws NoRelationFound when no phrase occurs in the tokens.
RelationLabel spot_relation(std::span<const std::string> words);
RelationMatch spot_relation_match(std::span<const std::string> words);

}  // namespace tabletop
