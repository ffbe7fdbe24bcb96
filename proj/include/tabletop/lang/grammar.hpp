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

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tabletop/lang/vocabulary.hpp"
#include "tabletop/world/world.hpp"

namespace tabletop {

enum class ClauseKind : std::uint8_t { attribute, location, relational };
inline constexpr int kNumClauseKinds = 3;
std::string_view to_string(ClauseKind k);
std::optional<ClauseKind> parse_clause_kind(std::string_view s);

/// Maximum number of words in a referring expression (EOS excluded).
inline constexpr int kMaxExpressionWords = 12;

/// "the [size] [color] <category | thing | object>". An empty category
/// means a hypernym that matches every category.
struct AttributeDesc {
  std::optional<Size> size;
  std::optional<Color> color;
  std::optional<Category> category;
  std::string hypernym = "thing";

  bool matches(const SceneObject& o) const;
  friend bool operator==(const AttributeDesc&, const AttributeDesc&) = default;
};

enum class Ordinal : std::uint8_t { leftmost, rightmost, middle, second, third };

/// Parsed meaning of one grammar expression.
struct ExpressionSemantics {
  ClauseKind kind = ClauseKind::attribute;
  AttributeDesc subject;
  Ordinal ordinal = Ordinal::leftmost;            // location only
  RelationLabel relation = RelationLabel::left;   // relational only
  std::vector<std::string> relation_phrase;       // relational only
  AttributeDesc landmark;                         // relational only

  friend bool operator==(const ExpressionSemantics&, const ExpressionSemantics&) = default;
};

std::vector<std::string> realize(const ExpressionSemantics& sem);
/// Inverse of realize for grammar output; nullopt for anything else.
std::optional<ExpressionSemantics> parse_expression(std::span<const std::string> words);

/// Ids of the objects on `table` the expression refers to, ascending.
///
/// Ordinals count same-category objects by center x, ties by y then id;
/// "middle" needs an odd count >= 3, "second"/"third" count from the left.
std::vector<int> denotation(const ExpressionSemantics& sem, const Scene& scene, TableId table,
                            const RelationParams& params = {});

struct ExpressionSample {
  int scene_ref = 0;
  std::vector<int> tokens;  ///< ends with EOS
  int target_id = 0;
  ClauseKind clause_kind = ClauseKind::attribute;
  bool is_ambiguous = false;

  friend bool operator==(const ExpressionSample&, const ExpressionSample&) = default;
};

/// Draws one realization of the requested template for `target_id`.
///
/// With ambiguity=false the expression denotes exactly the target; with
/// ambiguity=true it denotes the target plus at least one other object.
/// Throws NoDiscriminativeExpression when no realization qualifies.
ExpressionSample generate_expression(const Scene& scene, int target_id, ClauseKind kind,
                                     bool ambiguity, std::uint64_t seed,
                                     const Vocabulary& vocab = Vocabulary::standard(),
                                     const RelationParams& params = {});

/// Every realization of a clause kind that mentions the target (used by the
/// generator and by tests that enumerate the grammar).
std::vector<ExpressionSemantics> enumerate_expressions(const Scene& scene, int target_id,
                                                       ClauseKind kind,
                                                       const RelationParams& params = {});

// ---------------------------------------------------------------------------
// Instructions wrapping referring expressions

std::vector<std::string> pick_instruction(std::span<const std::string> expression,
                                          std::uint64_t seed);
std::vector<std::string> place_instruction(RelationLabel relation,
                                           std::span<const std::string> reference,
                                           std::uint64_t seed);

/// Drops a leading command ("pick up", "bring me", "no", ...) so that only
/// the referring expression remains.
std::vector<std::string> strip_command(std::span<const std::string> words);

}  // namespace tabletop
