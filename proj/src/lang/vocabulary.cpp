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

#include "tabletop/lang/vocabulary.hpp"

#include <cctype>

#include "tabletop/common/error.hpp"
#include "tabletop/common/rng.hpp"
#include "tabletop/world/types.hpp"

namespace tabletop {

Vocabulary Vocabulary::standard() {
  std::vector<std::string> t = {"<bos>", "<eos>", "<unk>",
                                "the",   "a",     "it",    "of",    "to",     "from",
                                "thing", "object"};
  for (auto s : kAllSizes) t.emplace_back(to_string(s));
  for (auto c : kAllColors) t.emplace_back(to_string(c));
  for (auto c : kAllCategories) t.emplace_back(to_string(c));
  for (const char* w : {"leftmost", "rightmost", "middle", "second", "third", "left", "right",
                        "on", "top", "in", "front", "inside", "into", "behind",
                        "pick", "up", "fetch", "grab", "get", "take", "bring", "me",
                        "place", "put", "move", "set", "drop",
                        "yes", "yeah", "no", "nope", "please"}) {
    t.emplace_back(w);
  }
  return Vocabulary(std::move(t));
}

Vocabulary Vocabulary::from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw SchemaError("vocabulary must be a JSON array");
  std::vector<std::string> tokens;
  for (const auto& v : j) tokens.push_back(v.get<std::string>());
  return Vocabulary(std::move(tokens));
}

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  if (tokens_.size() < 3 || tokens_[kBos] != "<bos>" || tokens_[kEos] != "<eos>" ||
      tokens_[kUnk] != "<unk>") {
    throw SchemaError("vocabulary must start with <bos>, <eos>, <unk>");
  }
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!index_.emplace(tokens_[i], static_cast<int>(i)).second) {
      throw SchemaError("duplicate token '" + tokens_[i] + "'");
    }
  }
}

int Vocabulary::index(std::string_view word) const {
  auto it = index_.find(std::string(word));
  return it == index_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(std::string_view word) const {
  return index_.count(std::string(word)) > 0;
}

std::vector<int> Vocabulary::encode(std::span<const std::string> words) const {
  std::vector<int> out;
  out.reserve(words.size());
  for (const auto& w : words) out.push_back(index(w));
  return out;
}

std::vector<int> Vocabulary::encode_strict(std::span<const std::string> words) const {
  std::vector<int> out;
  out.reserve(words.size());
  for (const auto& w : words) {
    auto it = index_.find(w);
    if (it == index_.end()) throw UnknownToken("'" + w + "'");
    out.push_back(it->second);
  }
  return out;
}

std::string Vocabulary::decode(std::span<const int> ids) const {
  std::string out;
  for (int id : ids) {
    if (id == kBos || id == kEos) continue;
    if (!out.empty()) out += ' ';
    out += token(id);
  }
  return out;
}

nlohmann::json Vocabulary::to_json() const { return nlohmann::json(tokens_); }

std::uint64_t Vocabulary::hash() const {
  const std::string s = to_json().dump();
  return fnv1a(s.data(), s.size());
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c) || c == '_' || c == '\'' || c == '<' || c == '>') {
      cur += static_cast<char>(std::tolower(c));
    } else {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::string detokenize(std::span<const std::string> words) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

}  // namespace tabletop
