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
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"

namespace tabletop {

/// Closed token inventory. Indices are dense from 0; BOS, EOS and UNK
/// occupy 0, 1 and 2.
class Vocabulary {
 public:
  static constexpr int kBos = 0;
  static constexpr int kEos = 1;
  static constexpr int kUnk = 2;

  /// The full grammar inventory in a fixed order.
  static Vocabulary standard();
  static Vocabulary from_json(const nlohmann::json& j);

  explicit Vocabulary(std::vector<std::string> tokens);

  int size() const { return static_cast<int>(tokens_.size()); }
  /// UNK for out-of-vocabulary words.
  int index(std::string_view word) const;
  bool contains(std::string_view word) const;
  const std::string& token(int index) const { return tokens_.at(index); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  std::vector<int> encode(std::span<const std::string> words) const;
  /// Throws UnknownToken instead of mapping to UNK.
  std::vector<int> encode_strict(std::span<const std::string> words) const;
  /// Joins tokens with single spaces, dropping BOS/EOS.
  std::string decode(std::span<const int> ids) const;

  nlohmann::json to_json() const;
  std::uint64_t hash() const;

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.tokens_ == b.tokens_;
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

/// Lower-cases, strips punctuation and splits on whitespace.
std::vector<std::string> tokenize(std::string_view text);
std::string detokenize(std::span<const std::string> words);

}  // namespace tabletop
