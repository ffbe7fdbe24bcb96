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
#include <filesystem>

#include "json.hpp"

#include "tabletop/nn/tape.hpp"

namespace tabletop::nn {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Archive layout: "TGCK", u32 version, u64 metadata length, metadata JSON,
/// then every array as little-endian doubles in the order listed under
/// metadata["arrays"].
struct Checkpoint {
  nlohmann::json metadata = nlohmann::json::object();
  ParamStore params;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// FNV-1a over the raw bytes of a matrix.
std::uint64_t hash_matrix(const Matrix& m);

}  // namespace tabletop::nn
