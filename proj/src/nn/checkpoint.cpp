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

#include "tabletop/nn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "tabletop/common/error.hpp"
#include "tabletop/common/rng.hpp"

namespace tabletop::nn {

static_assert(std::endian::native == std::endian::little, "archive assumes little-endian host");

namespace {

constexpr char kMagic[4] = {'T', 'G', 'C', 'K'};

template <typename T>
void write_pod(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw CheckpointError("truncated archive");
  return v;
}

}  // namespace

std::uint64_t hash_matrix(const Matrix& m) {
  std::uint64_t h = fnv1a(m.data(), sizeof(double) * static_cast<std::size_t>(m.size()));
  const std::int64_t dims[2] = {m.rows(), m.cols()};
  return fnv1a(dims, sizeof dims, h);
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  nlohmann::json meta = ckpt.metadata;
  nlohmann::json arrays = nlohmann::json::array();
  for (const auto& [name, p] : ckpt.params.all()) {
    arrays.push_back({{"name", name},
                      {"rows", p.value.rows()},
                      {"cols", p.value.cols()},
                      {"hash", hash_matrix(p.value)}});
  }
  meta["arrays"] = arrays;
  const std::string text = meta.dump();

  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot open " + tmp + " for writing");
    out.write(kMagic, 4);
    write_pod<std::uint32_t>(out, kCheckpointVersion);
    write_pod<std::uint64_t>(out, text.size());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& [_, p] : ckpt.params.all()) {
      out.write(reinterpret_cast<const char*>(p.value.data()),
                static_cast<std::streamsize>(sizeof(double) * p.value.size()));
    }
    if (!out) throw CheckpointError("write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) throw CheckpointError("bad magic in " + path.string());
  const auto version = read_pod<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported archive version " + std::to_string(version));
  }
  const auto len = read_pod<std::uint64_t>(in);
  if (len > (1ULL << 30)) throw CheckpointError("metadata too large");
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw CheckpointError("truncated metadata");

  Checkpoint ckpt;
  try {
    ckpt.metadata = nlohmann::json::parse(text);
    for (const auto& a : ckpt.metadata.at("arrays")) {
      const auto rows = a.at("rows").get<long>();
      const auto cols = a.at("cols").get<long>();
      if (rows < 0 || cols < 0 || rows * cols > (1L << 28)) throw CheckpointError("bad array dims");
      Matrix m(rows, cols);
      in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(sizeof(double) * m.size()));
      if (!in) throw CheckpointError("truncated array " + a.at("name").get<std::string>());
      if (hash_matrix(m) != a.at("hash").get<std::uint64_t>()) {
        throw CheckpointError("hash mismatch for array " + a.at("name").get<std::string>());
      }
      ckpt.params.add_value(a.at("name").get<std::string>(), std::move(m));
    }
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("malformed metadata: ") + e.what());
  }
  ckpt.metadata.erase("arrays");
  return ckpt;
}

}  // namespace tabletop::nn
