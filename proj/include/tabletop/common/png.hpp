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
#include <span>
#include <vector>

namespace tabletop {

/// 8-bit grayscale PNG, row-major pixels.
void write_png_gray(const std::filesystem::path& path, int width, int height,
                    std::span<const std::uint8_t> pixels);
/// 8-bit RGB PNG, row-major interleaved pixels.
void write_png_rgb(const std::filesystem::path& path, int width, int height,
                   std::span<const std::uint8_t> pixels);

struct PngImage {
  int width = 0;
  int height = 0;
  int channels = 0;  ///< 1 (gray) or 3 (rgb)
  std::vector<std::uint8_t> pixels;
};

/// Reads 8-bit gray or RGB PNGs (used by tests to check exports).
PngImage read_png(const std::filesystem::path& path);

}  // namespace tabletop
