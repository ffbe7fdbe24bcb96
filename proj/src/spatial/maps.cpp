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
#include "tabletop/spatial/maps.hpp"

#include <algorithm>
#include <cmath>

#include "tabletop/common/error.hpp"
#include "tabletop/common/png.hpp"
#include "tabletop/nn/checkpoint.hpp"

namespace tabletop {

using nn::Var;

Eigen::Matrix<double, kNumRelations, 1> ProbMaps::at(Cell c) const {
  Eigen::Matrix<double, kNumRelations, 1> v;
  for (int r = 0; r < kNumRelations; ++r) v[r] = channels[r](c.y, c.x);
  return v;
}

json ProbMaps::channel_json(RelationLabel r) const {
  json rows = json::array();
  const auto& m = channel(r);
  for (int y = 0; y < h; ++y) {
    json row = json::array();
    for (int x = 0; x < w; ++x) row.push_back(m(y, x));
    rows.push_back(std::move(row));
  }
  return rows;
}

json ProbMaps::to_json() const {
  json j = {{"h", h}, {"w", w}, {"relations", json::object()}};
  for (auto r : kAllRelations) j["relations"][std::string(to_string(r))] = channel_json(r);
  return j;
}

BBox mask_extent(const Mask& mask, int h, int w) {
  if (mask.size() != std::size_t(h) * w) throw DimensionMismatch("mask size does not match grid");
  BBox b{w, h, 0, 0};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!mask[std::size_t(y) * w + x]) continue;
      b.x0 = std::min(b.x0, x);
      b.y0 = std::min(b.y0, y);
      b.x1 = std::max(b.x1, x + 1);
      b.y1 = std::max(b.y1, y + 1);
    }
  }
  if (b.x1 == 0) throw InvalidArgument("reference mask is empty");
  return b;
}

json PlacementNetConfig::to_json() const { return {{"hidden", hidden}, {"scale", scale}}; }

PlacementNetConfig PlacementNetConfig::from_json(const json& j) {
  PlacementNetConfig c;
  for (const auto& [k, v] : j.items()) {
    if (k == "hidden") c.hidden = v.get<int>();
    else if (k == "scale") c.scale = v.get<double>();
    else throw InvalidArgument("unknown placement net key '" + k + "'");
  }
  if (c.hidden < 1 || !(c.scale > 0)) throw InvalidArgument("bad placement net config");
  return c;
}

PlacementNet PlacementNet::create(const PlacementNetConfig& config, std::uint64_t seed) {
  PlacementNet net;
  net.config = config;
  Rng rng(seed);
  nn::Linear::create(net.params, "place.l1", kPlacementFeatureDim, config.hidden, rng);
  nn::Linear::create(net.params, "place.l2", config.hidden, config.hidden, rng);
  nn::Linear::create(net.params, "place.out", config.hidden, kNumRelations, rng);
  return net;
}

void PlacementNet::save(const std::filesystem::path& path, const json& extra) const {
  nn::Checkpoint ck;
  ck.params = params;
  ck.metadata = {{"kind", "placement"},
                 {"schema", 1},
                 {"config", config.to_json()},
                 {"extra", extra.is_null() ? json::object() : extra}};
  nn::save_checkpoint(path, ck);
}

PlacementNet PlacementNet::load(const std::filesystem::path& path) {
  auto ck = nn::load_checkpoint(path);
  try {
    if (ck.metadata.at("kind") != "placement") throw CheckpointError("not a placement checkpoint");
    PlacementNet ref = create(PlacementNetConfig::from_json(ck.metadata.at("config")), 0);
    for (const auto& [name, p] : ref.params.all()) {
      if (!ck.params.contains(name) ||
          ck.params.at(name).value.rows() != p.value.rows() ||
          ck.params.at(name).value.cols() != p.value.cols()) {
        throw CheckpointError("placement parameter '" + name + "' missing or misshapen");
      }
    }
    ref.params = std::move(ck.params);
    return ref;
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("bad placement metadata: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw CheckpointError(e.what());
  }
}

Eigen::MatrixXd placement_features(const ImageTensor& image, const Mask& ref_mask, double scale) {
  const int h = image.h, w = image.w;
  if (image.channels != RenderChannels::kCount) throw DimensionMismatch("unexpected channel count");
  if (ref_mask.size() != std::size_t(h) * w) throw DimensionMismatch("image and mask differ in size");
  const BBox ext = mask_extent(ref_mask, h, w);

  Eigen::VectorXd pooled = Eigen::VectorXd::Zero(kNumCategories + 1);
  int n = 0;
  for (int y = ext.y0; y < ext.y1; ++y) {
    for (int x = ext.x0; x < ext.x1; ++x) {
      if (!ref_mask[std::size_t(y) * w + x]) continue;
      ++n;
      for (int c = 0; c < kNumCategories; ++c) pooled[c] += image.at(RenderChannels::kCategory0 + c, y, x);
      pooled[kNumCategories] += image.at(RenderChannels::kZLayer, y, x);
    }
  }
  pooled /= n;

  Eigen::MatrixXd f(kPlacementFeatureDim, std::size_t(h) * w);
  const double s = 1.0 / scale;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = std::size_t(y) * w + x;
      f(0, i) = (x + 0.5 - ext.x0) * s;
      f(1, i) = (ext.x1 - x - 0.5) * s;
      f(2, i) = (y + 0.5 - ext.y0) * s;
      f(3, i) = (ext.y1 - y - 0.5) * s;
      f(4, i) = std::min(f(0, i), f(1, i));
      f(5, i) = std::min(f(2, i), f(3, i));
      f(6, i) = std::min(f(4, i), f(5, i));
      f.block(7, i, kNumCategories + 1, 1) = pooled;
      f(7 + kNumCategories + 1, i) = image.at(RenderChannels::kOccupancy, y, x);
      f(7 + kNumCategories + 2, i) = ref_mask[i] ? 1.0 : 0.0;
    }
  }
  return f;
}

Var predict_cells(const nn::Binder& b, const Eigen::MatrixXd& features) {
  Var x = b.tape().constant(features);
  Var h1 = nn::relu(b.linear("place.l1", x));
  Var h2 = nn::relu(b.linear("place.l2", h1));
  return nn::sigmoid(b.linear("place.out", h2));
}

ProbMaps predict_maps_from_features(const Eigen::MatrixXd& features, int h, int w,
                                    const PlacementNet& net) {
  const auto& p = net.params;
  const auto layer = [&](const std::string& name, const Eigen::MatrixXd& x) {
    Eigen::MatrixXd y = p.at(name + ".w").value * x;
    y.colwise() += p.at(name + ".b").value.col(0);
    return y;
  };
  const Eigen::MatrixXd h1 = layer("place.l1", features).cwiseMax(0.0);
  const Eigen::MatrixXd h2 = layer("place.l2", h1).cwiseMax(0.0);
  const Eigen::MatrixXd out = (1.0 + (-layer("place.out", h2)).array().exp()).inverse().matrix();
  ProbMaps maps;
  maps.h = h;
  maps.w = w;
  for (int r = 0; r < kNumRelations; ++r) {
    maps.channels[r].resize(h, w);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) maps.channels[r](y, x) = out(r, std::size_t(y) * w + x);
    }
  }
  return maps;
}

ProbMaps predict_maps(const ImageTensor& image, const Mask& ref_mask, const PlacementNet& net) {
  return predict_maps_from_features(placement_features(image, ref_mask, net.config.scale), image.h,
                                    image.w, net);
}

std::vector<double> placement_distribution(const ProbMaps& maps, RelationLabel r,
                                           const Mask& ref_mask) {
  if (ref_mask.size() != std::size_t(maps.h) * maps.w) {
    throw DimensionMismatch("mask does not match maps");
  }
  const auto& ch = maps.channel(r);
  const bool mask_ref = is_directional(r);
  std::vector<double> p(std::size_t(maps.h) * maps.w, 0.0);
  double total = 0.0;
  for (int y = 0; y < maps.h; ++y) {
    for (int x = 0; x < maps.w; ++x) {
      const std::size_t i = std::size_t(y) * maps.w + x;
      if (mask_ref && ref_mask[i]) continue;
      p[i] = std::max(0.0, ch(y, x));
      total += p[i];
    }
  }
  if (!(total > 0.0)) {
    throw NoMassAvailable(std::string("channel '") + std::string(to_string(r)) +
                          "' has no mass outside the reference");
  }
  for (auto& v : p) v /= total;
  return p;
}

std::vector<double> cumulative(std::span<const double> p) {
  std::vector<double> cdf(p.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) cdf[i] = acc += p[i];
  return cdf;
}

Cell draw_cell(std::span<const double> cdf, int w, Rng& rng) {
  // The first entry exceeding u always carries positive mass.
  const double u = rng.uniform() * cdf.back();
  auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  if (it == cdf.end()) {
    it = std::lower_bound(cdf.begin(), cdf.end(), cdf.back());
  }
  const auto i = static_cast<std::size_t>(it - cdf.begin());
  return {static_cast<int>(i % w), static_cast<int>(i / w)};
}

Cell sample_location(const ProbMaps& maps, RelationLabel r, const Mask& ref_mask,
                     std::uint64_t seed) {
  const auto p = placement_distribution(maps, r, ref_mask);
  const auto cdf = cumulative(p);
  Rng rng(seed);
  return draw_cell(cdf, maps.w, rng);
}

void write_heatmap_pngs(const ProbMaps& maps, const std::filesystem::path& dir,
                        const std::string& prefix) {
  std::filesystem::create_directories(dir);
  std::vector<std::uint8_t> px(std::size_t(maps.h) * maps.w);
  for (auto r : kAllRelations) {
    const auto& ch = maps.channel(r);
    for (int y = 0; y < maps.h; ++y) {
      for (int x = 0; x < maps.w; ++x) {
        px[std::size_t(y) * maps.w + x] =
            static_cast<std::uint8_t>(std::lround(std::clamp(ch(y, x), 0.0, 1.0) * 255.0));
      }
    }
    write_png_gray(dir / (prefix + "_" + std::string(to_string(r)) + ".png"), maps.w, maps.h, px);
  }
}

}  // namespace tabletop
