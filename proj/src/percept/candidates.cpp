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

#include "tabletop/percept/candidates.hpp"

#include <algorithm>
#include <cmath>

#include "tabletop/common/rng.hpp"

namespace tabletop {

namespace {

BBox jitter_box(const BBox& b, const Grid& grid, int max_cells, Rng& rng) {
  for (int j = max_cells; j > 0; j /= 2) {
    for (int attempt = 0; attempt < 8; ++attempt) {
      BBox out{b.x0 + static_cast<int>(rng.uniform_int(-j, j)),
               b.y0 + static_cast<int>(rng.uniform_int(-j, j)),
               b.x1 + static_cast<int>(rng.uniform_int(-j, j)),
               b.y1 + static_cast<int>(rng.uniform_int(-j, j))};
      out.x0 = std::clamp(out.x0, 0, grid.w - 1);
      out.y0 = std::clamp(out.y0, 0, grid.h - 1);
      out.x1 = std::clamp(out.x1, out.x0 + 1, grid.w);
      out.y1 = std::clamp(out.y1, out.y0 + 1, grid.h);
      if (iou(out, b) > 0.5) return out;
    }
  }
  return b;
}

void one_hot_group(Eigen::VectorXd& v, int offset, int n, int hot, double noise, Rng& rng) {
  for (int i = 0; i < n; ++i) v[offset + i] = i == hot ? 1.0 : 0.0;
  if (noise <= 0.0) return;
  double total = 0.0;
  std::vector<double> r(n);
  for (auto& x : r) {
    x = rng.uniform();
    total += x;
  }
  for (int i = 0; i < n; ++i) v[offset + i] = (1.0 - noise) * v[offset + i] + noise * r[i] / total;
}

}  // namespace

Eigen::VectorXd ObjectCandidate::location_input() const {
  Eigen::VectorXd v(kLocationInputDim);
  v.head(kLoc5Dim) = loc5;
  for (int k = 0; k < kContextSlots; ++k) {
    v.segment(kLoc5Dim + k * kOffsetDim, kOffsetDim) = same_cat_context.row(k).transpose();
  }
  return v;
}

Eigen::VectorXd offset_encoding(const BBox& self, const BBox& other) {
  const double diag = std::sqrt(double(self.width()) * self.width() +
                                double(self.height()) * self.height());
  const double s = diag > 0 ? 1.0 / diag : 1.0;
  Eigen::VectorXd v(kOffsetDim);
  v << (other.x0 - self.x0) * s, (other.y0 - self.y0) * s, (other.x1 - self.x1) * s,
      (other.y1 - self.y1) * s,
      self.area() > 0 ? double(other.area()) / self.area() : 0.0;
  return v;
}

std::vector<ObjectCandidate> encode_candidates(const Scene& scene, TableId table,
                                               const JitterConfig& jitter, std::uint64_t seed) {
  const Grid& grid = scene.grid(table);
  const auto objs = scene.on_table(table);
  const double grid_area = double(grid.w) * grid.h;

  std::vector<ObjectCandidate> out;
  out.reserve(objs.size());
  for (const SceneObject* o : objs) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(o->id)));
    ObjectCandidate c;
    c.id = o->id;
    c.true_bbox = o->footprint();
    c.bbox = jitter.max_cells > 0 ? jitter_box(c.true_bbox, grid, jitter.max_cells, rng)
                                  : c.true_bbox;
    c.mask = footprint_mask(*o, grid);
    c.appearance = Eigen::VectorXd::Zero(kAppearanceDim);
    one_hot_group(c.appearance, 0, kNumColors, index_of(o->color), jitter.appearance_noise, rng);
    one_hot_group(c.appearance, kNumColors, kNumCategories, index_of(o->category),
                  jitter.appearance_noise, rng);
    one_hot_group(c.appearance, kNumColors + kNumCategories, kNumSizes, index_of(o->size),
                  jitter.appearance_noise, rng);
    c.appearance[kAppearanceDim - 1] = c.bbox.area() / grid_area;
    c.loc5 = Eigen::VectorXd(kLoc5Dim);
    c.loc5 << double(c.bbox.x0) / grid.w, double(c.bbox.y0) / grid.h, double(c.bbox.x1) / grid.w,
        double(c.bbox.y1) / grid.h, c.bbox.area() / grid_area;
    out.push_back(std::move(c));
  }

  for (std::size_t i = 0; i < out.size(); ++i) {
    auto& c = out[i];
    struct Neighbor {
      double dist;
      int id;
      std::size_t index;
    };
    std::vector<Neighbor> all;
    for (std::size_t k = 0; k < out.size(); ++k) {
      if (k == i) continue;
      const double dx = out[k].bbox.center_x() - c.bbox.center_x();
      const double dy = out[k].bbox.center_y() - c.bbox.center_y();
      all.push_back({std::sqrt(dx * dx + dy * dy), out[k].id, k});
    }
    std::sort(all.begin(), all.end(), [](const Neighbor& a, const Neighbor& b) {
      return a.dist != b.dist ? a.dist < b.dist : a.id < b.id;
    });
    c.same_cat_context = Eigen::MatrixXd::Zero(kContextSlots, kOffsetDim);
    c.any_cat_context = Eigen::MatrixXd::Zero(kContextSlots, kAnySlotDim);
    for (const auto& n : all) {
      const auto& other = out[n.index];
      const Eigen::VectorXd off = offset_encoding(c.bbox, other.bbox);
      if (objs[n.index]->category == objs[i]->category && c.n_same < kContextSlots) {
        c.same_cat_context.row(c.n_same++) = off.transpose();
      }
      if (c.n_any < kContextSlots) {
        c.any_cat_context.row(c.n_any).head(kAppearanceDim) = other.appearance.transpose();
        c.any_cat_context.row(c.n_any).tail(kOffsetDim) = off.transpose();
        ++c.n_any;
      }
    }
  }
  return out;
}

const ObjectCandidate* find_candidate(const std::vector<ObjectCandidate>& c, int id) {
  for (const auto& x : c) {
    if (x.id == id) return &x;
  }
  return nullptr;
}

}  // namespace tabletop
