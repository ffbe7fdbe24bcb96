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
#include "tabletop/spatial/aux.hpp"

#include <algorithm>

#include "tabletop/common/error.hpp"
#include "tabletop/nn/checkpoint.hpp"

namespace tabletop {

using nn::Var;

PlacementQuery PlacementQuery::make(Scene scene, TableId table, int ref_id) {
  PlacementQuery q;
  q.scene = std::move(scene);
  q.table = table;
  q.ref_id = ref_id;
  const SceneObject& r = q.ref();
  if (r.table != table) throw InvalidArgument("reference is not on the requested table");
  q.image = render(q.scene, table);
  q.ref_mask = footprint_mask(r, q.grid());
  return q;
}

const SceneObject& PlacementQuery::ref() const {
  const SceneObject* r = scene.find(ref_id);
  if (!r) throw ObjectNotFound("reference " + std::to_string(ref_id));
  return *r;
}

bool relation_eligible(RelationLabel r, const SceneObject& ref) {
  if (r == RelationLabel::inside) return ref.is_container();
  if (r == RelationLabel::on_top) return ref.is_flat_topped();
  return true;
}

ImageTensor implant(const ImageTensor& image, Cell at, int footprint) {
  if (at.x < 0 || at.y < 0 || at.x >= image.w || at.y >= image.h) {
    throw OutOfBounds("implant location outside the grid");
  }
  ImageTensor out = image;
  const int lo = -(footprint - 1) / 2, hi = footprint / 2;
  for (int y = std::max(0, at.y + lo); y <= std::min(image.h - 1, at.y + hi); ++y) {
    for (int x = std::max(0, at.x + lo); x <= std::min(image.w - 1, at.x + hi); ++x) {
      for (int c = 0; c < image.channels; ++c) out.at(c, y, x) = 0.0;
      out.at(RenderChannels::kOccupancy, y, x) = 1.0;
      out.at(RenderChannels::kZLayer, y, x) = 1.0;
    }
  }
  return out;
}

Eigen::Matrix<double, kNumRelations, 1> oracle_posterior(const SceneObject& ref, Cell at,
                                                         const RelationParams& rel) {
  const RelationSet s = relation_oracle(BBox::unit(at), ref, rel);
  Eigen::Matrix<double, kNumRelations, 1> p;
  int n = 0;
  for (int r = 0; r < kNumRelations; ++r) n += s[r];
  for (int r = 0; r < kNumRelations; ++r) p[r] = s[r] ? 1.0 / n : 0.0;
  return p;
}

std::string_view to_string(AuxMode m) { return m == AuxMode::learned ? "learned" : "oracle"; }

AuxClassifier AuxClassifier::oracle(const RelationParams& relation) {
  AuxClassifier c;
  c.mode = AuxMode::oracle;
  c.relation = relation;
  return c;
}

AuxClassifier AuxClassifier::create_learned(int hidden, std::uint64_t seed) {
  if (hidden < 1) throw InvalidArgument("hidden size must be positive");
  AuxClassifier c;
  c.mode = AuxMode::learned;
  c.hidden = hidden;
  Rng rng(seed);
  nn::Linear::create(c.params, "aux.l1", kAuxFeatureDim, hidden, rng);
  nn::Linear::create(c.params, "aux.l2", hidden, hidden, rng);
  nn::Linear::create(c.params, "aux.out", hidden, kNumRelations, rng);
  return c;
}

void AuxClassifier::save(const std::filesystem::path& path, const json& extra) const {
  nn::Checkpoint ck;
  ck.params = params;
  ck.metadata = {{"kind", "aux"},
                 {"schema", 1},
                 {"mode", std::string(to_string(mode))},
                 {"hidden", hidden},
                 {"scale", scale},
                 {"footprint", footprint},
                 {"proximity_gap", relation.proximity_gap},
                 {"extra", extra.is_null() ? json::object() : extra}};
  nn::save_checkpoint(path, ck);
}

AuxClassifier AuxClassifier::load(const std::filesystem::path& path) {
  auto ck = nn::load_checkpoint(path);
  try {
    const auto& m = ck.metadata;
    if (m.at("kind") != "aux") throw CheckpointError("not an auxiliary-classifier checkpoint");
    RelationParams rel;
    rel.proximity_gap = m.at("proximity_gap").get<int>();
    AuxClassifier c = m.at("mode") == "learned" ? create_learned(m.at("hidden").get<int>(), 0)
                                                : oracle(rel);
    c.relation = rel;
    c.scale = m.at("scale").get<double>();
    c.footprint = m.at("footprint").get<int>();
    for (const auto& [name, p] : c.params.all()) {
      if (!ck.params.contains(name) || ck.params.at(name).value.rows() != p.value.rows() ||
          ck.params.at(name).value.cols() != p.value.cols()) {
        throw CheckpointError("aux parameter '" + name + "' missing or misshapen");
      }
    }
    c.params = std::move(ck.params);
    return c;
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("bad aux metadata: ") + e.what());
  }
}

Eigen::VectorXd aux_features(const ImageTensor& img, const Mask& ref_mask, double scale) {
  const BBox ext = mask_extent(ref_mask, img.h, img.w);
  double sx = 0, sy = 0;
  int n_imp = 0, n_ref = 0;
  Eigen::VectorXd f = Eigen::VectorXd::Zero(kAuxFeatureDim);
  for (int y = 0; y < img.h; ++y) {
    for (int x = 0; x < img.w; ++x) {
      double cat = 0.0;
      for (int c = 0; c < kNumCategories; ++c) cat += img.at(RenderChannels::kCategory0 + c, y, x);
      if (img.at(RenderChannels::kOccupancy, y, x) > 0.5 && cat < 0.5) {
        sx += x + 0.5;
        sy += y + 0.5;
        ++n_imp;
      }
      if (ref_mask[std::size_t(y) * img.w + x]) {
        ++n_ref;
        for (int c = 0; c < kNumCategories; ++c) f[7 + c] += img.at(RenderChannels::kCategory0 + c, y, x);
        f[7 + kNumCategories] += img.at(RenderChannels::kZLayer, y, x);
      }
    }
  }
  if (n_imp == 0) throw InvalidArgument("no implant visible");
  const double cx = sx / n_imp, cy = sy / n_imp, s = 1.0 / scale;
  f[0] = (cx - ext.x0) * s;
  f[1] = (ext.x1 - cx) * s;
  f[2] = (cy - ext.y0) * s;
  f[3] = (ext.y1 - cy) * s;
  f[4] = std::min(f[0], f[1]);
  f[5] = std::min(f[2], f[3]);
  f[6] = std::min(f[4], f[5]);
  f.tail(kNumCategories + 1) /= n_ref;
  return f;
}

Eigen::VectorXd aux_features_at(const ImageTensor& img, const Mask& ref_mask, Cell at,
                                int footprint, double scale) {
  const BBox ext = mask_extent(ref_mask, img.h, img.w);
  const int lo = -(footprint - 1) / 2, hi = footprint / 2;
  const int ix0 = std::max(0, at.x + lo), ix1 = std::min(img.w - 1, at.x + hi);
  const int iy0 = std::max(0, at.y + lo), iy1 = std::min(img.h - 1, at.y + hi);
  const auto in_implant = [&](int x, int y) { return x >= ix0 && x <= ix1 && y >= iy0 && y <= iy1; };
  Eigen::VectorXd f = Eigen::VectorXd::Zero(kAuxFeatureDim);
  int n_ref = 0;
  for (int y = ext.y0; y < ext.y1; ++y) {
    for (int x = ext.x0; x < ext.x1; ++x) {
      if (!ref_mask[std::size_t(y) * img.w + x]) continue;
      ++n_ref;
      if (in_implant(x, y)) {
        f[7 + kNumCategories] += 1.0;
        continue;
      }
      for (int c = 0; c < kNumCategories; ++c) f[7 + c] += img.at(RenderChannels::kCategory0 + c, y, x);
      f[7 + kNumCategories] += img.at(RenderChannels::kZLayer, y, x);
    }
  }
  const double cx = 0.5 * (ix0 + ix1 + 1), cy = 0.5 * (iy0 + iy1 + 1), s = 1.0 / scale;
  f[0] = (cx - ext.x0) * s;
  f[1] = (ext.x1 - cx) * s;
  f[2] = (cy - ext.y0) * s;
  f[3] = (ext.y1 - cy) * s;
  f[4] = std::min(f[0], f[1]);
  f[5] = std::min(f[2], f[3]);
  f[6] = std::min(f[4], f[5]);
  f.tail(kNumCategories + 1) /= n_ref;
  return f;
}

Var aux_forward(const nn::Binder& b, const Eigen::MatrixXd& features) {
  Var x = b.tape().constant(features);
  Var h1 = nn::relu(b.linear("aux.l1", x));
  Var h2 = nn::relu(b.linear("aux.l2", h1));
  return nn::sigmoid(b.linear("aux.out", h2));
}

Eigen::Matrix<double, kNumRelations, 1> aux_posterior(const PlacementQuery& q, Cell at,
                                                      const AuxClassifier& clf) {
  if (!q.grid().contains(at)) throw OutOfBounds("posterior location outside the grid");
  if (clf.mode == AuxMode::oracle) return oracle_posterior(q.ref(), at, clf.relation);
  const Eigen::VectorXd f = aux_features_at(q.image, q.ref_mask, at, clf.footprint, clf.scale);
  nn::Tape t;
  nn::Binder b(t, std::as_const(clf.params));
  return aux_forward(b, f).value().col(0);
}

RelationSet posterior_set(const Eigen::Matrix<double, kNumRelations, 1>& p) {
  RelationSet s{};
  for (int r = 0; r < kNumRelations; ++r) s[r] = p[r] >= 0.25;
  return s;
}

}  // namespace tabletop
