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
#include "tabletop/spatial/train.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "tabletop/common/error.hpp"
#include "tabletop/nn/optim.hpp"

namespace tabletop {

using nn::Var;

json PlacementSceneConfig::to_json() const {
  json cats = json::array();
  for (auto c : ref_categories) cats.push_back(std::string(tabletop::to_string(c)));
  return {{"grid", grid},
          {"min_objects", min_objects},
          {"max_objects", max_objects},
          {"ref_categories", cats}};
}

PlacementSceneConfig PlacementSceneConfig::from_json(const json& j) {
  PlacementSceneConfig c;
  for (const auto& [k, v] : j.items()) {
    if (k == "grid") c.grid = v.get<int>();
    else if (k == "min_objects") c.min_objects = v.get<int>();
    else if (k == "max_objects") c.max_objects = v.get<int>();
    else if (k == "ref_categories") {
      for (const auto& x : v) {
        auto cat = parse_category(x.get<std::string>());
        if (!cat) throw InvalidArgument("unknown category " + x.dump());
        c.ref_categories.push_back(*cat);
      }
    } else {
      throw InvalidArgument("unknown placement scene key '" + k + "'");
    }
  }
  return c;
}

std::vector<PlacementQuery> build_placement_scenes(int n, const PlacementSceneConfig& cfg,
                                                   std::uint64_t seed) {
  if (n < 0 || cfg.min_objects < 1 || cfg.max_objects < cfg.min_objects || cfg.grid < 16) {
    throw InvalidArgument("bad placement scene config");
  }
  std::vector<PlacementQuery> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    Scene s;
    s.pick_table = {cfg.grid, cfg.grid};
    s.place_table = {cfg.grid, cfg.grid};
    s.rng_seed = derive_seed(seed, static_cast<std::uint64_t>(i));
    const Category ref_cat = cfg.ref_categories.empty()
                                 ? kAllCategories[rng.index(kNumCategories)]
                                 : cfg.ref_categories[rng.index(cfg.ref_categories.size())];
    const int ref_id = add_random_object(s, TableId::place, ref_cat, kAllColors[rng.index(kNumColors)],
                                         kAllSizes[rng.index(kNumSizes)], rng.next_u64())
                           .id;
    const int extra = static_cast<int>(rng.uniform_int(cfg.min_objects, cfg.max_objects)) - 1;
    for (int k = 0; k < extra; ++k) {
      add_random_object(s, TableId::place, kAllCategories[rng.index(kNumCategories)],
                        kAllColors[rng.index(kNumColors)], kAllSizes[rng.index(kNumSizes)],
                        rng.next_u64());
    }
    out.push_back(PlacementQuery::make(std::move(s), TableId::place, ref_id));
  }
  return out;
}

PlacementQuery mirror(const PlacementQuery& q) {
  Scene s = q.scene;
  for (auto& o : s.objects) {
    if (o.table == q.table) o.center.x = s.grid(q.table).w - 1 - o.center.x;
  }
  return PlacementQuery::make(std::move(s), q.table, q.ref_id);
}

double relnet_sample_loss(const Eigen::Matrix<double, kNumRelations, 1>& gamma,
                          const Eigen::Matrix<double, kNumRelations, 1>& posterior,
                          const RelationSet& active) {
  double l = 0.0;
  for (int r = 0; r < kNumRelations; ++r) {
    if (active[r]) l += (gamma[r] - posterior[r]) * (gamma[r] - posterior[r]);
  }
  return l;
}

std::vector<double> exploration_distribution(const Eigen::MatrixXd& channel, double epsilon,
                                             bool* degenerate) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw InvalidArgument("epsilon must lie in [0, 1]");
  const auto n = static_cast<std::size_t>(channel.size());
  const double total = channel.sum();
  const bool deg = !(total > 0.0);
  if (degenerate) *degenerate = deg;
  std::vector<double> p(n, 1.0 / static_cast<double>(n));
  if (deg) return p;
  for (int y = 0; y < channel.rows(); ++y) {
    for (int x = 0; x < channel.cols(); ++x) {
      auto& v = p[std::size_t(y) * channel.cols() + x];
      v = (1.0 - epsilon) * channel(y, x) / total + epsilon * v;
    }
  }
  return p;
}

RelnetStepResult relnet_step(const PlacementQuery& q, PlacementNet& net, const AuxClassifier& clf,
                             const RelnetConfig& cfg, std::uint64_t seed) {
  if (cfg.k < 1) throw InvalidArgument("relnet_step needs k >= 1");
  const int h = q.image.h, w = q.image.w;
  const Eigen::MatrixXd feats = placement_features(q.image, q.ref_mask, net.config.scale);
  const ProbMaps maps = predict_maps_from_features(feats, h, w, net);
  const SceneObject& ref = q.ref();

  RelnetStepResult res;
  RelationSet active{};
  for (auto r : kAllRelations) active[index_of(r)] = relation_eligible(r, ref);

  Rng rng(seed);
  std::vector<Cell> cells;
  for (auto r : kAllRelations) {
    if (!active[index_of(r)]) continue;
    bool deg = false;
    const auto p = exploration_distribution(maps.channel(r), cfg.epsilon, &deg);
    if (deg) {
      if (cfg.strict) throw DegenerateChannel(std::string(to_string(r)) + " scores are all zero");
      res.degenerate[index_of(r)] = true;
    }
    const auto cdf = cumulative(p);
    for (int k = 0; k < cfg.k; ++k) cells.push_back(draw_cell(cdf, w, rng));
  }
  const int n = static_cast<int>(cells.size());
  Eigen::MatrixXd f(kPlacementFeatureDim, n), target(kNumRelations, n), mask(kNumRelations, n);
  for (int j = 0; j < n; ++j) {
    f.col(j) = feats.col(std::size_t(cells[j].y) * w + cells[j].x);
    target.col(j) = aux_posterior(q, cells[j], clf);
    for (int r = 0; r < kNumRelations; ++r) mask(r, j) = active[r] ? 1.0 : 0.0;
  }
  nn::Tape t;
  nn::Binder b(t, net.params);
  Var out = predict_cells(b, f);
  Var diff = nn::mul(nn::sub(out, t.constant(target)), t.constant(mask));
  Var loss = nn::scale(nn::squared_norm(diff), 1.0 / n);
  res.loss = loss.scalar();
  res.samples = n;
  if (!std::isfinite(res.loss)) {
    throw NonFiniteLoss("placement loss on reference " + std::to_string(q.ref_id));
  }
  t.backward(loss);
  return res;
}

double SatisfactionReport::min_rate() const {
  double m = 1.0;
  for (int r = 0; r < kNumRelations; ++r) {
    if (trials[r] > 0) m = std::min(m, rate[r]);
  }
  return m;
}

json SatisfactionReport::to_json() const {
  json j = json::object();
  for (auto r : kAllRelations) {
    j[std::string(tabletop::to_string(r))] = {{"rate", rate[index_of(r)]},
                                              {"trials", trials[index_of(r)]}};
  }
  return j;
}

SatisfactionReport placement_satisfaction(const PlacementNet& net,
                                          const std::vector<PlacementQuery>& scenes, int samples,
                                          std::uint64_t seed, const RelationParams& rel) {
  SatisfactionReport rep;
  std::array<int, kNumRelations> hits{};
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    const auto& q = scenes[i];
    const ProbMaps maps = predict_maps(q.image, q.ref_mask, net);
    for (auto r : kAllRelations) {
      if (!relation_eligible(r, q.ref())) continue;
      const int ri = index_of(r);
      rep.trials[ri] += samples;
      std::vector<double> cdf;
      try {
        cdf = cumulative(placement_distribution(maps, r, q.ref_mask));
      } catch (const NoMassAvailable&) {
        continue;
      }
      Rng rng(derive_seed(seed, i * kNumRelations + ri));
      for (int s = 0; s < samples; ++s) {
        const Cell c = draw_cell(cdf, maps.w, rng);
        hits[ri] += contains(relation_oracle(BBox::unit(c), q.ref(), rel), r);
      }
    }
  }
  for (int r = 0; r < kNumRelations; ++r) {
    rep.rate[r] = rep.trials[r] ? double(hits[r]) / rep.trials[r] : 0.0;
  }
  return rep;
}

void PlacementTrainConfig::validate() const {
  if (epochs < 0 || batch_size < 1 || !(learning_rate > 0) || relnet.k < 1 ||
      !(relnet.epsilon >= 0 && relnet.epsilon <= 1) || val_samples < 1) {
    throw InvalidArgument("bad placement training config");
  }
}

json PlacementTrainConfig::to_json() const {
  return {{"epochs", epochs},
          {"learning_rate", learning_rate},
          {"batch_size", batch_size},
          {"k", relnet.k},
          {"epsilon", relnet.epsilon},
          {"seed", seed},
          {"mirror_augment", mirror_augment},
          {"val_samples", val_samples}};
}

PlacementTrainConfig PlacementTrainConfig::from_json(const json& j) {
  PlacementTrainConfig c;
  for (const auto& [k, v] : j.items()) {
    if (k == "epochs") c.epochs = v.get<int>();
    else if (k == "learning_rate") c.learning_rate = v.get<double>();
    else if (k == "batch_size") c.batch_size = v.get<int>();
    else if (k == "k") c.relnet.k = v.get<int>();
    else if (k == "epsilon") c.relnet.epsilon = v.get<double>();
    else if (k == "seed") c.seed = v.get<std::uint64_t>();
    else if (k == "mirror_augment") c.mirror_augment = v.get<bool>();
    else if (k == "val_samples") c.val_samples = v.get<int>();
    else throw InvalidArgument("unknown placement training key '" + k + "'");
  }
  c.validate();
  return c;
}

PlacementTrainResult train_placement(const std::vector<PlacementQuery>& train,
                                     const std::vector<PlacementQuery>& val,
                                     const AuxClassifier& clf, const PlacementTrainConfig& cfg,
                                     PlacementNet init, std::ostream* log) {
  cfg.validate();
  if (train.empty() && cfg.epochs > 0) throw InvalidArgument("no placement training scenes");
  nn::AdamConfig ac;
  ac.lr = cfg.learning_rate;
  nn::Adam opt(ac);
  PlacementTrainResult res{std::move(init), {}};
  Rng rng(derive_seed(cfg.seed, 1));
  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    rng.shuffle(order);
    PlacementEpoch st;
    st.epoch = epoch;
    res.net.params.zero_grad();
    int in_batch = 0;
    for (std::size_t n = 0; n < order.size(); ++n) {
      const std::uint64_t step_seed = derive_seed(derive_seed(cfg.seed, 100 + epoch), n);
      const bool flip = cfg.mirror_augment && rng.bernoulli(0.5);
      const auto r = flip ? relnet_step(mirror(train[order[n]]), res.net, clf, cfg.relnet, step_seed)
                          : relnet_step(train[order[n]], res.net, clf, cfg.relnet, step_seed);
      st.loss += r.loss;
      for (bool d : r.degenerate) st.degenerate += d;
      if (++in_batch == cfg.batch_size || n + 1 == order.size()) {
        opt.step(res.net.params, in_batch);
        in_batch = 0;
      }
    }
    st.loss /= static_cast<double>(std::max<std::size_t>(1, order.size()));
    st.val = placement_satisfaction(res.net, val, cfg.val_samples, derive_seed(cfg.seed, 2));
    if (log) {
      *log << "placement epoch " << epoch << " loss " << st.loss << " val";
      for (auto rl : kAllRelations) *log << ' ' << to_string(rl) << '=' << st.val.rate[index_of(rl)];
      *log << '\n';
    }
    res.curves.push_back(st);
  }
  return res;
}

json AuxTrainConfig::to_json() const {
  return {{"epochs", epochs},
          {"samples_per_scene", samples_per_scene},
          {"learning_rate", learning_rate},
          {"batch_size", batch_size},
          {"seed", seed},
          {"hidden", hidden}};
}

AuxTrainConfig AuxTrainConfig::from_json(const json& j) {
  AuxTrainConfig c;
  for (const auto& [k, v] : j.items()) {
    if (k == "epochs") c.epochs = v.get<int>();
    else if (k == "samples_per_scene") c.samples_per_scene = v.get<int>();
    else if (k == "learning_rate") c.learning_rate = v.get<double>();
    else if (k == "batch_size") c.batch_size = v.get<int>();
    else if (k == "seed") c.seed = v.get<std::uint64_t>();
    else if (k == "hidden") c.hidden = v.get<int>();
    else throw InvalidArgument("unknown aux training key '" + k + "'");
  }
  return c;
}

std::vector<Cell> aux_sample_cells(const PlacementQuery& q, int n, Rng& rng,
                                   const RelationParams& rel) {
  const Grid& g = q.grid();
  const BBox fp = q.ref().footprint();
  const int m = rel.proximity_gap + 4;
  const int x0 = std::max(0, fp.x0 - m), x1 = std::min(g.w - 1, fp.x1 - 1 + m);
  const int y0 = std::max(0, fp.y0 - m), y1 = std::min(g.h - 1, fp.y1 - 1 + m);
  const int ax0 = std::max(0, fp.x0 - 2), ax1 = std::min(g.w - 1, fp.x1 + 1);
  const int ay0 = std::max(0, fp.y0 - 2), ay1 = std::min(g.h - 1, fp.y1 + 1);
  std::vector<Cell> cells;
  cells.reserve(n);
  const auto draw = [&](int lx, int hx, int ly, int hy) {
    cells.push_back({static_cast<int>(rng.uniform_int(lx, hx)), static_cast<int>(rng.uniform_int(ly, hy))});
  };
  for (int i = 0; i < n; ++i) {
    if (i % 3 == 0) draw(0, g.w - 1, 0, g.h - 1);
    else if (i % 3 == 1) draw(x0, x1, y0, y1);
    else draw(ax0, ax1, ay0, ay1);
  }
  return cells;
}

AuxClassifier pretrain_aux(const std::vector<PlacementQuery>& scenes, const AuxTrainConfig& cfg,
                           std::ostream* log) {
  if (cfg.epochs < 0 || cfg.samples_per_scene < 1 || cfg.batch_size < 1 || !(cfg.learning_rate > 0)) {
    throw InvalidArgument("bad aux training config");
  }
  AuxClassifier clf = AuxClassifier::create_learned(cfg.hidden, derive_seed(cfg.seed, 1));
  // Fixed sample set: features and oracle targets.
  Rng rng(derive_seed(cfg.seed, 2));
  std::vector<Eigen::VectorXd> xs;
  std::vector<Eigen::Matrix<double, kNumRelations, 1>> ys;
  for (const auto& q : scenes) {
    for (const Cell c : aux_sample_cells(q, cfg.samples_per_scene, rng, clf.relation)) {
      xs.push_back(aux_features_at(q.image, q.ref_mask, c, clf.footprint, clf.scale));
      ys.push_back(oracle_posterior(q.ref(), c, clf.relation));
    }
  }
  nn::AdamConfig ac;
  ac.lr = cfg.learning_rate;
  nn::Adam opt(ac);
  std::vector<std::size_t> order(xs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    // linear decay to a tenth of the base rate
    const double frac = cfg.epochs > 1 ? double(epoch - 1) / (cfg.epochs - 1) : 0.0;
    opt.set_learning_rate(cfg.learning_rate * (1.0 - 0.9 * frac));
    rng.shuffle(order);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t n = std::min<std::size_t>(cfg.batch_size, order.size() - start);
      Eigen::MatrixXd x(kAuxFeatureDim, n), y(kNumRelations, n);
      for (std::size_t j = 0; j < n; ++j) {
        x.col(j) = xs[order[start + j]];
        y.col(j) = ys[order[start + j]];
      }
      nn::Tape t;
      nn::Binder b(t, clf.params);
      Var loss = nn::scale(nn::squared_norm(nn::sub(aux_forward(b, x), t.constant(y))),
                           1.0 / static_cast<double>(n));
      if (!std::isfinite(loss.scalar())) throw NonFiniteLoss("auxiliary classifier loss");
      total += loss.scalar() * n;
      t.backward(loss);
      opt.step(clf.params);
    }
    if (log) *log << "aux epoch " << epoch << " loss " << total / std::max<std::size_t>(1, xs.size()) << '\n';
  }
  return clf;
}

double aux_agreement(const AuxClassifier& clf, const std::vector<PlacementQuery>& scenes,
                     int samples_per_scene, std::uint64_t seed) {
  Rng rng(seed);
  long agree = 0, total = 0;
  for (const auto& q : scenes) {
    for (const Cell c : aux_sample_cells(q, samples_per_scene, rng, clf.relation)) {
      agree += posterior_set(aux_posterior(q, c, clf)) ==
               relation_oracle(BBox::unit(c), q.ref(), clf.relation);
      ++total;
    }
  }
  return total ? double(agree) / total : 0.0;
}

void write_placement_curves_csv(const std::vector<PlacementEpoch>& curves, std::ostream& out) {
  out << "epoch,loss,degenerate";
  for (auto r : kAllRelations) out << ',' << to_string(r);
  out << '\n';
  for (const auto& c : curves) {
    out << c.epoch << ',' << c.loss << ',' << c.degenerate;
    for (int r = 0; r < kNumRelations; ++r) out << ',' << c.val.rate[r];
    out << '\n';
  }
}

}  // namespace tabletop
