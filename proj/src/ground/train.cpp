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

#include "tabletop/ground/train.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>

#include "tabletop/common/error.hpp"
#include "tabletop/gen/generator.hpp"
#include "tabletop/nn/optim.hpp"

namespace tabletop {

using nn::Var;

void TrainConfig::validate() const {
  if (!(m1 > 0) || !(m2 > 0)) throw InvalidArgument("margins must be positive");
  if (lambda1 < 0 || lambda2 < 0 || lambda3 < 0 || lambda_attr < 0 || lambda_tie < 0) {
    throw InvalidArgument("loss weights must be non-negative");
  }
  if (!(learning_rate > 0)) throw InvalidArgument("learning rate must be positive");
  if (batch_size < 1 || epochs < 0) throw InvalidArgument("bad batch size or epoch count");
  if (negatives != "hardest" && negatives != "uniform") {
    throw InvalidArgument("negatives must be \"hardest\" or \"uniform\"");
  }
}

nlohmann::json TrainConfig::to_json() const {
  return {{"m1", m1},
          {"m2", m2},
          {"lambda1", lambda1},
          {"lambda2", lambda2},
          {"lambda3", lambda3},
          {"lambda_attr", lambda_attr},
          {"learning_rate", learning_rate},
          {"batch_size", batch_size},
          {"epochs", epochs},
          {"seed", seed},
          {"joint", joint},
          {"jitter_cells", jitter.max_cells},
          {"appearance_noise", jitter.appearance_noise},
          {"val_limit", val_limit},
          {"lambda_tie", lambda_tie},
          {"negatives", negatives}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  for (const auto& [k, v] : j.items()) {
    if (k == "m1") c.m1 = v.get<double>();
    else if (k == "m2") c.m2 = v.get<double>();
    else if (k == "lambda1") c.lambda1 = v.get<double>();
    else if (k == "lambda2") c.lambda2 = v.get<double>();
    else if (k == "lambda3") c.lambda3 = v.get<double>();
    else if (k == "lambda_attr") c.lambda_attr = v.get<double>();
    else if (k == "learning_rate") c.learning_rate = v.get<double>();
    else if (k == "batch_size") c.batch_size = v.get<int>();
    else if (k == "epochs") c.epochs = v.get<int>();
    else if (k == "seed") c.seed = v.get<std::uint64_t>();
    else if (k == "joint") c.joint = v.get<bool>();
    else if (k == "jitter_cells") c.jitter.max_cells = v.get<int>();
    else if (k == "appearance_noise") c.jitter.appearance_noise = v.get<double>();
    else if (k == "val_limit") c.val_limit = v.get<int>();
    else if (k == "lambda_tie") c.lambda_tie = v.get<double>();
    else if (k == "negatives") c.negatives = v.get<std::string>();
    else throw InvalidArgument("unknown training key '" + k + "'");
  }
  c.validate();
  return c;
}

double hinge_loss(double s_pos, double s_wrong_expr, double s_wrong_obj, const TrainConfig& cfg) {
  return cfg.lambda1 * std::max(0.0, cfg.m1 + s_wrong_expr - s_pos) +
         cfg.lambda2 * std::max(0.0, cfg.m1 + s_wrong_obj - s_pos);
}

Var hinge_loss(Var s_pos, Var s_wrong_expr, Var s_wrong_obj, const TrainConfig& cfg) {
  Var a = nn::relu(nn::add_scalar(nn::sub(s_wrong_expr, s_pos), cfg.m1));
  Var b = nn::relu(nn::add_scalar(nn::sub(s_wrong_obj, s_pos), cfg.m1));
  return nn::add(nn::scale(a, cfg.lambda1), nn::scale(b, cfg.lambda2));
}

std::vector<std::vector<ObjectCandidate>> dataset_candidates(const GroundingDataset& ds,
                                                             const JitterConfig& jitter,
                                                             std::uint64_t seed) {
  std::vector<std::vector<ObjectCandidate>> out;
  out.reserve(ds.scenes.size());
  for (std::size_t i = 0; i < ds.scenes.size(); ++i) {
    out.push_back(encode_candidates(ds.scenes[i], TableId::pick, jitter, derive_seed(seed, i)));
  }
  return out;
}

namespace {

std::size_t index_of_candidate(const std::vector<ObjectCandidate>& c, int id) {
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (c[i].id == id) return i;
  }
  throw ObjectNotFound("candidate " + std::to_string(id));
}

bool contains_id(const std::vector<int>& v, int id) {
  return std::find(v.begin(), v.end(), id) != v.end();
}

/// Grammar denotation of each record; {target} when the text does not parse.
std::vector<std::vector<int>> record_denotations(const GroundingDataset& ds) {
  std::vector<std::vector<int>> out;
  out.reserve(ds.records.size());
  for (const auto& r : ds.records) {
    const auto sem = parse_expression(tokenize(ds.vocab.decode(r.tokens)));
    auto den = sem ? denotation(*sem, ds.scenes[r.scene_ref], TableId::pick) : std::vector<int>{};
    if (!contains_id(den, r.target_id)) den = {r.target_id};
    out.push_back(std::move(den));
  }
  return out;
}

Var cross_entropy(Var logits, int label) {
  return nn::scale(nn::pick(nn::log_softmax(logits), label), -1.0);
}

}  // namespace

GroundingTrainResult train_grounding(const GroundingDataset& ds, const TrainConfig& cfg,
                                     const ModelDims& dims, std::ostream* log) {
  return train_grounding(ds, cfg, GroundingModel::create(ds.vocab, dims, derive_seed(cfg.seed, 1)),
                         log);
}

GroundingTrainResult train_grounding(const GroundingDataset& ds, const TrainConfig& cfg,
                                     GroundingModel model, std::ostream* log) {
  cfg.validate();
  const auto train = ds.records_in(Split::train);
  if (train.empty()) throw InvalidArgument("dataset has no training records");
  auto val = ds.records_in(Split::val);
  if (cfg.val_limit > 0 && static_cast<int>(val.size()) > cfg.val_limit) val.resize(cfg.val_limit);

  const auto candidates = dataset_candidates(ds, cfg.jitter, derive_seed(cfg.seed, 3));
  const auto by_scene = ds.by_scene();
  const auto members = record_denotations(ds);

  nn::AdamConfig ac;
  ac.lr = cfg.learning_rate;
  nn::Adam opt(ac);
  Rng rng(derive_seed(cfg.seed, 2));
  GroundingTrainResult result;

  std::vector<std::size_t> order = train;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    rng.shuffle(order);
    EpochStats st;
    st.epoch = epoch;
    int in_batch = 0;
    model.params.zero_grad();
    for (std::size_t n = 0; n < order.size(); ++n) {
      const auto& rec = ds.records[order[n]];
      const auto& cands = candidates[rec.scene_ref];
      const SceneObject* target = ds.scenes[rec.scene_ref].find(rec.target_id);
      const std::size_t ti = index_of_candidate(cands, rec.target_id);

      // Negatives: an expression that does not describe the target, and a
      // candidate the expression does not describe.
      const auto& mine = members[order[n]];
      std::vector<std::size_t> other_recs;
      for (auto j : by_scene[rec.scene_ref]) {
        if (!contains_id(members[j], rec.target_id)) other_recs.push_back(j);
      }
      std::vector<std::size_t> outside, peers;
      for (std::size_t k = 0; k < cands.size(); ++k) {
        if (k == ti) continue;
        (contains_id(mine, cands[k].id) ? peers : outside).push_back(k);
      }
      const bool hardest = cfg.negatives == "hardest";
      if (!hardest) {
        if (!other_recs.empty()) other_recs = {other_recs[rng.index(other_recs.size())]};
        if (!outside.empty()) outside = {outside[rng.index(outside.size())]};
      }
      const std::size_t om = peers.empty() ? SIZE_MAX : peers[rng.index(peers.size())];

      nn::Tape t;
      nn::Binder b(t, model.params);
      const auto ei = encode_expression(b, rec.tokens, ds.vocab.size());
      const auto ci = encode_candidate(b, cands[ti]);
      Var s_pos = match_score(ei, ci).total;
      Var zero = t.constant_scalar(0.0);
      Var l1 = zero;
      if (!other_recs.empty()) {
        std::vector<Var> s;
        for (auto j : other_recs) {
          s.push_back(match_score(encode_expression(b, ds.records[j].tokens, ds.vocab.size()), ci).total);
        }
        l1 = nn::add(l1, nn::scale(nn::relu(nn::add_scalar(nn::sub(nn::max_of(s), s_pos), cfg.m1)),
                                   cfg.lambda1));
      }
      CandidateVars ck;
      bool have_ok = false;
      if (!outside.empty()) {
        std::vector<CandidateVars> cv;
        std::vector<Var> s;
        for (auto k : outside) {
          cv.push_back(encode_candidate(b, cands[k]));
          s.push_back(match_score(ei, cv.back()).total);
        }
        std::size_t best = 0;
        for (std::size_t k = 1; k < s.size(); ++k) {
          if (s[k].scalar() > s[best].scalar()) best = k;
        }
        ck = cv[best];
        have_ok = true;
        l1 = nn::add(l1, nn::scale(nn::relu(nn::add_scalar(nn::sub(s[best], s_pos), cfg.m1)),
                                   cfg.lambda2));
      }
      Var l_attr = nn::add(
          nn::add(cross_entropy(b.linear("attr.color", ci.subj_hidden), index_of(target->color)),
                  cross_entropy(b.linear("attr.category", ci.subj_hidden),
                                index_of(target->category))),
          cross_entropy(b.linear("attr.size", ci.subj_hidden), index_of(target->size)));
      Var loss = nn::add(l1, nn::scale(l_attr, cfg.lambda_attr));
      if (om != SIZE_MAX && cfg.lambda_tie > 0) {
        Var d = nn::sub(match_score(ei, encode_candidate(b, cands[om])).total, s_pos);
        Var tie = nn::add(nn::relu(nn::add_scalar(d, -0.5 * cfg.m1)),
                          nn::relu(nn::add_scalar(nn::scale(d, -1.0), -0.5 * cfg.m1)));
        loss = nn::add(loss, nn::scale(tie, cfg.lambda_tie));
      }
      Var l2 = zero, l3 = zero;
      if (cfg.joint) {
        l2 = decode_nll(b, visual_rep(b, ci, model.dims.joint), rec.tokens);
        loss = nn::add(loss, l2);
        if (have_ok) {
          Var nll_k = decode_nll(b, visual_rep(b, ck, model.dims.joint), rec.tokens);
          l3 = mmi_loss(nn::scale(l2, -1.0), nn::scale(nll_k, -1.0), cfg.m2, cfg.lambda3);
          loss = nn::add(loss, l3);
        }
      }
      if (!std::isfinite(loss.scalar())) {
        throw NonFiniteLoss("epoch " + std::to_string(epoch) + ", record " +
                            std::to_string(order[n]) + " (\"" + ds.vocab.decode(rec.tokens) +
                            "\"): L1=" + std::to_string(l1.scalar()) +
                            " L_attr=" + std::to_string(l_attr.scalar()) +
                            " L2=" + std::to_string(l2.scalar()));
      }
      t.backward(loss);
      st.l1 += l1.scalar();
      st.l_attr += l_attr.scalar();
      st.l2 += l2.scalar();
      st.l3 += l3.scalar();
      if (++in_batch == cfg.batch_size || n + 1 == order.size()) {
        opt.step(model.params, in_batch);
        in_batch = 0;
      }
    }
    const auto nrec = static_cast<double>(order.size());
    st.l1 /= nrec;
    st.l_attr /= nrec;
    st.l2 /= nrec;
    st.l3 /= nrec;
    int correct = 0;
    std::size_t scored = 0;
    for (auto i : val) {
      if (ds.records[i].is_ambiguous) continue;
      ++scored;
      const auto& rec = ds.records[i];
      correct += comprehend(candidates[rec.scene_ref], rec.tokens, model, cfg.m1).top() == rec.target_id;
    }
    st.val_accuracy = scored == 0 ? 0.0 : double(correct) / static_cast<double>(scored);
    result.curves.push_back(st);
    if (log) {
      *log << "epoch " << epoch << " L1 " << st.l1 << " L_attr " << st.l_attr << " L2 " << st.l2
           << " L3 " << st.l3 << " val_acc " << st.val_accuracy << std::endl;
    }
  }
  result.model = std::move(model);
  return result;
}

void write_curves_csv(const std::vector<EpochStats>& curves, std::ostream& out) {
  out << "epoch,L1,L_attr,L2,L3,val_accuracy\n";
  out << std::setprecision(10);
  for (const auto& c : curves) {
    out << c.epoch << ',' << c.l1 << ',' << c.l_attr << ',' << c.l2 << ',' << c.l3 << ','
        << c.val_accuracy << '\n';
  }
}

}  // namespace tabletop
