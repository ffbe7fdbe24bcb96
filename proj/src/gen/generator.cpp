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

#include "tabletop/gen/generator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "tabletop/common/error.hpp"

namespace tabletop {

using nn::Matrix;
using nn::Var;

Eigen::VectorXd TargetVisualRep::v() const {
  Eigen::VectorXd out(v_vis.size() + v_loc.size() + v_rel.size());
  out << v_vis, v_loc, v_rel;
  return out;
}

Var visual_rep(const nn::Binder& b, const CandidateVars& c, int joint_dim) {
  nn::Tape& t = b.tape();
  Var vis = nn::tanh(b.linear("gen.vis", c.subj_hidden));
  Var rel = c.rel_hidden.empty() ? t.constant(Matrix::Zero(joint_dim, 1))
                                 : nn::elementwise_max(c.rel_hidden);
  return nn::concat_rows({vis, c.loc_hidden, rel});
}

TargetVisualRep visual_rep(const ObjectCandidate& candidate, const GroundingModel& model) {
  nn::Tape t;
  nn::Binder b(t, model.params);
  const Eigen::VectorXd v = visual_rep(b, encode_candidate(b, candidate), model.dims.joint).value();
  TargetVisualRep r;
  r.v_vis = v.head(model.dims.vis_gen);
  r.v_loc = v.segment(model.dims.vis_gen, model.dims.joint);
  r.v_rel = v.tail(model.dims.joint);
  return r;
}

namespace {

nn::LstmState decoder_init(const nn::Binder& b, Var v) {
  nn::LstmState s = b.lstm_zero("gen.lstm");
  s.h = nn::tanh(b.linear("gen.init", v));
  return s;
}

Var decoder_logp(const nn::Binder& b, Var v, const nn::LstmState& s, int prev, nn::LstmState* next) {
  const int idx[1] = {prev};
  Var e = nn::gather_cols(b("embedding"), idx);
  *next = b.lstm_step("gen.lstm", nn::concat_rows({e, v}), s);
  return nn::log_softmax(b.linear("gen.out", next->h));
}

void check_tokens(std::span<const int> tokens, int vocab) {
  if (tokens.empty() || tokens.back() != Vocabulary::kEos) {
    throw InvalidArgument("decoder targets must end with EOS");
  }
  for (int t : tokens) {
    if (t < 0 || t >= vocab) throw UnknownToken("token index " + std::to_string(t));
  }
}

}  // namespace

Var decode_nll(const nn::Binder& b, Var v, std::span<const int> tokens) {
  const int vocab = static_cast<int>(b("embedding").cols());
  check_tokens(tokens, vocab);
  nn::LstmState s = decoder_init(b, v);
  int prev = Vocabulary::kBos;
  Var total;
  for (int tok : tokens) {
    nn::LstmState next;
    Var lp = nn::pick(decoder_logp(b, v, s, prev, &next), tok);
    total = total.valid() ? nn::add(total, lp) : lp;
    s = next;
    prev = tok;
  }
  return nn::scale(total, -1.0);
}

double decode_nll(const TargetVisualRep& v, std::span<const int> tokens,
                  const GroundingModel& model) {
  nn::Tape t;
  nn::Binder b(t, model.params);
  return decode_nll(b, t.constant(Matrix(v.v())), tokens).scalar();
}

std::vector<Eigen::VectorXd> step_distributions(const TargetVisualRep& v,
                                                std::span<const int> tokens,
                                                const GroundingModel& model) {
  nn::Tape t;
  nn::Binder b(t, model.params);
  Var vv = t.constant(Matrix(v.v()));
  nn::LstmState s = decoder_init(b, vv);
  int prev = Vocabulary::kBos;
  std::vector<Eigen::VectorXd> out;
  for (int tok : tokens) {
    nn::LstmState next;
    out.push_back(decoder_logp(b, vv, s, prev, &next).value().col(0).array().exp());
    s = next;
    prev = tok;
  }
  return out;
}

double mmi_loss(double logp_target, double logp_other, double m2, double lambda3) {
  return lambda3 * std::max(0.0, m2 + logp_other - logp_target);
}

Var mmi_loss(Var logp_target, Var logp_other, double m2, double lambda3) {
  return nn::scale(nn::relu(nn::add_scalar(nn::sub(logp_other, logp_target), m2)), lambda3);
}

double BeamHypothesis::score(bool length_normalize) const {
  if (!length_normalize || tokens.empty()) return log_prob;
  return log_prob / static_cast<double>(tokens.size());
}

std::vector<BeamHypothesis> beam_search(const NextTokenFn& next, int eos, const BeamConfig& cfg) {
  if (cfg.width < 1) throw InvalidArgument("beam width must be >= 1");
  if (cfg.max_len < 1) throw InvalidArgument("max_len must be >= 1");
  std::vector<BeamHypothesis> live = {BeamHypothesis{}};
  std::vector<BeamHypothesis> pool;
  const auto by_logp = [](const BeamHypothesis& a, const BeamHypothesis& b) {
    if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
    return a.tokens < b.tokens;
  };
  while (!live.empty()) {
    std::vector<BeamHypothesis> expanded;
    for (const auto& h : live) {
      const Eigen::VectorXd lp = next(h.tokens);
      for (int w = 0; w < lp.size(); ++w) {
        if (!std::isfinite(lp[w])) continue;
        BeamHypothesis c = h;
        c.tokens.push_back(w);
        c.log_prob += lp[w];
        c.finished = w == eos || static_cast<int>(c.tokens.size()) >= cfg.max_len;
        expanded.push_back(std::move(c));
      }
    }
    std::sort(expanded.begin(), expanded.end(), by_logp);
    if (static_cast<int>(expanded.size()) > cfg.width) expanded.resize(cfg.width);
    live.clear();
    for (auto& c : expanded) (c.finished ? pool : live).push_back(std::move(c));
  }
  std::sort(pool.begin(), pool.end(), [&](const BeamHypothesis& a, const BeamHypothesis& b) {
    const double sa = a.score(cfg.length_normalize), sb = b.score(cfg.length_normalize);
    if (sa != sb) return sa > sb;
    return a.tokens < b.tokens;
  });
  if (static_cast<int>(pool.size()) > cfg.width) pool.resize(cfg.width);
  return pool;
}

std::vector<BeamHypothesis> beam_search(const TargetVisualRep& v, const GroundingModel& model,
                                        const BeamConfig& cfg) {
  nn::Tape t;
  nn::Binder b(t, model.params);
  Var vv = t.constant(Matrix(v.v()));
  const nn::LstmState init = decoder_init(b, vv);

  // Keyed by emitted prefix: decoder state after BOS + prefix, and the
  // next-token log-probabilities there.
  struct Entry {
    nn::LstmState state;
    Eigen::VectorXd logp;
  };
  std::map<std::vector<int>, Entry> cache;
  std::function<const Entry&(const std::vector<int>&)> entry =
      [&](const std::vector<int>& prefix) -> const Entry& {
    if (auto it = cache.find(prefix); it != cache.end()) return it->second;
    const nn::LstmState* parent = &init;
    int prev = Vocabulary::kBos;
    if (!prefix.empty()) {
      parent = &entry(std::vector<int>(prefix.begin(), prefix.end() - 1)).state;
      prev = prefix.back();
    }
    Entry e;
    e.logp = decoder_logp(b, vv, *parent, prev, &e.state).value().col(0);
    // The grammar never produces BOS or UNK.
    e.logp[Vocabulary::kBos] = -std::numeric_limits<double>::infinity();
    e.logp[Vocabulary::kUnk] = -std::numeric_limits<double>::infinity();
    return cache.emplace(prefix, std::move(e)).first->second;
  };
  return beam_search(
      [&](std::span<const int> prefix) {
        return entry(std::vector<int>(prefix.begin(), prefix.end())).logp;
      },
      Vocabulary::kEos, cfg);
}

RerankResult rerank(const std::vector<BeamHypothesis>& hypotheses,
                    const std::vector<ObjectCandidate>& candidates, int target_id,
                    const GroundingModel& model) {
  if (hypotheses.empty()) throw InvalidArgument("rerank needs at least one hypothesis");
  RerankResult r;
  for (const auto& h : hypotheses) {
    const auto m = comprehend(candidates, h.tokens, model);
    double other = -1.0;
    for (std::size_t i = 0; i < m.ids.size(); ++i) {
      if (m.ids[i] != target_id) other = std::max(other, m.scores[i]);
    }
    r.margins.push_back(m.score_of(target_id) - other);
  }
  for (std::size_t i = 1; i < hypotheses.size(); ++i) {
    const double a = r.margins[i], b = r.margins[r.best];
    if (a > b || (a == b && hypotheses[i].log_prob > hypotheses[r.best].log_prob)) r.best = i;
  }
  return r;
}

std::vector<int> generate_referring_expression(const std::vector<ObjectCandidate>& candidates,
                                               int target_id, const GroundingModel& model,
                                               const BeamConfig& cfg) {
  const auto* target = find_candidate(candidates, target_id);
  if (!target) throw ObjectNotFound("target candidate " + std::to_string(target_id));
  const auto hyps = beam_search(visual_rep(*target, model), model, cfg);
  // Hypotheses cut at max_len carry no EOS; keep only finished words.
  std::vector<BeamHypothesis> usable;
  for (const auto& h : hyps) {
    bool has_word = false;
    for (int t : h.tokens) has_word |= t != Vocabulary::kEos;
    if (has_word) usable.push_back(h);
  }
  if (usable.empty()) throw NoDiscriminativeExpression("decoder produced only empty expressions");
  return usable[rerank(usable, candidates, target_id, model).best].tokens;
}

}  // namespace tabletop
