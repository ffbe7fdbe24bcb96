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

#include "tabletop/ground/grounder.hpp"

#include <algorithm>
#include <numeric>

#include "tabletop/common/error.hpp"

namespace tabletop {

using nn::Matrix;
using nn::Var;

namespace {

constexpr const char* kModuleNames[kNumModules] = {"subj", "loc", "rel"};

Var vec(nn::Tape& t, const Eigen::VectorXd& v) { return t.constant(Matrix(v)); }

}  // namespace

EncodedExpression ExpressionVars::values() const {
  EncodedExpression e;
  for (int m = 0; m < kNumModules; ++m) {
    e.phrase[m] = phrase[m].value().col(0);
    e.word_attention[m] = attention[m].value().col(0);
  }
  e.module_weights = weights.value().col(0);
  e.hidden_states = states.value();
  return e;
}

std::vector<int> expression_words(std::span<const int> tokens, int vocab_size) {
  std::vector<int> words;
  for (int t : tokens) {
    if (t < 0 || t >= vocab_size) throw UnknownToken("token index " + std::to_string(t));
    if (t == Vocabulary::kBos || t == Vocabulary::kEos) continue;
    words.push_back(t);
  }
  if (words.empty()) throw InvalidArgument("expression has no words");
  return words;
}

ExpressionVars encode_expression(const nn::Binder& b, std::span<const int> tokens,
                                 int vocab_size) {
  nn::Tape& t = b.tape();
  const auto words = expression_words(tokens, vocab_size);
  const int T = static_cast<int>(words.size());
  Var emb = nn::gather_cols(b("embedding"), words);

  std::vector<Var> fwd(T), bwd(T);
  auto s = b.lstm_zero("enc.fwd");
  for (int i = 0; i < T; ++i) {
    s = b.lstm_step("enc.fwd", nn::column(emb, i), s);
    fwd[i] = s.h;
  }
  s = b.lstm_zero("enc.bwd");
  for (int i = T - 1; i >= 0; --i) {
    s = b.lstm_step("enc.bwd", nn::column(emb, i), s);
    bwd[i] = s.h;
  }
  std::vector<Var> states(T);
  for (int i = 0; i < T; ++i) states[i] = nn::concat_rows({fwd[i], bwd[i]});
  Var H = nn::concat_cols(states);

  ExpressionVars out;
  out.states = H;
  for (int m = 0; m < kNumModules; ++m) {
    const std::string name = kModuleNames[m];
    Var logits = nn::transpose(b.linear("att." + name, H));  // T x 1
    Var alpha = nn::softmax(logits);
    out.attention[m] = alpha;
    out.phrase[m] = b.linear("phrase." + name, nn::matmul(H, alpha));
  }
  Var ends = nn::concat_rows({states.front(), states.back()});
  out.weights = nn::softmax(b.linear("module_weights", ends));
  (void)t;
  return out;
}

EncodedExpression encode_expression(std::span<const int> tokens, const GroundingModel& model) {
  nn::Tape t;
  nn::Binder b(t, model.params);
  return encode_expression(b, tokens, model.vocab.size()).values();
}

CandidateVars encode_candidate(const nn::Binder& b, const ObjectCandidate& c) {
  nn::Tape& t = b.tape();
  CandidateVars out;
  out.subj_hidden = nn::tanh(b.linear("vis.shared", vec(t, c.appearance)));
  out.subj = b.linear("vis.subj", out.subj_hidden);
  out.loc_hidden = nn::tanh(b.linear("loc.hidden", vec(t, c.location_input())));
  out.loc = b.linear("loc.out", out.loc_hidden);
  for (int k = 0; k < c.n_any; ++k) {
    Var slot = vec(t, c.any_cat_context.row(k).transpose());
    Var h = nn::tanh(b.linear("rel.hidden", slot));
    out.rel_hidden.push_back(h);
    out.rel.push_back(b.linear("rel.out", h));
  }
  return out;
}

ScoreVars match_score(const ExpressionVars& e, const CandidateVars& c) {
  nn::Tape& t = *e.weights.tape();
  ScoreVars s;
  s.module[0] = nn::cosine(e.phrase[0], c.subj);
  s.module[1] = nn::cosine(e.phrase[1], c.loc);
  if (c.rel.empty()) {
    s.module[2] = t.constant_scalar(0.0);
  } else {
    std::vector<Var> cos;
    for (const Var& r : c.rel) cos.push_back(nn::cosine(e.phrase[2], r));
    s.module[2] = nn::max_of(cos);
  }
  s.total = nn::weighted_sum(e.weights, {s.module[0], s.module[1], s.module[2]});
  return s;
}

double combine_module_scores(const Eigen::Vector3d& w, const std::array<double, kNumModules>& s) {
  return w[0] * s[0] + w[1] * s[1] + w[2] * s[2];
}

double match_score(const ObjectCandidate& candidate, const EncodedExpression& encoded,
                   const GroundingModel& model) {
  nn::Tape t;
  nn::Binder b(t, model.params);
  ExpressionVars e;
  for (int m = 0; m < kNumModules; ++m) {
    e.phrase[m] = vec(t, encoded.phrase[m]);
    e.attention[m] = vec(t, encoded.word_attention[m]);
  }
  e.weights = vec(t, encoded.module_weights);
  e.states = t.constant(encoded.hidden_states);
  return match_score(e, encode_candidate(b, candidate)).total.scalar();
}

double MatchResult::score_of(int id) const {
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] == id) return scores[i];
  }
  throw ObjectNotFound("candidate " + std::to_string(id));
}

std::vector<int> rank_by_score(const std::vector<int>& ids, const std::vector<double>& scores) {
  std::vector<std::size_t> order(ids.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return ids[a] < ids[b];
  });
  std::vector<int> out;
  for (auto i : order) out.push_back(ids[i]);
  return out;
}

std::vector<int> ambiguous_set(const std::vector<int>& ids, const std::vector<double>& scores,
                               double m1) {
  if (ids.empty()) return {};
  const auto ranking = rank_by_score(ids, scores);
  const double top = *std::max_element(scores.begin(), scores.end());
  std::vector<int> out;
  for (int id : ranking) {
    const auto i = static_cast<std::size_t>(std::find(ids.begin(), ids.end(), id) - ids.begin());
    if (top - scores[i] < m1 || out.empty()) out.push_back(id);
  }
  return out;
}

MatchResult comprehend(const std::vector<ObjectCandidate>& candidates, std::span<const int> tokens,
                       const GroundingModel& model, double m1) {
  if (candidates.empty()) throw InvalidArgument("comprehend needs at least one candidate");
  nn::Tape t;
  nn::Binder b(t, model.params);
  const auto e = encode_expression(b, tokens, model.vocab.size());
  MatchResult r;
  for (const auto& c : candidates) {
    const auto s = match_score(e, encode_candidate(b, c));
    r.ids.push_back(c.id);
    r.scores.push_back(s.total.scalar());
    r.module_scores.push_back({s.module[0].scalar(), s.module[1].scalar(), s.module[2].scalar()});
  }
  r.ranking = rank_by_score(r.ids, r.scores);
  r.ambiguous_set = ambiguous_set(r.ids, r.scores, m1);
  r.encoded = e.values();
  return r;
}

}  // namespace tabletop
