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
#include "tabletop/eval/benchmarks.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>

#include "tabletop/common/error.hpp"
#include "tabletop/common/png.hpp"
#include "tabletop/common/rng.hpp"
#include "tabletop/gen/generator.hpp"
#include "tabletop/lang/grammar.hpp"

namespace tabletop {

std::string_view to_string(Criterion c) {
  return c == Criterion::exact_id ? "exact_id" : "iou_0_5";
}

namespace {

nlohmann::json ratio_json(const Ratio& r) {
  return {{"num", r.num}, {"den", r.den}, {"value", r.value()}};
}

/// Candidates per scene, built on first use with the same per-scene seed
/// derivation as training.
class CandidateCache {
 public:
  CandidateCache(const GroundingDataset& ds, const EvalOptions& opt) : ds_(ds), opt_(opt) {}
  const std::vector<ObjectCandidate>& at(int scene) {
    auto it = cache_.find(scene);
    if (it == cache_.end()) {
      it = cache_
               .emplace(scene, encode_candidates(ds_.scenes.at(scene), TableId::pick, opt_.jitter,
                                                 derive_seed(opt_.seed, scene)))
               .first;
    }
    return it->second;
  }

 private:
  const GroundingDataset& ds_;
  const EvalOptions& opt_;
  std::map<int, std::vector<ObjectCandidate>> cache_;
};

/// Some cell of the table satisfies the relation (a reference at the table
/// edge has no room behind it, for instance).
bool satisfiable(const PlacementQuery& q, RelationLabel r, const RelationParams& rel) {
  const Grid& g = q.grid();
  for (int y = 0; y < g.h; ++y) {
    for (int x = 0; x < g.w; ++x) {
      if (contains(relation_oracle(BBox::unit({x, y}), q.ref(), rel), r)) return true;
    }
  }
  return false;
}

}  // namespace

nlohmann::json ComprehensionReport::to_json() const {
  nlohmann::json kinds = nlohmann::json::object();
  for (int k = 0; k < kNumClauseKinds; ++k) {
    kinds[std::string(to_string(static_cast<ClauseKind>(k)))] = {
        {"exact_id", ratio_json(exact_by_kind[k])}, {"iou_0_5", ratio_json(iou_by_kind[k])}};
  }
  return {{"exact_id", ratio_json(exact)},
          {"iou_0_5", ratio_json(iou)},
          {"by_kind", kinds},
          {"skipped_ambiguous", skipped_ambiguous}};
}

ComprehensionReport eval_comprehension(const GroundingDataset& ds,
                                       std::span<const std::size_t> records,
                                       const RecordScorer& scorer, const EvalOptions& opt) {
  ComprehensionReport rep;
  CandidateCache cache(ds, opt);
  for (std::size_t i : records) {
    const ExpressionSample& rec = ds.records.at(i);
    if (opt.skip_ambiguous && rec.is_ambiguous) {
      ++rep.skipped_ambiguous;
      continue;
    }
    const Scene& scene = ds.scenes.at(rec.scene_ref);
    const auto& cands = cache.at(rec.scene_ref);
    const auto scores = scorer(rec, scene, cands);
    if (scores.size() != cands.size()) {
      throw DimensionMismatch("scorer returned " + std::to_string(scores.size()) + " scores for " +
                              std::to_string(cands.size()) + " candidates");
    }
    std::vector<int> ids;
    for (const auto& c : cands) ids.push_back(c.id);
    const int top = rank_by_score(ids, scores).front();
    const ObjectCandidate* tc = find_candidate(cands, top);
    const SceneObject* target = scene.find(rec.target_id);
    const bool exact = top == rec.target_id;
    const bool overlap = target && iou(tc->bbox, target->footprint()) > 0.5;
    const int k = static_cast<int>(rec.clause_kind);
    rep.exact.add(exact);
    rep.iou.add(overlap);
    rep.exact_by_kind[k].add(exact);
    rep.iou_by_kind[k].add(overlap);
  }
  return rep;
}

ComprehensionReport eval_comprehension(const GroundingDataset& ds,
                                       std::span<const std::size_t> records,
                                       const GroundingModel& model, const EvalOptions& opt) {
  return eval_comprehension(
      ds, records,
      [&model](const ExpressionSample& rec, const Scene&, const std::vector<ObjectCandidate>& c) {
        const EncodedExpression e = encode_expression(rec.tokens, model);
        std::vector<double> s;
        s.reserve(c.size());
        for (const auto& x : c) s.push_back(match_score(x, e, model));
        return s;
      },
      opt);
}

nlohmann::json GenerationReport::to_json() const {
  return {{"discriminative_accuracy", ratio_json(reranked)}, {"beam_top", ratio_json(beam_top)}};
}

GenerationReport eval_generation(const GroundingDataset& ds, std::span<const std::size_t> records,
                                 const GroundingModel& model, const BeamConfig& beam,
                                 const EvalOptions& opt) {
  GenerationReport rep;
  CandidateCache cache(ds, opt);
  for (std::size_t i : records) {
    const ExpressionSample& rec = ds.records.at(i);
    const auto& cands = cache.at(rec.scene_ref);
    const ObjectCandidate* tc = find_candidate(cands, rec.target_id);
    if (!tc) throw ObjectNotFound("target " + std::to_string(rec.target_id));
    const auto hyps = beam_search(visual_rep(*tc, model), model, beam);
    const auto rr = rerank(hyps, cands, rec.target_id, model);
    const auto hit = [&](const std::vector<int>& tokens) {
      auto t = tokens;
      if (t.empty() || t.back() != Vocabulary::kEos) t.push_back(Vocabulary::kEos);
      if (t.size() < 2) return false;
      return comprehend(cands, t, model).top() == rec.target_id;
    };
    rep.reranked.add(cands.size() == 1 || hit(hyps[rr.best].tokens));
    rep.beam_top.add(cands.size() == 1 || hit(hyps.front().tokens));
  }
  return rep;
}

double PlacementReport::min_sampled() const {
  double m = 1.0;
  for (const auto& r : sampled) {
    if (r.den > 0) m = std::min(m, r.value());
  }
  return m;
}

nlohmann::json PlacementReport::to_json() const {
  nlohmann::json rel = nlohmann::json::object();
  for (RelationLabel r : kAllRelations) {
    const int i = index_of(r);
    rel[std::string(to_string(r))] = {{"sampled", ratio_json(sampled[i])},
                                      {"argmax", ratio_json(argmax[i])},
                                      {"coverage", ratio_json(coverage[i])}};
  }
  return {{"relations", rel},
          {"invariant_violations", invariant_violations},
          {"predictions", predictions}};
}

std::string PlacementReport::to_csv() const {
  std::string out = "relation,sampled,sampled_n,argmax,argmax_n,coverage\n";
  char buf[160];
  for (RelationLabel r : kAllRelations) {
    const int i = index_of(r);
    std::snprintf(buf, sizeof buf, "%s,%.4f,%ld,%.4f,%ld,%ld/%ld\n",
                  std::string(to_string(r)).c_str(), sampled[i].value(), sampled[i].den,
                  argmax[i].value(), argmax[i].den, coverage[i].num, coverage[i].den);
    out += buf;
  }
  return out;
}

PlacementReport eval_placement(const std::vector<PlacementQuery>& queries, const QueryMaps& maps,
                               int samples, std::uint64_t seed, const RelationParams& rel) {
  if (samples < 1) throw InvalidArgument("samples must be >= 1");
  PlacementReport rep;
  for (std::size_t qi = 0; qi < queries.size(); ++qi) {
    const PlacementQuery& q = queries[qi];
    const ProbMaps m = maps(q);
    ++rep.predictions;
    bool ok = true;
    for (const auto& c : m.channels) ok = ok && c.minCoeff() >= 0.0 && c.maxCoeff() <= 1.0;
    for (RelationLabel r : kAllRelations) {
      const int ri = index_of(r);
      const bool eligible = relation_eligible(r, q.ref()) && satisfiable(q, r, rel);
      rep.coverage[ri].add(eligible);
      if (!eligible) continue;
      std::vector<double> p;
      try {
        p = placement_distribution(m, r, q.ref_mask);
      } catch (const NoMassAvailable&) {
        for (int s = 0; s < samples; ++s) rep.sampled[ri].add(false);
        rep.argmax[ri].add(false);
        continue;
      }
      double total = 0.0;
      for (double v : p) total += v;
      ok = ok && std::abs(total - 1.0) < 1e-9;
      const auto best = std::max_element(p.begin(), p.end()) - p.begin();
      const Cell am{static_cast<int>(best % m.w), static_cast<int>(best / m.w)};
      rep.argmax[ri].add(contains(relation_oracle(BBox::unit(am), q.ref(), rel), r));
      const auto cdf = cumulative(p);
      Rng rng(derive_seed(seed, qi * kNumRelations + ri));
      for (int s = 0; s < samples; ++s) {
        const Cell c = draw_cell(cdf, m.w, rng);
        rep.sampled[ri].add(contains(relation_oracle(BBox::unit(c), q.ref(), rel), r));
      }
    }
    if (!ok) ++rep.invariant_violations;
  }
  return rep;
}

QueryMaps net_maps(const PlacementNet& net) {
  return [&net](const PlacementQuery& q) { return predict_maps(q.image, q.ref_mask, net); };
}

QueryMaps ideal_maps(const RelationParams& rel) {
  return [rel](const PlacementQuery& q) { return oracle_maps(q.scene, q.table, q.ref_id, rel); };
}

nlohmann::json AmbiguityReport::to_json() const {
  return {{"asked", ratio_json(asked)},
          {"correct_when_asked", ratio_json(correct_when_asked)},
          {"correct_when_not_asked", ratio_json(correct_when_not_asked)}};
}

AmbiguityReport eval_ambiguity(const GroundingDataset& ds, std::span<const std::size_t> records,
                               const TaskModels& models, const ExecutorConfig& cfg,
                               std::uint64_t seed) {
  AmbiguityReport rep;
  for (std::size_t i : records) {
    const ExpressionSample& rec = ds.records.at(i);
    Scene scene = ds.scenes.at(rec.scene_ref);
    const std::uint64_t s = derive_seed(seed, i);
    const auto words = tokenize(ds.vocab.decode(rec.tokens));
    DialogueState st;
    SystemAction a = step(st, scene, detokenize(pick_instruction(words, s)), models, cfg,
                          derive_seed(s, 0));
    const bool asked = a.kind == SystemActionKind::question;
    int replies = 0;
    while (a.kind == SystemActionKind::question && st.phase == Phase::awaiting_confirmation) {
      a = step(st, scene, a.object_id == rec.target_id ? "yes" : "no", models, cfg,
               derive_seed(s, ++replies));
    }
    const bool correct = st.confirmed_target == rec.target_id;
    rep.asked.add(asked);
    (asked ? rep.correct_when_asked : rep.correct_when_not_asked).add(correct);
    rep.questions.push_back(st.questions_this_instruction);
  }
  return rep;
}

Table2Report table2_report(std::span<const std::string> lines) {
  Table2Report rep;
  std::vector<nlohmann::json> records;
  for (const auto& line : lines) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ++rep.lines;
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      ++rep.malformed;
      continue;
    }
    records.push_back(std::move(j));
  }
  long bad = 0;
  rep.metrics = metrics_from_records(records, &bad);
  rep.malformed += bad;
  return rep;
}

Table2Report table2_report(std::istream& in) {
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(std::move(line));
  return table2_report(lines);
}

// ---------------------------------------------------------------------------

namespace {

using Rgb = std::array<std::uint8_t, 3>;
constexpr std::array<Rgb, 6> kPalette = {
    Rgb{31, 119, 180}, Rgb{255, 127, 14}, Rgb{44, 160, 44},
    Rgb{214, 39, 40},  Rgb{148, 103, 189}, Rgb{140, 86, 75}};

class Canvas {
 public:
  Canvas(int w, int h) : w_(w), h_(h), px_(std::size_t(w) * h * 3, 255) {
    if (w < 64 || h < 64) throw InvalidArgument("plot must be at least 64 x 64");
  }
  void set(int x, int y, Rgb c) {
    if (x < 0 || y < 0 || x >= w_ || y >= h_) return;
    auto* p = &px_[(std::size_t(y) * w_ + x) * 3];
    p[0] = c[0];
    p[1] = c[1];
    p[2] = c[2];
  }
  void line(int x0, int y0, int x1, int y1, Rgb c) {
    const int dx = std::abs(x1 - x0), sx = x0 < x1 ? 1 : -1;
    const int dy = -std::abs(y1 - y0), sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    for (;;) {
      set(x0, y0, c);
      if (x0 == x1 && y0 == y1) break;
      const int e2 = 2 * err;
      if (e2 >= dy) {
        err += dy;
        x0 += sx;
      }
      if (e2 <= dx) {
        err += dx;
        y0 += sy;
      }
    }
  }
  void fill(int x0, int y0, int x1, int y1, Rgb c) {
    for (int y = std::min(y0, y1); y <= std::max(y0, y1); ++y) {
      for (int x = std::min(x0, x1); x <= std::max(x0, x1); ++x) set(x, y, c);
    }
  }
  void save(const std::filesystem::path& path) const { write_png_rgb(path, w_, h_, px_); }

 private:
  int w_;
  int h_;
  std::vector<std::uint8_t> px_;
};

constexpr int kMargin = 24;
constexpr Rgb kGrid{225, 225, 225};
constexpr Rgb kAxis{0, 0, 0};

void frame(Canvas& c, int w, int h) {
  for (int k = 0; k <= 10; ++k) {
    const int y = h - kMargin - k * (h - 2 * kMargin) / 10;
    c.line(kMargin, y, w - kMargin, y, kGrid);
  }
  c.line(kMargin, h - kMargin, w - kMargin, h - kMargin, kAxis);
  c.line(kMargin, kMargin, kMargin, h - kMargin, kAxis);
}

}  // namespace

void plot_lines(const std::filesystem::path& path, const std::vector<Series>& series, int width,
                int height) {
  Canvas c(width, height);
  frame(c, width, height);
  double lo = INFINITY, hi = -INFINITY;
  std::size_t n = 0;
  for (const auto& s : series) {
    for (double v : s.y) {
      if (!std::isfinite(v)) continue;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    n = std::max(n, s.y.size());
  }
  if (!(lo <= hi)) {
    c.save(path);
    return;
  }
  if (hi - lo < 1e-12) {
    lo -= 0.5;
    hi += 0.5;
  }
  const auto px = [&](std::size_t i) {
    return kMargin + static_cast<int>(n > 1 ? double(i) / double(n - 1) * (width - 2 * kMargin) : 0);
  };
  const auto py = [&](double v) {
    return height - kMargin - static_cast<int>((v - lo) / (hi - lo) * (height - 2 * kMargin));
  };
  for (std::size_t k = 0; k < series.size(); ++k) {
    const Rgb col = kPalette[k % kPalette.size()];
    const auto& y = series[k].y;
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (!std::isfinite(y[i])) continue;
      c.fill(px(i) - 1, py(y[i]) - 1, px(i) + 1, py(y[i]) + 1, col);
      if (i > 0 && std::isfinite(y[i - 1])) c.line(px(i - 1), py(y[i - 1]), px(i), py(y[i]), col);
    }
  }
  c.save(path);
}

void plot_bars(const std::filesystem::path& path, const std::vector<double>& values,
               double threshold, int width, int height) {
  Canvas c(width, height);
  frame(c, width, height);
  const int inner_w = width - 2 * kMargin, inner_h = height - 2 * kMargin;
  const int n = static_cast<int>(values.size());
  for (int i = 0; i < n; ++i) {
    const double v = std::clamp(values[i], 0.0, 1.0);
    const int x0 = kMargin + i * inner_w / n + 4;
    const int x1 = kMargin + (i + 1) * inner_w / n - 4;
    const int top = height - kMargin - static_cast<int>(v * inner_h);
    c.fill(x0, top, x1, height - kMargin - 1, kPalette[i % kPalette.size()]);
  }
  const int ty = height - kMargin - static_cast<int>(std::clamp(threshold, 0.0, 1.0) * inner_h);
  c.line(kMargin, ty, width - kMargin, ty, Rgb{214, 39, 40});
  c.save(path);
}

}  // namespace tabletop
