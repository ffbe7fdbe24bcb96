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

#include <functional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "tabletop/ground/grounder.hpp"
#include "tabletop/lang/grammar.hpp"

namespace tabletop {

struct TargetVisualRep {
  Eigen::VectorXd v_vis;
  Eigen::VectorXd v_loc;
  Eigen::VectorXd v_rel;

  Eigen::VectorXd v() const;
};

/// [v_vis; v_loc; v_rel]. v_vis reuses the grounder's shared appearance
/// projection, v_loc its location hidden layer, v_rel the elementwise max
/// of its relationship hidden layers (zero when there are no neighbors).
nn::Var visual_rep(const nn::Binder& b, const CandidateVars& c, int joint_dim);
TargetVisualRep visual_rep(const ObjectCandidate& candidate, const GroundingModel& model);

/// -sum_t log P(token_t | v, tokens_<t). `tokens` must end with EOS.
nn::Var decode_nll(const nn::Binder& b, nn::Var v, std::span<const int> tokens);
double decode_nll(const TargetVisualRep& v, std::span<const int> tokens,
                  const GroundingModel& model);

/// Next-token distributions after each prefix of `tokens` (teacher forcing).
std::vector<Eigen::VectorXd> step_distributions(const TargetVisualRep& v,
                                                std::span<const int> tokens,
                                                const GroundingModel& model);

/// lambda3 * max(0, m2 + logp_other - logp_target)
double mmi_loss(double logp_target, double logp_other, double m2, double lambda3);
nn::Var mmi_loss(nn::Var logp_target, nn::Var logp_other, double m2, double lambda3);

struct BeamHypothesis {
  std::vector<int> tokens;  ///< emitted tokens, EOS included when emitted
  double log_prob = 0.0;
  bool finished = false;

  double score(bool length_normalize) const;
};

struct BeamConfig {
  int width = 5;
  /// Token budget including EOS: 12 words plus EOS.
  int max_len = kMaxExpressionWords + 1;
  bool length_normalize = true;
};

/// Log-probabilities of the next token given the emitted prefix; entries of
/// -inf are never expanded.
using NextTokenFn = std::function<Eigen::VectorXd(std::span<const int> prefix)>;

/// Beam search keeping `width` hypotheses per step by raw log-probability.
/// Hypotheses finish on EOS or at max_len; the finished pool is returned
/// best first by (normalized) score, ties by token sequence, at most
/// `width` entries.
std::vector<BeamHypothesis> beam_search(const NextTokenFn& next, int eos, const BeamConfig& cfg);
std::vector<BeamHypothesis> beam_search(const TargetVisualRep& v, const GroundingModel& model,
                                        const BeamConfig& cfg = {});

struct RerankResult {
  std::size_t best = 0;
  std::vector<double> margins;  ///< Δ per hypothesis
};

/// Δ(h) = S(target | h) - max over other candidates of S(o_k | h), with the
/// max over an empty set taken as -1. Highest Δ wins, ties by log_prob.
RerankResult rerank(const std::vector<BeamHypothesis>& hypotheses,
                    const std::vector<ObjectCandidate>& candidates, int target_id,
                    const GroundingModel& model);

/// beam_search on the target, then rerank; returns the chosen tokens.
std::vector<int> generate_referring_expression(const std::vector<ObjectCandidate>& candidates,
                                               int target_id, const GroundingModel& model,
                                               const BeamConfig& cfg = {});

}  // namespace tabletop
