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

#include <array>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "tabletop/ground/model.hpp"

namespace tabletop {

enum class Module : int { subj = 0, loc = 1, rel = 2 };
inline constexpr int kNumModules = 3;

/// Plain-value view of an encoded expression.
struct EncodedExpression {
  std::array<Eigen::VectorXd, kNumModules> phrase;         ///< q^subj, q^loc, q^rel
  Eigen::Vector3d module_weights;                          ///< softmax output
  std::array<Eigen::VectorXd, kNumModules> word_attention;  ///< per token, sums to 1
  Eigen::MatrixXd hidden_states;                           ///< 2H x T
};

/// Tape view of an encoded expression.
struct ExpressionVars {
  std::array<nn::Var, kNumModules> phrase;
  nn::Var weights;
  std::array<nn::Var, kNumModules> attention;
  nn::Var states;

  EncodedExpression values() const;
};

/// Visual-module representations of one candidate.
struct CandidateVars {
  nn::Var subj_hidden;  ///< shared appearance projection (also the attribute-head input)
  nn::Var subj;
  nn::Var loc_hidden;
  nn::Var loc;
  std::vector<nn::Var> rel_hidden;  ///< one per present context object
  std::vector<nn::Var> rel;
};

struct ScoreVars {
  nn::Var total;
  std::array<nn::Var, kNumModules> module;
};

/// Word tokens of an expression: BOS and EOS are dropped. Throws
/// InvalidArgument when nothing remains and UnknownToken on bad indices.
std::vector<int> expression_words(std::span<const int> tokens, int vocab_size);

ExpressionVars encode_expression(const nn::Binder& b, std::span<const int> tokens,
                                 int vocab_size);
EncodedExpression encode_expression(std::span<const int> tokens, const GroundingModel& model);

CandidateVars encode_candidate(const nn::Binder& b, const ObjectCandidate& c);

ScoreVars match_score(const ExpressionVars& e, const CandidateVars& c);
/// Weighted average of the three module cosines.
double match_score(const ObjectCandidate& candidate, const EncodedExpression& encoded,
                   const GroundingModel& model);
double combine_module_scores(const Eigen::Vector3d& weights,
                             const std::array<double, kNumModules>& scores);

struct MatchResult {
  std::vector<int> ids;  ///< candidate ids in input order
  std::vector<double> scores;
  std::vector<std::array<double, kNumModules>> module_scores;
  std::vector<int> ranking;  ///< ids by descending score, ties by id
  std::vector<int> ambiguous_set;
  EncodedExpression encoded;

  double score_of(int id) const;
  int top() const { return ranking.front(); }
};

/// Ids by descending score, ties broken by ascending id.
std::vector<int> rank_by_score(const std::vector<int>& ids, const std::vector<double>& scores);
/// {i : top - score_i < m1}, in ranking order. Always contains the top.
std::vector<int> ambiguous_set(const std::vector<int>& ids, const std::vector<double>& scores,
                               double m1);

MatchResult comprehend(const std::vector<ObjectCandidate>& candidates, std::span<const int> tokens,
                       const GroundingModel& model, double m1 = 0.1);

}  // namespace tabletop
