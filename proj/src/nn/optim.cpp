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

#include "tabletop/nn/optim.hpp"

#include <cmath>

#include "tabletop/common/error.hpp"

namespace tabletop::nn {

void Adam::step(ParamStore& store, double batch) {
  if (batch <= 0) throw InvalidArgument("batch must be positive");
  double sq = 0.0;
  for (auto& [_, p] : store.all()) {
    p.grad /= batch;
    sq += p.grad.squaredNorm();
  }
  if (!std::isfinite(sq)) throw NonFiniteLoss("gradient is not finite");
  const double norm = std::sqrt(sq);
  const double clip = config_.clip_norm > 0 && norm > config_.clip_norm ? config_.clip_norm / norm : 1.0;

  ++t_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (auto& [name, p] : store.all()) {
    auto& mo = moments_[name];
    if (mo.m.size() == 0) {
      mo.m = Matrix::Zero(p.value.rows(), p.value.cols());
      mo.v = Matrix::Zero(p.value.rows(), p.value.cols());
    }
    const Matrix g = p.grad * clip;
    mo.m = config_.beta1 * mo.m + (1.0 - config_.beta1) * g;
    mo.v = config_.beta2 * mo.v + (1.0 - config_.beta2) * g.cwiseProduct(g);
    p.value.array() -= config_.lr * (mo.m.array() / c1) / ((mo.v.array() / c2).sqrt() + config_.eps);
    p.grad.setZero();
  }
}

}  // namespace tabletop::nn
