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

#include <map>
#include <string>

#include "tabletop/nn/tape.hpp"

namespace tabletop::nn {

struct AdamConfig {
  double lr = 0.0004;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// Global gradient-norm clip; <= 0 disables.
  double clip_norm = 5.0;
};

/// Adam with bias correction. Consumes p.grad and zeroes it.
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  /// Gradients are divided by `batch` before the update.
  void step(ParamStore& store, double batch = 1.0);
  long steps() const { return t_; }
  void set_learning_rate(double lr) { config_.lr = lr; }
  const AdamConfig& config() const { return config_; }

 private:
  struct Moments {
    Matrix m;
    Matrix v;
  };
  AdamConfig config_;
  std::map<std::string, Moments> moments_;
  long t_ = 0;
};

}  // namespace tabletop::nn
