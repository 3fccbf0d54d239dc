/*
 * Copyright 2026 RingFed Contributors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <vector>

#include "ringfed/model.hpp"

namespace ringfed {

/// RMSProp with Nesterov momentum, plus a halve-on-plateau learning-rate
/// schedule keyed to a higher-is-better validation metric.
template <class Scalar>
struct OptimizerState {
  Scalar base_lr = Scalar(0.001);  // lr before any halving
  Scalar lr = Scalar(0.001);       // current lr; only ever the base halved k times
  Scalar rho = Scalar(0.9);
  Scalar eps = Scalar(1e-4);
  Scalar momentum = Scalar(0.6);
  VecX<Scalar> mean_square;
  VecX<Scalar> velocity;
  int plateau_counter = 0;
  int halvings = 0;
  Scalar plateau_delta = Scalar(1e-4);
  int plateau_patience = 5;

  static OptimizerState init(Index n, Scalar lr0) {
    OptimizerState o;
    o.base_lr = o.lr = lr0;
    o.mean_square = VecX<Scalar>::Zero(n);
    o.velocity = VecX<Scalar>::Zero(n);
    return o;
  }
};

/// One update:
///   a <- rho*a + (1-rho)*g^2
///   u <- g / sqrt(a + eps)
///   v <- m*v - lr*u
///   theta <- theta + m*v - lr*u
/// Returns the realized parameter change (what SI integrates along).
template <class Scalar>
VecX<Scalar> optimizer_step(OptimizerState<Scalar>& opt, ModelState<Scalar>& model,
                            const VecX<Scalar>& g) {
  if (g.size() != model.param_size()) throw ShapeError("optimizer_step: gradient length mismatch");
  require_finite(g, "optimizer_step gradient");
  opt.mean_square = opt.rho * opt.mean_square + (Scalar(1) - opt.rho) * g.square();
  VecX<Scalar> update = g / (opt.mean_square + opt.eps).sqrt();
  opt.velocity = opt.momentum * opt.velocity - opt.lr * update;
  VecX<Scalar> delta = opt.momentum * opt.velocity - opt.lr * update;
  model.theta += delta;
  return delta;
}

/// Re-derives the halving count from the full validation history: an epoch
/// improves when its metric beats the best seen by more than plateau_delta;
/// patience consecutive non-improving epochs trigger one exact halving and
/// reset the counter. Idempotent over the same history.
template <class Scalar>
void step_lr_on_plateau(OptimizerState<Scalar>& opt, const std::vector<Scalar>& val_history) {
  if (val_history.empty()) throw ShapeError("step_lr_on_plateau: empty history");
  Scalar best = val_history[0];
  int counter = 0, halvings = 0;
  for (std::size_t i = 1; i < val_history.size(); ++i) {
    if (val_history[i] > best + opt.plateau_delta) {
      best = val_history[i];
      counter = 0;
    } else if (++counter >= opt.plateau_patience) {
      ++halvings;
      counter = 0;
    }
  }
  opt.halvings = halvings;
  opt.plateau_counter = counter;
  opt.lr = opt.base_lr;
  for (int i = 0; i < halvings; ++i) opt.lr /= Scalar(2);
}

}  // namespace ringfed
