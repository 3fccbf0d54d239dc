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

#include <cstdint>

#include "ringfed/losses.hpp"
#include "ringfed/tensor.hpp"

namespace ringfed {

/// Synaptic-intelligence bookkeeping. Travels with the model between centers:
/// w_acc integrates each parameter's contribution to the segmentation-loss
/// decrease during the current visit; consolidation converts it into the
/// non-negative importance omega against the new anchor.
template <class Scalar>
struct SIState {
  VecX<Scalar> w_acc;       // running path contribution at the current center
  VecX<Scalar> omega;       // consolidated importance, sum over finished centers
  VecX<Scalar> anchor;      // parameters at the end of the previous center
  VecX<Scalar> prev_final;  // parameters at the last consolidation
  Scalar c = Scalar(0.1);
  Scalar xi = Scalar(1e-8);
  std::uint32_t center_index = 0;
  bool stepped_since_consolidation = false;

  static SIState init(const VecX<Scalar>& theta0, Scalar c = Scalar(0.1),
                      Scalar xi = Scalar(1e-8)) {
    SIState s;
    const Index n = theta0.size();
    s.w_acc = VecX<Scalar>::Zero(n);
    s.omega = VecX<Scalar>::Zero(n);
    s.anchor = theta0;
    s.prev_final = theta0;
    s.c = c;
    s.xi = xi;
    return s;
  }

  Index size() const { return w_acc.size(); }
};

/// One optimizer step's inputs to the path integral. `g` must be the gradient
/// of the segmentation loss alone (never including the SI penalty), and
/// `delta_theta` the realized parameter change of that step.
template <class Scalar>
struct StepRecord {
  VecX<Scalar> g;
  VecX<Scalar> delta_theta;
  long t = 0;
};

/// w_acc_k += -g_k * dtheta_k. A descent step (dtheta opposing g) adds a
/// positive contribution; the discretization sums to the loss decrease along
/// the trajectory.
template <class Scalar>
void si_accumulate(SIState<Scalar>& si, const StepRecord<Scalar>& rec) {
  if (rec.g.size() != si.size() || rec.delta_theta.size() != si.size())
    throw ShapeError("si_accumulate: length mismatch");
  si.w_acc -= rec.g * rec.delta_theta;
  si.stepped_since_consolidation = true;
}

template <class Scalar>
void si_accumulate(SIState<Scalar>& si, const VecX<Scalar>& g, const VecX<Scalar>& delta_theta) {
  si_accumulate(si, StepRecord<Scalar>{g, delta_theta, 0});
}

/// Center-boundary consolidation:
///   omega_k += max(0, w_acc_k) / ((theta_final_k - anchor_k)^2 + xi)
/// then the anchor moves to theta_final and the accumulator resets. Negative
/// path contributions are clipped: importance tracks loss-reducing motion.
template <class Scalar>
void si_consolidate(SIState<Scalar>& si, const VecX<Scalar>& theta_final) {
  if (theta_final.size() != si.size()) throw ShapeError("si_consolidate: length mismatch");
  if (!si.stepped_since_consolidation)
    throw ShapeError("si_consolidate: no training since previous consolidation");
  si.omega += si.w_acc.max(Scalar(0)) / ((theta_final - si.anchor).square() + si.xi);
  si.prev_final = theta_final;
  si.anchor = theta_final;
  si.w_acc.setZero();
  si.center_index += 1;
  si.stepped_since_consolidation = false;
}

template <class Scalar>
struct PenaltyValue {
  Scalar value = 0;
  VecX<Scalar> grad;
};

/// Quadratic surrogate c * sum_k omega_k (anchor_k - theta_k)^2 with its
/// gradient. Zero before the first consolidation (omega is all zeros then).
template <class Scalar>
PenaltyValue<Scalar> si_penalty(const VecX<Scalar>& theta, const SIState<Scalar>& si) {
  if (theta.size() != si.size()) throw ShapeError("si_penalty: length mismatch");
  PenaltyValue<Scalar> out;
  out.value = si.c * (si.omega * (si.anchor - theta).square()).sum();
  out.grad = Scalar(2) * si.c * si.omega * (theta - si.anchor);
  return out;
}

/// Segmentation loss extended with the SI penalty. The prediction gradient is
/// the segmentation part only; the penalty contributes directly in parameter
/// space, which keeps si_accumulate blind to it by construction.
template <class Scalar>
struct TotalLossValue {
  LossValue<Scalar> seg;
  Scalar penalty = 0;
  Scalar total = 0;
  VecX<Scalar> penalty_grad;
};

template <class Scalar>
TotalLossValue<Scalar> total_loss(const Tensor<Scalar>& pred, const Tensor<Scalar>& target,
                                  const LossConfig<Scalar>& cfg, const VecX<Scalar>& theta,
                                  const SIState<Scalar>& si) {
  TotalLossValue<Scalar> out;
  out.seg = seg_loss(pred, target, cfg);
  PenaltyValue<Scalar> pen = si_penalty(theta, si);
  out.penalty = pen.value;
  out.penalty_grad = std::move(pen.grad);
  out.total = out.seg.total + out.penalty;
  return out;
}

}  // namespace ringfed
