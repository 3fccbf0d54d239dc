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

#include "ringfed/tensor.hpp"

namespace ringfed {

/// Trade-off alpha weights the sensitivity term of the VSS loss; at the
/// default 0.95 the optimum keeps sensitivity high at some precision cost.
template <class Scalar>
struct LossConfig {
  Scalar alpha = Scalar(0.95);
  Scalar epsilon_den = Scalar(1e-6);
};

/// One volume's (or one patch's) loss with its gradient w.r.t. predictions.
template <class Scalar>
struct LossValue {
  Scalar total = 0;
  Scalar bce = 0;
  Scalar vss = 0;
  Tensor<Scalar> grad;
};

namespace detail {
template <class Scalar>
void check_loss_inputs(const Tensor<Scalar>& pred, const Tensor<Scalar>& target) {
  require_same_shape(pred, target, "loss");
  if (pred.size() == 0) throw ShapeError("loss: empty prediction");
}
}  // namespace detail

/// Mean over voxels of -[y ln p + (1-y) ln(1-p)].
template <class Scalar>
LossValue<Scalar> bce_loss(const Tensor<Scalar>& pred, const Tensor<Scalar>& target) {
  detail::check_loss_inputs(pred, target);
  const Scalar n = Scalar(pred.size());
  const auto& p = pred.data;
  const auto& y = target.data;
  LossValue<Scalar> out;
  out.bce = -((y * p.log() + (Scalar(1) - y) * (Scalar(1) - p).log()).sum()) / n;
  out.total = out.bce;
  out.grad = Tensor<Scalar>{pred.shape, ((p - y) / (p * (Scalar(1) - p))) / n};
  return out;
}

/// Volume-level sensitivity/specificity loss:
///   alpha*(1 - sum(p*y)/(sum(y)+eps)) + (1-alpha)*(1 - sum((1-p)(1-y))/(sum(1-y)+eps))
/// Volumes without any foreground keep only the specificity term.
template <class Scalar>
LossValue<Scalar> vss_loss(const Tensor<Scalar>& pred, const Tensor<Scalar>& target,
                           const LossConfig<Scalar>& cfg) {
  detail::check_loss_inputs(pred, target);
  const auto& p = pred.data;
  const auto& y = target.data;
  const Scalar fg = y.sum();
  const Scalar bg = Scalar(pred.size()) - fg;
  const Scalar sens_den = fg + cfg.epsilon_den;
  const Scalar spec_den = bg + cfg.epsilon_den;
  const Scalar soft_sens = (p * y).sum() / sens_den;
  const Scalar soft_spec = ((Scalar(1) - p) * (Scalar(1) - y)).sum() / spec_den;
  LossValue<Scalar> out;
  VecX<Scalar> grad = (Scalar(1) - cfg.alpha) * (Scalar(1) - y) / spec_den;
  out.vss = (Scalar(1) - cfg.alpha) * (Scalar(1) - soft_spec);
  if (fg > Scalar(0)) {
    out.vss += cfg.alpha * (Scalar(1) - soft_sens);
    grad -= cfg.alpha * y / sens_den;
  }
  out.total = out.vss;
  out.grad = Tensor<Scalar>{pred.shape, std::move(grad)};
  return out;
}

/// Composite segmentation objective: BCE + VSS, gradients summed.
template <class Scalar>
LossValue<Scalar> seg_loss(const Tensor<Scalar>& pred, const Tensor<Scalar>& target,
                           const LossConfig<Scalar>& cfg) {
  LossValue<Scalar> b = bce_loss(pred, target);
  LossValue<Scalar> v = vss_loss(pred, target, cfg);
  LossValue<Scalar> out;
  out.bce = b.bce;
  out.vss = v.vss;
  out.total = b.bce + v.vss;
  out.grad = Tensor<Scalar>{pred.shape, b.grad.data + v.grad.data};
  return out;
}

/// Batch wrapper: per-item seg_loss averaged over items; per-item gradients
/// carry the 1/n factor so summing item parameter gradients downstream yields
/// the batch-mean gradient.
template <class Scalar>
struct BatchLossValue {
  Scalar total = 0;
  Scalar bce = 0;
  Scalar vss = 0;
  std::vector<Tensor<Scalar>> grads;
};

template <class Scalar>
BatchLossValue<Scalar> seg_loss_batch(const std::vector<Tensor<Scalar>>& preds,
                                      const std::vector<Tensor<Scalar>>& targets,
                                      const LossConfig<Scalar>& cfg) {
  if (preds.size() != targets.size() || preds.empty())
    throw ShapeError("seg_loss_batch: item count mismatch");
  const Scalar inv_n = Scalar(1) / Scalar(preds.size());
  BatchLossValue<Scalar> out;
  out.grads.reserve(preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i) {
    LossValue<Scalar> item = seg_loss(preds[i], targets[i], cfg);
    out.bce += item.bce * inv_n;
    out.vss += item.vss * inv_n;
    item.grad.data *= inv_n;
    out.grads.push_back(std::move(item.grad));
  }
  out.total = out.bce + out.vss;
  return out;
}

}  // namespace ringfed
