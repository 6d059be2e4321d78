// Copyright 2026 The BoxSAM-CPP Authors
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

#include "boxsam/loss.hpp"

#include "boxsam/error.hpp"

namespace boxsam::loss {
namespace F = torch::nn::functional;

namespace {

void require_finite(const torch::Tensor& t, const char* what) {
  if (!torch::isfinite(t).all().item<bool>()) throw InvalidInputError(std::string(what) + " contains NaN or Inf");
}

void require_same_shape(const torch::Tensor& a, const torch::Tensor& b, const char* what) {
  if (a.sizes() != b.sizes())
    throw InvalidInputError(std::string(what) + ": shape " + c10::str(a.sizes()) + " vs " + c10::str(b.sizes()));
}

}  // namespace

nlohmann::json to_json(const LossBreakdown& b) {
  nlohmann::json outputs = nlohmann::json::array();
  for (const auto& t : b.outputs) outputs.push_back({{"wbce", t.wbce}, {"wiou", t.wiou}});
  return {{"outputs", outputs}, {"total", b.total}};
}

torch::Tensor pixel_weight(const torch::Tensor& target, const LossOptions& options) {
  if (target.dim() != 4 || target.size(1) != 1) throw InvalidInputError("target must be (N, 1, H, W)");
  if (options.window < 1 || options.window % 2 == 0) throw InvalidInputError("weight window must be odd");
  const torch::Tensor local = F::avg_pool2d(target, F::AvgPool2dFuncOptions(options.window)
                                                        .stride(1)
                                                        .padding(options.window / 2)
                                                        .count_include_pad(false));
  return 1.0 + options.boundary_gain * torch::abs(local - target);
}

torch::Tensor weighted_bce(const torch::Tensor& logits, const torch::Tensor& target, const torch::Tensor& weight) {
  require_same_shape(logits, target, "weighted_bce");
  require_same_shape(logits, weight, "weighted_bce weight");
  require_finite(logits, "logits");
  require_finite(target, "target");
  // max(x, 0) - x g + log(1 + exp(-|x|))
  const torch::Tensor bce = torch::clamp_min(logits, 0) - logits * target + torch::log1p(torch::exp(-torch::abs(logits)));
  return ((weight * bce).sum({2, 3}) / weight.sum({2, 3})).mean();
}

torch::Tensor weighted_iou(const torch::Tensor& logits, const torch::Tensor& target, const torch::Tensor& weight,
                           double smooth) {
  require_same_shape(logits, target, "weighted_iou");
  require_same_shape(logits, weight, "weighted_iou weight");
  require_finite(logits, "logits");
  require_finite(target, "target");
  const torch::Tensor p = torch::sigmoid(logits);
  const torch::Tensor inter = (weight * p * target).sum({2, 3});
  const torch::Tensor uni = (weight * (p + target - p * target)).sum({2, 3});
  return (1.0 - (inter + smooth) / (uni + smooth)).mean();
}

torch::Tensor hybrid_loss(const torch::Tensor& logits, const torch::Tensor& target, const torch::Tensor& weight,
                          double smooth) {
  return weighted_bce(logits, target, weight) + weighted_iou(logits, target, weight, smooth);
}

LossBreakdown total_loss(std::span<const torch::Tensor> outputs, const torch::Tensor& target,
                         const LossOptions& options) {
  if (outputs.size() != 4)
    throw InvalidInputError("total_loss expects 4 outputs, got " + std::to_string(outputs.size()));
  require_finite(target, "target");
  const torch::Tensor weight = pixel_weight(target, options);
  LossBreakdown b;
  for (std::size_t i = 0; i < 4; ++i) {
    const torch::Tensor bce = weighted_bce(outputs[i], target, weight);
    const torch::Tensor iou = weighted_iou(outputs[i], target, weight, options.smooth);
    b.outputs[i] = {bce.item<double>(), iou.item<double>()};
    b.total_tensor = b.total_tensor.defined() ? b.total_tensor + bce + iou : bce + iou;
  }
  b.total = b.total_tensor.item<double>();
  return b;
}

}  // namespace boxsam::loss
