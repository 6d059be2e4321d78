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

#pragma once

#include <torch/torch.h>

#include <array>
#include <json.hpp>
#include <span>

namespace boxsam::loss {

/// Weighting parameters of the hybrid loss.
struct LossOptions {
  int window = 31;          // boundary window (odd)
  double boundary_gain = 5; // w = 1 + gain * |avgpool(G) - G|
  double smooth = 1.0;      // epsilon in the IoU ratio
};

/// Per-output and total loss values (detached doubles) plus the
/// differentiable total.
struct LossBreakdown {
  struct Term {
    double wbce = 0.0;
    double wiou = 0.0;
  };
  std::array<Term, 4> outputs{};
  double total = 0.0;
  torch::Tensor total_tensor;  // scalar, carries the autograd graph
};

nlohmann::json to_json(const LossBreakdown& breakdown);

/// Boundary-emphasis weights for binary targets G of shape (N, 1, H, W):
/// 1 + gain * |mean over the window of valid in-image pixels - G|.
torch::Tensor pixel_weight(const torch::Tensor& target, const LossOptions& options = {});

/// Weighted binary cross-entropy, evaluated on logits in a numerically stable
/// form: per image sum(w * bce) / sum(w), averaged over the batch.
torch::Tensor weighted_bce(const torch::Tensor& logits, const torch::Tensor& target, const torch::Tensor& weight);

/// Weighted soft IoU loss per image, averaged over the batch:
/// 1 - (sum w p g + eps) / (sum w (p + g - p g) + eps), p = sigmoid(logits).
torch::Tensor weighted_iou(const torch::Tensor& logits, const torch::Tensor& target, const torch::Tensor& weight,
                           double smooth = 1.0);

/// wBCE + wIoU on a single output.
torch::Tensor hybrid_loss(const torch::Tensor& logits, const torch::Tensor& target, const torch::Tensor& weight,
                          double smooth = 1.0);

/// Sum of the hybrid loss over the four outputs P1..P4, all compared against
/// the same target. Throws InvalidInputError unless exactly four outputs are
/// given or when any input is non-finite.
LossBreakdown total_loss(std::span<const torch::Tensor> outputs, const torch::Tensor& target,
                         const LossOptions& options = {});

}  // namespace boxsam::loss
