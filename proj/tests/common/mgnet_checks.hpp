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

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "boxsam/loss.hpp"
#include "boxsam/mgnet.hpp"

namespace boxsam::testing {

inline net::MGNetConfig small_config(int width, int size) {
  net::MGNetConfig c;
  c.width = width;
  c.input_height = size;
  c.input_width = size;
  c.encoder.channels = {8, 12, 16, 24};
  c.cbam_reduction = 4;
  c.rcab_reduction = 4;
  return c;
}

inline torch::Tensor random_target(int n, int size, std::uint64_t seed, torch::Dtype dtype = torch::kFloat32) {
  torch::manual_seed(seed);
  auto blobs = torch::rand({n, 1, size / 4, size / 4}) > 0.6;
  auto up = torch::nn::functional::interpolate(
      blobs.to(torch::kFloat32),
      torch::nn::functional::InterpolateFuncOptions().size(std::vector<int64_t>{size, size}).mode(torch::kNearest));
  return up.to(dtype);
}

/// Largest |S + B - 1| over every MFAM level.
inline double complement_deviation(const net::MGNetOutputs& out) {
  double worst = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    if (!out.foreground[i].defined()) continue;
    const double d = (out.foreground[i] + out.background[i] - 1.0).abs().max().item<double>();
    worst = std::max(worst, d);
  }
  return worst;
}

/// Zeroes the three convolutions of every MFAM and reports whether each
/// aggregated map equals upsampled upper map plus context exactly.
inline bool residual_surgery_exact(net::MGNet& model, const torch::Tensor& images) {
  torch::NoGradGuard guard;
  for (int level = 1; level <= 3; ++level) {
    auto& m = model->mfam(level);
    m->upper_conv()->conv->weight.zero_();
    m->current_conv()->conv->weight.zero_();
    m->fuse_conv()->conv->weight.zero_();
  }
  const auto out = model->forward(images);
  bool exact = true;
  for (int i = 2; i >= 0; --i) {
    const torch::Tensor& upper = i == 2 ? out.context[3] : out.aggregated[i + 1];
    const auto& c = out.context[i];
    const auto expected = net::resize_bilinear(upper, c.size(2), c.size(3)) + c;
    exact = exact && torch::equal(out.aggregated[i], expected);
  }
  return exact;
}

struct GradSample {
  std::string name;
  int64_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double relative_error = 0.0;
};

/// Central finite differences of the total loss against autograd for
/// `count` randomly drawn scalar parameters, in double precision with
/// batch-norm layers in inference mode. The small step keeps the stencil
/// from straddling ReLU kinks; draws whose analytic gradient is below
/// `min_gradient` are redrawn, since rounding dominates there.
inline std::vector<GradSample> gradient_check(const net::MGNetConfig& config, int count, std::uint64_t seed,
                                              double step = 1e-7, double min_gradient = 1e-5) {
  torch::manual_seed(seed);
  net::MGNet model(config);
  model->to(torch::kFloat64);
  model->eval();
  const int size = config.input_height;
  const auto images = torch::rand({2, 3, size, size}, torch::kFloat64);
  const auto target = random_target(2, size, seed + 1, torch::kFloat64);

  auto loss_value = [&]() {
    torch::NoGradGuard guard;
    const auto out = model->forward(images);
    return loss::total_loss(out.logits, target).total;
  };

  model->zero_grad();
  const auto out = model->forward(images);
  loss::total_loss(out.logits, target).total_tensor.backward();

  const auto named = model->named_parameters(true);
  std::vector<std::pair<std::string, torch::Tensor>> params;
  for (const auto& item : named) params.emplace_back(item.key(), item.value());

  std::mt19937_64 rng(seed);
  std::vector<GradSample> samples;
  int attempts = 0;
  while (static_cast<int>(samples.size()) < count && attempts < count * 200) {
    ++attempts;
    auto& [name, p] = params[rng() % params.size()];
    const int64_t index = static_cast<int64_t>(rng() % static_cast<std::uint64_t>(p.numel()));
    const double analytic = p.grad().reshape({-1})[index].item<double>();
    if (std::abs(analytic) < min_gradient) continue;

    auto flat = p.data().view({-1});
    const double original = flat[index].item<double>();
    flat[index] = original + step;
    const double plus = loss_value();
    flat[index] = original - step;
    const double minus = loss_value();
    flat[index] = original;

    GradSample s{name, index, analytic, (plus - minus) / (2.0 * step), 0.0};
    s.relative_error = std::abs(s.analytic - s.numeric) / std::max(std::abs(s.analytic), std::abs(s.numeric));
    samples.push_back(s);
  }
  return samples;
}

}  // namespace boxsam::testing
