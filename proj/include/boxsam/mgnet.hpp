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
#include <string>
#include <vector>

namespace boxsam::net {

enum class EncoderKind { kTinyPyramid, kExternalAdapter };

/// Order of the two operations that turn the stride-4 guidance logits into an
/// attention map at a coarser level.
enum class GuidanceOrder { kResizeThenSigmoid, kSigmoidThenResize };

struct EncoderConfig {
  EncoderKind kind = EncoderKind::kTinyPyramid;
  std::array<int, 4> channels{16, 32, 64, 128};
  int depth = 1;                     // residual blocks per pyramid stage
  bool zero_init_residual = false;   // zero gamma on each block's last norm layer
};

struct MGNetConfig {
  EncoderConfig encoder;
  int width = 64;  // common decoder width D
  int input_height = 480;
  int input_width = 480;
  bool use_cmd = true;
  bool use_cem = true;
  bool use_mfam = true;
  GuidanceOrder guidance_order = GuidanceOrder::kResizeThenSigmoid;
  int cbam_reduction = 16;
  int cbam_kernel = 7;
  int rcab_reduction = 16;
  std::array<int, 3> dilations{1, 3, 5};

  // Throws ConfigError naming the offending field.
  void validate() const;
};

nlohmann::json to_json(const MGNetConfig& config);
MGNetConfig mgnet_config_from_json(const nlohmann::json& doc);

/// Four encoder maps at strides 4, 8, 16 and 32, each (N, C_i, H / 2^(i+1), W / 2^(i+1)).
struct FeaturePyramid {
  std::array<torch::Tensor, 4> levels;
  const torch::Tensor& operator[](std::size_t i) const { return levels[i]; }
};

/// Network outputs. `logits[0]` is P1, the final prediction; every entry is
/// (N, 1, H, W). Intermediates are kept for inspection.
struct MGNetOutputs {
  std::array<torch::Tensor, 4> logits;  // P1..P4 at input resolution
  torch::Tensor guidance;               // P4 at stride 4
  std::array<torch::Tensor, 4> context; // C1..C4
  std::array<torch::Tensor, 3> aggregated;  // M1..M3
  // Foreground / background attention maps S and B at levels 1..3 (undefined
  // when MFAM is disabled).
  std::array<torch::Tensor, 3> foreground;
  std::array<torch::Tensor, 3> background;
};

/// Bilinear resize with half-pixel centres (align_corners = false).
torch::Tensor resize_bilinear(const torch::Tensor& x, int64_t height, int64_t width);

/// Convolution followed by batch normalization and an optional ReLU.
class ConvBnReluImpl : public torch::nn::Module {
 public:
  ConvBnReluImpl(int in_channels, int out_channels, int kernel, int dilation = 1, int stride = 1,
                 bool relu = true);
  torch::Tensor forward(const torch::Tensor& x);

  torch::nn::Conv2d conv{nullptr};
  torch::nn::BatchNorm2d bn{nullptr};

 private:
  bool relu_;
};
TORCH_MODULE(ConvBnRelu);

/// Channel gate followed by spatial gate, both multiplicative.
class CbamImpl : public torch::nn::Module {
 public:
  CbamImpl(int channels, int reduction = 16, int spatial_kernel = 7);

  struct Result {
    torch::Tensor output;
    torch::Tensor channel_gate;  // (N, C, 1, 1)
    torch::Tensor spatial_gate;  // (N, 1, H, W)
  };
  Result forward_with_gates(const torch::Tensor& x);
  torch::Tensor forward(const torch::Tensor& x) { return forward_with_gates(x).output; }

 private:
  torch::nn::Conv2d fc1_{nullptr}, fc2_{nullptr}, spatial_{nullptr};
};
TORCH_MODULE(Cbam);

/// Squeeze-and-excitation style channel attention used inside the BA block.
class ChannelAttentionImpl : public torch::nn::Module {
 public:
  ChannelAttentionImpl(int channels, int reduction);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::Conv2d down_{nullptr}, up_{nullptr};
};
TORCH_MODULE(ChannelAttention);

/// Residual channel attention block with PReLU: x + CA(conv(PReLU(conv(x)))).
class BaBlockImpl : public torch::nn::Module {
 public:
  BaBlockImpl(int channels, int reduction = 16);
  torch::Tensor forward(const torch::Tensor& x);

  torch::nn::Conv2d conv1{nullptr}, conv2{nullptr};

 private:
  torch::nn::PReLU act_{nullptr};
  ChannelAttention attention_{nullptr};
};
TORCH_MODULE(BaBlock);

/// Context enhancement: three dilated branches, a BA detail branch, and a
/// 1x1 fusion. Input is projected to `width` channels on entry.
class CemImpl : public torch::nn::Module {
 public:
  CemImpl(int in_channels, int width, std::array<int, 3> dilations, int rcab_reduction);
  torch::Tensor forward(const torch::Tensor& x);

  // Branch j (0-based) applied to an already projected input:
  // cat(Conv_1(x), Conv_d(Conv_1(x))).
  torch::Tensor branch(std::size_t j, const torch::Tensor& projected);
  ConvBnRelu& entry() { return entry_; }
  ConvBnRelu& branch_first(std::size_t j) { return first_[j]; }
  ConvBnRelu& branch_second(std::size_t j) { return second_[j]; }

 private:
  ConvBnRelu entry_{nullptr};
  std::array<ConvBnRelu, 3> first_{nullptr, nullptr, nullptr};
  std::array<ConvBnRelu, 3> second_{nullptr, nullptr, nullptr};
  torch::nn::BatchNorm2d merge_bn_{nullptr};
  BaBlock detail_{nullptr};
  ConvBnRelu fuse_{nullptr};
};
TORCH_MODULE(Cem);

/// Cascaded mask decoder producing the stride-4 guidance logits P4.
class CmdImpl : public torch::nn::Module {
 public:
  CmdImpl(std::array<int, 4> channels, int width, bool cascade, int cbam_reduction, int cbam_kernel);

  struct Result {
    torch::Tensor low;       // F'_1, stride 4
    torch::Tensor high;      // F'_2, stride 8 (undefined without the cascade)
    torch::Tensor combined;  // P'_4
    torch::Tensor logits;    // P4, single channel, stride 4
  };
  Result forward(const FeaturePyramid& pyramid);

  bool cascade() const { return cascade_; }
  ConvBnRelu& high_fuse() { return fuse_; }
  torch::nn::Conv2d& head() { return head_; }

 private:
  bool cascade_;
  std::array<ConvBnRelu, 4> project_{nullptr, nullptr, nullptr, nullptr};
  Cbam cbam_{nullptr};
  ConvBnRelu low_{nullptr};
  ConvBnRelu fuse_{nullptr};
  torch::nn::Conv2d head_{nullptr};
};
TORCH_MODULE(Cmd);

/// Mask-guided aggregation of level i with the level above it.
class MfamImpl : public torch::nn::Module {
 public:
  MfamImpl(int width, GuidanceOrder order);

  struct Result {
    torch::Tensor aggregated;  // M_i
    torch::Tensor foreground;  // S at level i, (N, 1, h, w)
    torch::Tensor background;  // B = 1 - S
  };
  Result forward(const torch::Tensor& context, const torch::Tensor& upper, const torch::Tensor& guidance);

  // The three 3x3 conv blocks: upper-level edge map, current-level edge map, fusion.
  ConvBnRelu& upper_conv() { return upper_; }
  ConvBnRelu& current_conv() { return current_; }
  ConvBnRelu& fuse_conv() { return fuse_; }

 private:
  GuidanceOrder order_;
  ConvBnRelu upper_{nullptr}, current_{nullptr}, fuse_{nullptr};
};
TORCH_MODULE(Mfam);

/// Replacement aggregation for the MFAM ablation: elementwise product of the
/// adjacent levels, concatenated with the current level, then one conv block.
class PlainAggregationImpl : public torch::nn::Module {
 public:
  explicit PlainAggregationImpl(int width);
  torch::Tensor forward(const torch::Tensor& context, const torch::Tensor& upper);

 private:
  ConvBnRelu conv_{nullptr};
};
TORCH_MODULE(PlainAggregation);

/// Small strided conv pyramid with the 4/8/16/32 stride schedule.
class TinyPyramidEncoderImpl : public torch::nn::Module {
 public:
  explicit TinyPyramidEncoderImpl(const EncoderConfig& config);
  FeaturePyramid forward(const torch::Tensor& images);

 private:
  torch::nn::Sequential stem_{nullptr};
  std::array<torch::nn::Sequential, 4> stages_{nullptr, nullptr, nullptr, nullptr};
};
TORCH_MODULE(TinyPyramidEncoder);

class MGNetImpl : public torch::nn::Module {
 public:
  explicit MGNetImpl(MGNetConfig config);

  const MGNetConfig& config() const { return config_; }

  // Images are (N, 3, H, W) with H, W equal to the configured input size.
  MGNetOutputs forward(const torch::Tensor& images);
  // Runs the decoder on an externally supplied pyramid.
  MGNetOutputs forward_features(const FeaturePyramid& pyramid, int64_t height, int64_t width);

  FeaturePyramid encode(const torch::Tensor& images);

  Cmd& cmd() { return cmd_; }
  Mfam& mfam(int level) { return mfam_.at(level - 1); }
  Cem& cem(int level) { return cem_.at(level - 1); }

  std::int64_t parameter_count() const;

 private:
  MGNetConfig config_;
  TinyPyramidEncoder encoder_{nullptr};
  Cmd cmd_{nullptr};
  std::array<Cem, 4> cem_{nullptr, nullptr, nullptr, nullptr};
  std::array<ConvBnRelu, 4> project_{nullptr, nullptr, nullptr, nullptr};
  std::array<Mfam, 3> mfam_{nullptr, nullptr, nullptr};
  std::array<PlainAggregation, 3> plain_{nullptr, nullptr, nullptr};
  std::array<torch::nn::Conv2d, 3> heads_{nullptr, nullptr, nullptr};
};
TORCH_MODULE(MGNet);

/// Shape-checked pyramid for the external-adapter encoder: reads
/// `<directory>/<id>.pyr` archives holding arrays "F1".."F4" of shape (C, h, w).
FeaturePyramid load_external_pyramid(const std::string& directory, const std::vector<std::string>& ids,
                                     const MGNetConfig& config);

}  // namespace boxsam::net
