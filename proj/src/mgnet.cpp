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

#include "boxsam/mgnet.hpp"

#include <algorithm>

#include "boxsam/archive.hpp"
#include "boxsam/error.hpp"

namespace boxsam::net {
namespace F = torch::nn::functional;
using nlohmann::json;

namespace {

std::string order_name(GuidanceOrder order) {
  return order == GuidanceOrder::kResizeThenSigmoid ? "resize_then_sigmoid" : "sigmoid_then_resize";
}

torch::nn::Conv2d plain_conv(int in, int out, int kernel, bool bias, int dilation = 1) {
  return torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, kernel)
                               .padding(dilation * (kernel - 1) / 2)
                               .dilation(dilation)
                               .bias(bias));
}

class ResidualBlockImpl : public torch::nn::Module {
 public:
  ResidualBlockImpl(int channels, bool zero_init) {
    a_ = register_module("a", ConvBnRelu(channels, channels, 3));
    b_ = register_module("b", ConvBnRelu(channels, channels, 3, 1, 1, false));
    if (zero_init) torch::nn::init::zeros_(b_->bn->weight);
  }
  torch::Tensor forward(const torch::Tensor& x) { return torch::relu(x + b_(a_(x))); }

 private:
  ConvBnRelu a_{nullptr}, b_{nullptr};
};
TORCH_MODULE(ResidualBlock);

}  // namespace

void MGNetConfig::validate() const {
  if (width < 8) throw ConfigError("width", "decoder width must be >= 8, got " + std::to_string(width));
  if (width % 2 != 0) throw ConfigError("width", "decoder width must be even, got " + std::to_string(width));
  if (input_height <= 0 || input_height % 32 != 0)
    throw ConfigError("input_size.height", "must be a positive multiple of 32, got " + std::to_string(input_height));
  if (input_width <= 0 || input_width % 32 != 0)
    throw ConfigError("input_size.width", "must be a positive multiple of 32, got " + std::to_string(input_width));
  for (std::size_t i = 0; i < 4; ++i) {
    if (encoder.channels[i] < 2)
      throw ConfigError("encoder.channels[" + std::to_string(i) + "]", "must be >= 2");
  }
  if (encoder.depth < 0) throw ConfigError("encoder.depth", "must be >= 0");
  if (cbam_reduction < 1) throw ConfigError("cbam_reduction", "must be >= 1");
  if (cbam_kernel < 1 || cbam_kernel % 2 == 0) throw ConfigError("cbam_kernel", "must be a positive odd number");
  if (rcab_reduction < 1) throw ConfigError("rcab_reduction", "must be >= 1");
  for (int d : dilations)
    if (d < 1) throw ConfigError("dilations", "dilation rates must be >= 1");
}

json to_json(const MGNetConfig& c) {
  return json{
      {"encoder",
       {{"kind", c.encoder.kind == EncoderKind::kTinyPyramid ? "tiny-pyramid" : "external-adapter"},
        {"channels", c.encoder.channels},
        {"depth", c.encoder.depth},
        {"zero_init_residual", c.encoder.zero_init_residual}}},
      {"width", c.width},
      {"input_size", {c.input_height, c.input_width}},
      {"use_cmd", c.use_cmd},
      {"use_cem", c.use_cem},
      {"use_mfam", c.use_mfam},
      {"guidance_order", order_name(c.guidance_order)},
      {"cbam_reduction", c.cbam_reduction},
      {"cbam_kernel", c.cbam_kernel},
      {"rcab_reduction", c.rcab_reduction},
      {"dilations", c.dilations},
  };
}

MGNetConfig mgnet_config_from_json(const json& doc) {
  MGNetConfig c;
  auto field = [&](const char* name, auto& target) {
    if (!doc.contains(name)) return;
    try {
      doc.at(name).get_to(target);
    } catch (const json::exception& e) {
      throw ConfigError(std::string("model.") + name, e.what());
    }
  };
  if (doc.contains("encoder")) {
    const json& enc = doc.at("encoder");
    try {
      const std::string kind = enc.value("kind", std::string("tiny-pyramid"));
      if (kind == "tiny-pyramid") {
        c.encoder.kind = EncoderKind::kTinyPyramid;
      } else if (kind == "external-adapter") {
        c.encoder.kind = EncoderKind::kExternalAdapter;
      } else {
        throw ConfigError("model.encoder.kind", "unknown encoder '" + kind + "'");
      }
      if (enc.contains("channels")) enc.at("channels").get_to(c.encoder.channels);
      c.encoder.depth = enc.value("depth", c.encoder.depth);
      c.encoder.zero_init_residual = enc.value("zero_init_residual", c.encoder.zero_init_residual);
    } catch (const json::exception& e) {
      throw ConfigError("model.encoder", e.what());
    }
  }
  field("width", c.width);
  if (doc.contains("input_size")) {
    std::array<int, 2> size{};
    try {
      doc.at("input_size").get_to(size);
    } catch (const json::exception& e) {
      throw ConfigError("model.input_size", e.what());
    }
    c.input_height = size[0];
    c.input_width = size[1];
  }
  field("use_cmd", c.use_cmd);
  field("use_cem", c.use_cem);
  field("use_mfam", c.use_mfam);
  if (doc.contains("guidance_order")) {
    const std::string order = doc.at("guidance_order").get<std::string>();
    if (order == "resize_then_sigmoid") {
      c.guidance_order = GuidanceOrder::kResizeThenSigmoid;
    } else if (order == "sigmoid_then_resize") {
      c.guidance_order = GuidanceOrder::kSigmoidThenResize;
    } else {
      throw ConfigError("model.guidance_order", "unknown order '" + order + "'");
    }
  }
  field("cbam_reduction", c.cbam_reduction);
  field("cbam_kernel", c.cbam_kernel);
  field("rcab_reduction", c.rcab_reduction);
  field("dilations", c.dilations);
  c.validate();
  return c;
}

torch::Tensor resize_bilinear(const torch::Tensor& x, int64_t height, int64_t width) {
  if (x.size(2) == height && x.size(3) == width) return x;
  return F::interpolate(x, F::InterpolateFuncOptions()
                               .size(std::vector<int64_t>{height, width})
                               .mode(torch::kBilinear)
                               .align_corners(false));
}

// ---------------------------------------------------------------------------

ConvBnReluImpl::ConvBnReluImpl(int in_channels, int out_channels, int kernel, int dilation, int stride, bool relu)
    : relu_(relu) {
  conv = register_module("conv", torch::nn::Conv2d(torch::nn::Conv2dOptions(in_channels, out_channels, kernel)
                                                       .stride(stride)
                                                       .padding(dilation * (kernel - 1) / 2)
                                                       .dilation(dilation)
                                                       .bias(false)));
  bn = register_module("bn", torch::nn::BatchNorm2d(out_channels));
}

torch::Tensor ConvBnReluImpl::forward(const torch::Tensor& x) {
  torch::Tensor y = bn(conv(x));
  return relu_ ? torch::relu(y) : y;
}

CbamImpl::CbamImpl(int channels, int reduction, int spatial_kernel) {
  const int hidden = std::max(1, channels / reduction);
  fc1_ = register_module("fc1", plain_conv(channels, hidden, 1, true));
  fc2_ = register_module("fc2", plain_conv(hidden, channels, 1, true));
  spatial_ = register_module("spatial", plain_conv(2, 1, spatial_kernel, true));
}

CbamImpl::Result CbamImpl::forward_with_gates(const torch::Tensor& x) {
  auto mlp = [&](const torch::Tensor& pooled) { return fc2_(torch::relu(fc1_(pooled))); };
  const torch::Tensor avg = x.mean({2, 3}, true);
  const torch::Tensor max = x.amax({2, 3}, true);
  const torch::Tensor channel_gate = torch::sigmoid(mlp(avg) + mlp(max));
  const torch::Tensor refined = x * channel_gate;

  const torch::Tensor pooled = torch::cat({refined.mean(1, true), refined.amax(1, true)}, 1);
  const torch::Tensor spatial_gate = torch::sigmoid(spatial_(pooled));
  return {refined * spatial_gate, channel_gate, spatial_gate};
}

ChannelAttentionImpl::ChannelAttentionImpl(int channels, int reduction) {
  const int hidden = std::max(1, channels / reduction);
  down_ = register_module("down", plain_conv(channels, hidden, 1, true));
  up_ = register_module("up", plain_conv(hidden, channels, 1, true));
}

torch::Tensor ChannelAttentionImpl::forward(const torch::Tensor& x) {
  const torch::Tensor gate = torch::sigmoid(up_(torch::relu(down_(x.mean({2, 3}, true)))));
  return x * gate;
}

BaBlockImpl::BaBlockImpl(int channels, int reduction) {
  conv1 = register_module("conv1", plain_conv(channels, channels, 3, true));
  act_ = register_module("act", torch::nn::PReLU());
  conv2 = register_module("conv2", plain_conv(channels, channels, 3, true));
  attention_ = register_module("attention", ChannelAttention(channels, reduction));
}

torch::Tensor BaBlockImpl::forward(const torch::Tensor& x) { return x + attention_(conv2(act_(conv1(x)))); }

CemImpl::CemImpl(int in_channels, int width, std::array<int, 3> dilations, int rcab_reduction) {
  const int half = width / 2;
  entry_ = register_module("entry", ConvBnRelu(in_channels, width, 1));
  for (std::size_t j = 0; j < 3; ++j) {
    first_[j] = register_module("branch" + std::to_string(j) + "_first", ConvBnRelu(width, half, 3, 1, 1, false));
    second_[j] = register_module("branch" + std::to_string(j) + "_second",
                                 ConvBnRelu(half, half, 3, dilations[j], 1, false));
  }
  merge_bn_ = register_module("merge_bn", torch::nn::BatchNorm2d(width));
  detail_ = register_module("detail", BaBlock(width, rcab_reduction));
  fuse_ = register_module("fuse", ConvBnRelu(width, width, 1, 1, 1, false));
}

torch::Tensor CemImpl::branch(std::size_t j, const torch::Tensor& projected) {
  const torch::Tensor first = first_[j](projected);
  return torch::cat({first, second_[j](first)}, 1);
}

torch::Tensor CemImpl::forward(const torch::Tensor& x) {
  const torch::Tensor projected = entry_(x);
  const torch::Tensor dilated = merge_bn_(branch(0, projected) + branch(1, projected) + branch(2, projected));
  return torch::relu(fuse_(detail_(projected) + dilated));
}

CmdImpl::CmdImpl(std::array<int, 4> channels, int width, bool cascade, int cbam_reduction, int cbam_kernel)
    : cascade_(cascade) {
  project_[0] = register_module("project1", ConvBnRelu(channels[0], width, 1));
  low_ = register_module("low", ConvBnRelu(width, width, 1));
  if (cascade_) {
    for (std::size_t i = 1; i < 4; ++i)
      project_[i] = register_module("project" + std::to_string(i + 1), ConvBnRelu(channels[i], width, 1));
    cbam_ = register_module("cbam", Cbam(width, cbam_reduction, cbam_kernel));
    fuse_ = register_module("fuse", ConvBnRelu(3 * width, width, 3));
  }
  head_ = register_module("head", plain_conv(width, 1, 3, true));
}

CmdImpl::Result CmdImpl::forward(const FeaturePyramid& pyramid) {
  Result r;
  const torch::Tensor f1 = project_[0](pyramid[0]);
  if (!cascade_) {
    // Single-level variant: the lowest level alone, without channel/spatial attention.
    r.low = low_(f1);
    r.combined = r.low;
  } else {
    const torch::Tensor f2 = project_[1](pyramid[1]);
    const torch::Tensor f3 = project_[2](pyramid[2]);
    const torch::Tensor f4 = project_[3](pyramid[3]);
    const torch::Tensor top = torch::cat({resize_bilinear(f4, f3.size(2), f3.size(3)), f3}, 1);
    r.high = fuse_(torch::cat({resize_bilinear(top, f2.size(2), f2.size(3)), f2}, 1));
    r.low = low_(cbam_(f1));
    r.combined = r.low + resize_bilinear(r.high, f1.size(2), f1.size(3));
  }
  r.logits = head_(r.combined);
  return r;
}

MfamImpl::MfamImpl(int width, GuidanceOrder order) : order_(order) {
  upper_ = register_module("upper", ConvBnRelu(2 * width, width, 3));
  current_ = register_module("current", ConvBnRelu(2 * width, width, 3));
  fuse_ = register_module("fuse", ConvBnRelu(2 * width, width, 3));
}

MfamImpl::Result MfamImpl::forward(const torch::Tensor& context, const torch::Tensor& upper,
                                   const torch::Tensor& guidance) {
  if (context.size(1) != upper.size(1))
    throw ConfigError("width", "MFAM inputs disagree on channel count");
  const int64_t h = context.size(2);
  const int64_t w = context.size(3);
  const torch::Tensor fg = order_ == GuidanceOrder::kResizeThenSigmoid
                               ? torch::sigmoid(resize_bilinear(guidance, h, w))
                               : resize_bilinear(torch::sigmoid(guidance), h, w);
  const torch::Tensor bg = 1.0 - fg;
  const torch::Tensor up = resize_bilinear(upper, h, w);
  const torch::Tensor upper_edges = upper_(torch::cat({fg * up, bg * up}, 1));
  const torch::Tensor current_edges = current_(torch::cat({fg * context, bg * context}, 1));
  return {fuse_(torch::cat({upper_edges, current_edges}, 1)) + up + context, fg, bg};
}

PlainAggregationImpl::PlainAggregationImpl(int width) {
  conv_ = register_module("conv", ConvBnRelu(2 * width, width, 3));
}

torch::Tensor PlainAggregationImpl::forward(const torch::Tensor& context, const torch::Tensor& upper) {
  const torch::Tensor up = resize_bilinear(upper, context.size(2), context.size(3));
  return conv_(torch::cat({up * context, context}, 1));
}

TinyPyramidEncoderImpl::TinyPyramidEncoderImpl(const EncoderConfig& config) {
  const auto& c = config.channels;
  const int stem_mid = std::max(1, c[0] / 2);
  stem_ = register_module("stem", torch::nn::Sequential(ConvBnRelu(3, stem_mid, 3, 1, 2), ConvBnRelu(stem_mid, c[0], 3, 1, 2)));
  for (std::size_t i = 0; i < 4; ++i) {
    torch::nn::Sequential stage;
    if (i > 0) stage->push_back(ConvBnRelu(c[i - 1], c[i], 3, 1, 2));
    for (int d = 0; d < config.depth; ++d) stage->push_back(ResidualBlock(c[i], config.zero_init_residual));
    stages_[i] = register_module("stage" + std::to_string(i + 1), stage);
  }
}

FeaturePyramid TinyPyramidEncoderImpl::forward(const torch::Tensor& images) {
  FeaturePyramid p;
  torch::Tensor x = stem_->forward(images);
  for (std::size_t i = 0; i < 4; ++i) {
    if (!stages_[i]->is_empty()) x = stages_[i]->forward(x);
    p.levels[i] = x;
  }
  return p;
}

// ---------------------------------------------------------------------------

MGNetImpl::MGNetImpl(MGNetConfig config) : config_(std::move(config)) {
  config_.validate();
  const auto& ch = config_.encoder.channels;
  const int d = config_.width;
  if (config_.encoder.kind == EncoderKind::kTinyPyramid)
    encoder_ = register_module("encoder", TinyPyramidEncoder(config_.encoder));
  cmd_ = register_module("cmd", Cmd(ch, d, config_.use_cmd, config_.cbam_reduction, config_.cbam_kernel));
  for (std::size_t i = 0; i < 4; ++i) {
    const std::string level = std::to_string(i + 1);
    if (config_.use_cem) {
      cem_[i] = register_module("cem" + level, Cem(ch[i], d, config_.dilations, config_.rcab_reduction));
    } else {
      project_[i] = register_module("project" + level, ConvBnRelu(ch[i], d, 1));
    }
  }
  for (std::size_t i = 0; i < 3; ++i) {
    const std::string level = std::to_string(i + 1);
    if (config_.use_mfam) {
      mfam_[i] = register_module("mfam" + level, Mfam(d, config_.guidance_order));
    } else {
      plain_[i] = register_module("aggregate" + level, PlainAggregation(d));
    }
    heads_[i] = register_module("head" + level, plain_conv(d, 1, 3, true));
  }
}

FeaturePyramid MGNetImpl::encode(const torch::Tensor& images) {
  if (!encoder_) throw ConfigError("encoder.kind", "external-adapter models take precomputed features");
  if (images.dim() != 4 || images.size(1) != 3) throw InvalidInputError("images must be (N, 3, H, W)");
  if (images.size(2) % 32 != 0 || images.size(3) % 32 != 0)
    throw ConfigError("input_size", "image size " + std::to_string(images.size(2)) + "x" +
                                        std::to_string(images.size(3)) + " is not divisible by 32");
  if (images.size(2) != config_.input_height || images.size(3) != config_.input_width)
    throw ConfigError("input_size", "image size " + std::to_string(images.size(2)) + "x" +
                                        std::to_string(images.size(3)) + " does not match configured " +
                                        std::to_string(config_.input_height) + "x" +
                                        std::to_string(config_.input_width));
  return encoder_(images);
}

MGNetOutputs MGNetImpl::forward(const torch::Tensor& images) {
  return forward_features(encode(images), images.size(2), images.size(3));
}

MGNetOutputs MGNetImpl::forward_features(const FeaturePyramid& pyramid, int64_t height, int64_t width) {
  for (std::size_t i = 0; i < 4; ++i) {
    const auto& f = pyramid[i];
    const int64_t stride = int64_t{4} << i;
    if (!f.defined() || f.dim() != 4 || f.size(1) != config_.encoder.channels[i] || f.size(2) * stride != height ||
        f.size(3) * stride != width)
      throw ConfigError("encoder.channels[" + std::to_string(i) + "]",
                        "feature level F" + std::to_string(i + 1) + " has the wrong shape");
  }

  MGNetOutputs out;
  const auto decoded = cmd_(pyramid);
  out.guidance = decoded.logits;
  for (std::size_t i = 0; i < 4; ++i)
    out.context[i] = config_.use_cem ? cem_[i](pyramid[i]) : project_[i](pyramid[i]);

  torch::Tensor upper = out.context[3];
  for (int i = 2; i >= 0; --i) {
    if (config_.use_mfam) {
      auto r = mfam_[i](out.context[i], upper, out.guidance);
      upper = r.aggregated;
      out.foreground[i] = r.foreground;
      out.background[i] = r.background;
    } else {
      upper = plain_[i](out.context[i], upper);
    }
    out.aggregated[i] = upper;
  }

  for (std::size_t i = 0; i < 3; ++i) out.logits[i] = resize_bilinear(heads_[i](out.aggregated[i]), height, width);
  out.logits[3] = resize_bilinear(out.guidance, height, width);
  return out;
}

std::int64_t MGNetImpl::parameter_count() const {
  std::int64_t total = 0;
  for (const auto& p : parameters()) total += p.numel();
  return total;
}

FeaturePyramid load_external_pyramid(const std::string& directory, const std::vector<std::string>& ids,
                                     const MGNetConfig& config) {
  std::array<std::vector<torch::Tensor>, 4> per_level;
  for (const auto& id : ids) {
    const std::filesystem::path path = std::filesystem::path(directory) / (id + ".pyr");
    const Archive archive = read_archive(path);
    for (std::size_t i = 0; i < 4; ++i) {
      const std::string name = "F" + std::to_string(i + 1);
      const torch::Tensor* t = archive.find(name);
      if (t == nullptr) throw InvalidInputError(path.string() + ": missing feature map " + name);
      const int64_t stride = int64_t{4} << i;
      if (t->dim() != 3 || t->size(0) != config.encoder.channels[i] ||
          t->size(1) * stride != config.input_height || t->size(2) * stride != config.input_width)
        throw InvalidInputError(path.string() + ": feature map " + name + " has shape " +
                                c10::str(t->sizes()) + ", expected (" +
                                std::to_string(config.encoder.channels[i]) + ", " +
                                std::to_string(config.input_height / stride) + ", " +
                                std::to_string(config.input_width / stride) + ")");
      per_level[i].push_back(t->to(torch::kFloat32));
    }
  }
  FeaturePyramid p;
  for (std::size_t i = 0; i < 4; ++i) p.levels[i] = torch::stack(per_level[i]);
  return p;
}

}  // namespace boxsam::net
