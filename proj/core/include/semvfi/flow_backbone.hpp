// Copyright 2026 The semvfi Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include <torch/torch.h>

namespace semvfi {

/// Total stride of the backbone; frame sizes are padded to a multiple of this.
inline constexpr int64_t kModelStride = 32;

/// Two input frames, the ground-truth middle frame and the timestep.
/// Images are (B,3,H,W) in [0,1]. `igt` may be undefined at inference.
struct FrameTriplet {
  torch::Tensor i0;
  torch::Tensor i1;
  torch::Tensor igt;
  double t = 0.5;

  /// Throws ContractViolation on mismatched shapes, t outside (0,1), or
  /// values outside [0,1].
  void validate() const;
};

/// Reflect padding on the bottom/right edge up to a multiple of kModelStride.
struct Padding {
  int64_t height = 0;
  int64_t width = 0;
  int64_t bottom = 0;
  int64_t right = 0;

  static Padding to_multiple(int64_t height, int64_t width, int64_t multiple = kModelStride);
  bool active() const { return bottom > 0 || right > 0; }
  torch::Tensor pad(const torch::Tensor& image) const;
  torch::Tensor crop(const torch::Tensor& x) const;
};

/// One IFBlock refinement step, upsampled to full resolution.
struct FlowLevel {
  int64_t scale = 1;       // resolution divisor the block operated at
  torch::Tensor flow;      // (B,4,H,W): t->0 in [0,2), t->1 in [2,4)
  torch::Tensor mask;      // (B,1,H,W) fusion mask in [0,1]
  torch::Tensor coarse;    // mask-blended pair of warped inputs
};

struct FlowBundle {
  torch::Tensor flow_t0;      // (B,2,H,W) px, (dx, dy)
  torch::Tensor flow_t1;      // (B,2,H,W) px
  torch::Tensor mask;         // (B,1,H,W) in [0,1]
  torch::Tensor mask_logits;  // pre-sigmoid mask, input to FusionNet and the teacher
  torch::Tensor coarse;       // (B,3,H,W)
  torch::Tensor warped0;
  torch::Tensor warped1;
  std::vector<FlowLevel> pyramid;  // strides 4, 2, 1

  torch::Tensor flow() const { return torch::cat({flow_t0, flow_t1}, 1); }
  FlowBundle cropped(const Padding& padding) const;
};

/// A fixed chain of modules with a plain Tensor -> Tensor forward, so that
/// it can be nested inside other Sequential containers.
class LayerImpl : public torch::nn::SequentialImpl {
 public:
  using SequentialImpl::SequentialImpl;
  torch::Tensor forward(torch::Tensor x) { return SequentialImpl::forward(std::move(x)); }
};
TORCH_MODULE(Layer);

/// Conv2d + PReLU, the backbone's basic layer.
Layer conv_prelu(int64_t in, int64_t out, int64_t kernel = 3, int64_t stride = 1,
                                 int64_t padding = 1);

/// Stride-2 conv followed by a stride-1 conv, both with PReLU.
class Conv2Impl : public torch::nn::Module {
 public:
  Conv2Impl(int64_t in, int64_t out, int64_t stride = 2);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  Layer conv1{nullptr};
  Layer conv2{nullptr};
};
TORCH_MODULE(Conv2);

class IFBlockImpl : public torch::nn::Module {
 public:
  IFBlockImpl(int64_t in_planes, int64_t width);

  /// Returns (flow delta (B,4,H,W), mask-logit delta (B,1,H,W)) at the
  /// input's resolution. `flow` may be undefined for the first block.
  std::pair<torch::Tensor, torch::Tensor> forward(const torch::Tensor& x,
                                                  const torch::Tensor& flow, int64_t scale);

 private:
  torch::nn::Sequential conv0{nullptr};
  torch::nn::Sequential convblock{nullptr};
  torch::nn::ConvTranspose2d lastconv{nullptr};
};
TORCH_MODULE(IFBlock);

struct IFNetConfig {
  std::array<int64_t, 3> widths{240, 150, 90};
  std::array<int64_t, 3> scales{4, 2, 1};
  int64_t teacher_width = 90;
};

/// Coarse-to-fine intermediate flow estimator (three IFBlocks).
class IFNetImpl : public torch::nn::Module {
 public:
  explicit IFNetImpl(const IFNetConfig& config);
  FlowBundle forward(const torch::Tensor& i0, const torch::Tensor& i1, double t);

 private:
  IFNetConfig config_;
  IFBlock block0{nullptr};
  IFBlock block1{nullptr};
  IFBlock block2{nullptr};
};
TORCH_MODULE(IFNet);

struct TeacherOutput {
  torch::Tensor flow_t0;
  torch::Tensor flow_t1;
  torch::Tensor mask;
  torch::Tensor frame;

  torch::Tensor flow() const { return torch::cat({flow_t0, flow_t1}, 1); }
};

/// Training-only refinement block with privileged access to the ground truth.
class TeacherImpl : public IFBlockImpl {
 public:
  explicit TeacherImpl(int64_t width);

  /// Throws ContractViolation when the module is in eval mode.
  TeacherOutput refine(const torch::Tensor& i0, const torch::Tensor& i1, const torch::Tensor& igt,
                       const FlowBundle& student, double t);
};
TORCH_MODULE(Teacher);

/// Context features at strides 2/4/8/16.
using ContextPyramid = std::vector<torch::Tensor>;

class ContextNetImpl : public torch::nn::Module {
 public:
  explicit ContextNetImpl(int64_t base_width = 16);

  /// Unwarped pyramid.
  ContextPyramid features(const torch::Tensor& image);
  /// Pyramid with each level warped by `flow` resized and rescaled to it.
  ContextPyramid forward(const torch::Tensor& image, const torch::Tensor& flow);

  std::array<int64_t, 4> widths() const { return widths_; }

 private:
  std::array<int64_t, 4> widths_;
  Conv2 conv1{nullptr};
  Conv2 conv2{nullptr};
  Conv2 conv3{nullptr};
  Conv2 conv4{nullptr};
};
TORCH_MODULE(ContextNet);

/// Additive feature slots: s2 at stride 4, s3 at stride 8. Empty ports mean
/// baseline behavior.
struct InjectionPorts {
  torch::Tensor s2;
  torch::Tensor s3;

  bool empty() const { return !s2.defined() && !s3.defined(); }
};

struct FusionOutput {
  torch::Tensor residual;  // signed, (B,3,H,W)
  torch::Tensor final;     // clamp(coarse + residual, 0, 1)
};

struct FusionConfig {
  /// Encoder widths at strides 2/4/8/16; widths[1] is the S2 port width and
  /// widths[2] the S3 port width.
  std::array<int64_t, 4> widths{64, 128, 256, 512};
  int64_t out_width = 32;
};

/// U-Net residual predictor (texture stage).
class FusionNetImpl : public torch::nn::Module {
 public:
  FusionNetImpl(const FusionConfig& config, std::array<int64_t, 4> context_widths);

  FusionOutput forward(const torch::Tensor& i0, const torch::Tensor& i1, const FlowBundle& bundle,
                       const ContextPyramid& ctx0, const ContextPyramid& ctx1,
                       const InjectionPorts& ports = {});

  int64_t s2_channels() const { return config_.widths[1]; }
  int64_t s3_channels() const { return config_.widths[2]; }

 private:
  FusionConfig config_;
  Conv2 down0{nullptr};
  Conv2 down1{nullptr};
  Conv2 down2{nullptr};
  Conv2 down3{nullptr};
  Layer up0{nullptr};
  Layer up1{nullptr};
  Layer up2{nullptr};
  Layer up3{nullptr};
  torch::nn::Conv2d conv{nullptr};
};
TORCH_MODULE(FusionNet);

}  // namespace semvfi
