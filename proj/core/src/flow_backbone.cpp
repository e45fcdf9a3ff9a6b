// Copyright 2026 The semvfi Authors
// SPDX-License-Identifier: Apache-2.0

#include "semvfi/flow_backbone.hpp"

#include "semvfi/errors.hpp"
#include "semvfi/warp.hpp"

namespace semvfi {

using torch::Tensor;
namespace F = torch::nn::functional;

void FrameTriplet::validate() const {
  expects(i0.defined() && i1.defined(), "FrameTriplet: i0 and i1 are required");
  expects(i0.dim() == 4 && i0.size(1) == 3, "FrameTriplet: images must be (B,3,H,W), got ",
          i0.sizes());
  expects(i0.sizes() == i1.sizes(), "FrameTriplet: i0 ", i0.sizes(), " and i1 ", i1.sizes(),
          " differ");
  if (igt.defined()) {
    expects(igt.sizes() == i0.sizes(), "FrameTriplet: igt ", igt.sizes(), " differs from i0 ",
            i0.sizes());
  }
  expects(t > 0.0 && t < 1.0, "FrameTriplet: t must lie in (0,1), got ", t);
  for (const Tensor* image : {&i0, &i1, &igt}) {
    if (!image->defined()) continue;
    const double lo = image->min().item<double>();
    const double hi = image->max().item<double>();
    expects(lo >= 0.0 && hi <= 1.0, "FrameTriplet: pixel values must lie in [0,1], got [", lo,
            ", ", hi, "]");
  }
}

Padding Padding::to_multiple(int64_t height, int64_t width, int64_t multiple) {
  expects(height > 0 && width > 0 && multiple > 0, "Padding: invalid size ", height, "x", width);
  Padding p;
  p.height = height;
  p.width = width;
  p.bottom = (multiple - height % multiple) % multiple;
  p.right = (multiple - width % multiple) % multiple;
  return p;
}

Tensor Padding::pad(const Tensor& image) const {
  if (!active()) return image;
  // Reflection needs the pad to be smaller than the extent; fall back to edge replication.
  const bool reflectable = bottom < image.size(-2) && right < image.size(-1);
  return F::pad(image, F::PadFuncOptions({0, right, 0, bottom})
                           .mode(reflectable ? F::PadFuncOptions::mode_t(torch::kReflect)
                                                       : F::PadFuncOptions::mode_t(torch::kReplicate)));
}

Tensor Padding::crop(const Tensor& x) const {
  if (!active() || !x.defined()) return x;
  return x.slice(-2, 0, height).slice(-1, 0, width);
}

FlowBundle FlowBundle::cropped(const Padding& padding) const {
  if (!padding.active()) return *this;
  FlowBundle out;
  out.flow_t0 = padding.crop(flow_t0);
  out.flow_t1 = padding.crop(flow_t1);
  out.mask = padding.crop(mask);
  out.mask_logits = padding.crop(mask_logits);
  out.coarse = padding.crop(coarse);
  out.warped0 = padding.crop(warped0);
  out.warped1 = padding.crop(warped1);
  for (const auto& level : pyramid) {
    out.pyramid.push_back({level.scale, padding.crop(level.flow), padding.crop(level.mask),
                           padding.crop(level.coarse)});
  }
  return out;
}

Layer conv_prelu(int64_t in, int64_t out, int64_t kernel, int64_t stride, int64_t padding) {
  return Layer(
      torch::nn::Conv2d(
          torch::nn::Conv2dOptions(in, out, kernel).stride(stride).padding(padding).bias(true)),
      torch::nn::PReLU(torch::nn::PReLUOptions().num_parameters(out)));
}

namespace {

Layer deconv_prelu(int64_t in, int64_t out) {
  return Layer(
      torch::nn::ConvTranspose2d(
          torch::nn::ConvTranspose2dOptions(in, out, 4).stride(2).padding(1).bias(true)),
      torch::nn::PReLU(torch::nn::PReLUOptions().num_parameters(out)));
}

Tensor time_plane(const Tensor& like, double t) {
  return torch::full({like.size(0), 1, like.size(2), like.size(3)}, t, like.options());
}

Tensor blend(const Tensor& warped0, const Tensor& warped1, const Tensor& mask) {
  return warped0 * mask + warped1 * (1 - mask);
}

}  // namespace

Conv2Impl::Conv2Impl(int64_t in, int64_t out, int64_t stride)
    : conv1(register_module("conv1", conv_prelu(in, out, 3, stride, 1))),
      conv2(register_module("conv2", conv_prelu(out, out, 3, 1, 1))) {}

Tensor Conv2Impl::forward(const Tensor& x) { return conv2->forward(conv1->forward(x)); }

IFBlockImpl::IFBlockImpl(int64_t in_planes, int64_t width) {
  conv0 = register_module("conv0", torch::nn::Sequential(conv_prelu(in_planes, width / 2, 3, 2, 1),
                                                         conv_prelu(width / 2, width, 3, 2, 1)));
  convblock = torch::nn::Sequential();
  for (int i = 0; i < 8; ++i) {
    convblock->push_back(conv_prelu(width, width));
  }
  register_module("convblock", convblock);
  lastconv = register_module(
      "lastconv", torch::nn::ConvTranspose2d(
                      torch::nn::ConvTranspose2dOptions(width, 5, 4).stride(2).padding(1)));
}

std::pair<Tensor, Tensor> IFBlockImpl::forward(const Tensor& x_in, const Tensor& flow_in,
                                               int64_t scale) {
  const int64_t height = x_in.size(2);
  const int64_t width = x_in.size(3);
  const int64_t h = height / scale;
  const int64_t w = width / scale;
  Tensor x = resize_bilinear(x_in, h, w);
  if (flow_in.defined()) {
    x = torch::cat({x, resize_bilinear(flow_in, h, w) * (1.0 / static_cast<double>(scale))}, 1);
  }
  x = conv0->forward(x);
  x = convblock->forward(x) + x;
  Tensor tmp = resize_bilinear(lastconv->forward(x), height, width);
  return {tmp.slice(1, 0, 4) * static_cast<double>(scale * 2), tmp.slice(1, 4, 5)};
}

IFNetImpl::IFNetImpl(const IFNetConfig& config) : config_(config) {
  // block0 sees (i0, i1, t); later blocks add both warps and the mask logits.
  block0 = register_module("block0", IFBlock(7, config.widths[0]));
  block1 = register_module("block1", IFBlock(14 + 4, config.widths[1]));
  block2 = register_module("block2", IFBlock(14 + 4, config.widths[2]));
}

FlowBundle IFNetImpl::forward(const Tensor& i0, const Tensor& i1, double t) {
  expects(i0.dim() == 4 && i0.sizes() == i1.sizes(), "IFNet: frame shapes differ: ", i0.sizes(),
          " vs ", i1.sizes());
  expects(i0.size(2) % kModelStride == 0 && i0.size(3) % kModelStride == 0,
          "IFNet: frame size ", i0.size(2), "x", i0.size(3), " is not a multiple of ",
          kModelStride, "; pad first");
  const Tensor tp = time_plane(i0, t);
  std::array<IFBlock*, 3> blocks{&block0, &block1, &block2};

  FlowBundle bundle;
  Tensor flow;
  Tensor mask_logits;
  Tensor warped0 = i0;
  Tensor warped1 = i1;
  for (size_t level = 0; level < blocks.size(); ++level) {
    const int64_t scale = config_.scales[level];
    if (level == 0) {
      std::tie(flow, mask_logits) = (*blocks[level])->forward(torch::cat({i0, i1, tp}, 1), {}, scale);
    } else {
      auto [flow_delta, mask_delta] = (*blocks[level])->forward(
          torch::cat({i0, i1, warped0, warped1, mask_logits, tp}, 1), flow, scale);
      flow = flow + flow_delta;
      mask_logits = mask_logits + mask_delta;
    }
    const Tensor mask = torch::sigmoid(mask_logits);
    warped0 = backward_warp(i0, flow.slice(1, 0, 2));
    warped1 = backward_warp(i1, flow.slice(1, 2, 4));
    bundle.pyramid.push_back({scale, flow, mask, blend(warped0, warped1, mask)});
  }
  const FlowLevel& last = bundle.pyramid.back();
  bundle.flow_t0 = flow.slice(1, 0, 2);
  bundle.flow_t1 = flow.slice(1, 2, 4);
  bundle.mask = last.mask;
  bundle.mask_logits = mask_logits;
  bundle.coarse = last.coarse;
  bundle.warped0 = warped0;
  bundle.warped1 = warped1;
  return bundle;
}

TeacherImpl::TeacherImpl(int64_t width) : IFBlockImpl(14 + 3 + 4, width) {}

TeacherOutput TeacherImpl::refine(const Tensor& i0, const Tensor& i1, const Tensor& igt,
                                  const FlowBundle& student, double t) {
  expects(is_training(), "teacher_refine: the teacher block is training-only");
  expects(igt.defined() && igt.sizes() == i0.sizes(),
          "teacher_refine: ground truth with the input shape is required");
  const Tensor flow = student.flow();
  auto [flow_delta, mask_delta] = forward(
      torch::cat({i0, i1, student.warped0, student.warped1, student.mask_logits, time_plane(i0, t),
                  igt},
                 1),
      flow, 1);
  const Tensor teacher_flow = flow + flow_delta;
  TeacherOutput out;
  out.flow_t0 = teacher_flow.slice(1, 0, 2);
  out.flow_t1 = teacher_flow.slice(1, 2, 4);
  out.mask = torch::sigmoid(student.mask_logits + mask_delta);
  out.frame = blend(backward_warp(i0, out.flow_t0), backward_warp(i1, out.flow_t1), out.mask);
  return out;
}

ContextNetImpl::ContextNetImpl(int64_t base_width)
    : widths_{base_width, base_width * 2, base_width * 4, base_width * 8} {
  conv1 = register_module("conv1", Conv2(3, widths_[0]));
  conv2 = register_module("conv2", Conv2(widths_[0], widths_[1]));
  conv3 = register_module("conv3", Conv2(widths_[1], widths_[2]));
  conv4 = register_module("conv4", Conv2(widths_[2], widths_[3]));
}

ContextPyramid ContextNetImpl::features(const Tensor& image) {
  ContextPyramid pyramid;
  Tensor x = image;
  for (Conv2* stage : {&conv1, &conv2, &conv3, &conv4}) {
    x = (*stage)->forward(x);
    pyramid.push_back(x);
  }
  return pyramid;
}

ContextPyramid ContextNetImpl::forward(const Tensor& image, const Tensor& flow) {
  ContextPyramid pyramid = features(image);
  for (auto& level : pyramid) {
    level = backward_warp(level, resize_flow(flow, level.size(2), level.size(3)));
  }
  return pyramid;
}

FusionNetImpl::FusionNetImpl(const FusionConfig& config, std::array<int64_t, 4> ctx)
    : config_(config) {
  const auto& w = config.widths;
  down0 = register_module("down0", Conv2(17, w[0]));
  down1 = register_module("down1", Conv2(w[0] + 2 * ctx[0], w[1]));
  down2 = register_module("down2", Conv2(w[1] + 2 * ctx[1], w[2]));
  down3 = register_module("down3", Conv2(w[2] + 2 * ctx[2], w[3]));
  up0 = register_module("up0", deconv_prelu(w[3] + 2 * ctx[3], w[2]));
  up1 = register_module("up1", deconv_prelu(2 * w[2], w[1]));
  up2 = register_module("up2", deconv_prelu(2 * w[1], w[0]));
  up3 = register_module("up3", deconv_prelu(2 * w[0], config.out_width));
  conv = register_module("conv",
                         torch::nn::Conv2d(torch::nn::Conv2dOptions(config.out_width, 3, 3).padding(1)));
}

FusionOutput FusionNetImpl::forward(const Tensor& i0, const Tensor& i1, const FlowBundle& bundle,
                                    const ContextPyramid& ctx0, const ContextPyramid& ctx1,
                                    const InjectionPorts& ports) {
  expects(ctx0.size() == 4 && ctx1.size() == 4, "fuse: context pyramids need 4 levels");
  expects(ports.s2.defined() == ports.s3.defined(),
          "fuse: injection ports must be both empty or both filled");
  Tensor s0 = down0->forward(torch::cat(
      {i0, i1, bundle.warped0, bundle.warped1, bundle.mask_logits, bundle.flow()}, 1));
  Tensor s1 = down1->forward(torch::cat({s0, ctx0[0], ctx1[0]}, 1));
  if (ports.s2.defined()) {
    expects(ports.s2.sizes() == s1.sizes(), "fuse: S2 port ", ports.s2.sizes(),
            " does not match encoder feature ", s1.sizes());
    s1 = s1 + ports.s2;
  }
  Tensor s2 = down2->forward(torch::cat({s1, ctx0[1], ctx1[1]}, 1));
  if (ports.s3.defined()) {
    expects(ports.s3.sizes() == s2.sizes(), "fuse: S3 port ", ports.s3.sizes(),
            " does not match encoder feature ", s2.sizes());
    s2 = s2 + ports.s3;
  }
  Tensor s3 = down3->forward(torch::cat({s2, ctx0[2], ctx1[2]}, 1));
  Tensor x = up0->forward(torch::cat({s3, ctx0[3], ctx1[3]}, 1));
  x = up1->forward(torch::cat({x, s2}, 1));
  x = up2->forward(torch::cat({x, s1}, 1));
  x = up3->forward(torch::cat({x, s0}, 1));
  FusionOutput out;
  out.residual = torch::sigmoid(conv->forward(x)) * 2 - 1;
  out.final = torch::clamp(bundle.coarse + out.residual, 0.0, 1.0);
  return out;
}

}  // namespace semvfi
