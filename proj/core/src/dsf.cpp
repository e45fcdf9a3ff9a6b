// Copyright 2026 The semvfi Authors
// SPDX-License-Identifier: Apache-2.0

#include "semvfi/dsf.hpp"

#include "init.hpp"
#include "semvfi/deform_conv.hpp"
#include "semvfi/errors.hpp"

namespace semvfi {

using torch::Tensor;
namespace nn = torch::nn;

void DSFConfig::validate() const {
  expects(groups > 0 && channels == groups * kChannelsPerGroup, "DSFConfig: channels (",
          channels, ") must equal groups (", groups, ") x ", kChannelsPerGroup);
  expects(max_offset > 0, "DSFConfig: max_offset must be positive");
}

DSFConfig DSFConfig::for_site(Site site, int64_t channels) {
  DSFConfig c;
  c.site = site;
  c.channels = channels;
  c.groups = channels / kChannelsPerGroup;
  c.validate();
  return c;
}

Tensor deform_align(const Tensor& value, const DSFState& state, const Tensor& weight,
                    const DSFConfig& config) {
  expects(value.dim() == 4 && value.size(1) == config.channels, "deform_align: V must have ",
          config.channels, " channels, got ", value.sizes());
  expects(state.gate.defined() && state.gate.numel() == 1, "deform_align: gate must be a scalar");
  return state.gate * modulated_deform_conv(value, state.offsets, state.modulations, weight,
                                            config.groups);
}

Tensor offset_magnitude(const Tensor& offsets, int64_t groups) {
  expects(offsets.dim() == 4 && offsets.size(1) == groups * kDeformTaps * 2,
          "offset_magnitude: expected (B,", groups * kDeformTaps * 2, ",h,w), got ",
          offsets.sizes());
  const Tensor xy = offsets.view({offsets.size(0), groups * kDeformTaps, 2, offsets.size(2),
                                  offsets.size(3)});
  return xy.square().sum(2).sqrt().mean(1, true);
}

DsfSiteImpl::DsfSiteImpl(const DSFConfig& config, int64_t context_channels) : config_(config) {
  config.validate();
  const int64_t c = config.channels;
  const int64_t g = config.groups;
  ctx_proj = register_module("ctx_proj", nn::Conv2d(nn::Conv2dOptions(2 * context_channels, c, 1)));
  phi_q = register_module("phi_q", nn::Conv2d(nn::Conv2dOptions(c, c, 1).bias(false)));
  phi_k = register_module("phi_k", nn::Conv2d(nn::Conv2dOptions(c, c, 1).bias(false)));
  phi_v = register_module("phi_v", nn::Conv2d(nn::Conv2dOptions(c, c, 1).bias(false)));
  offset = register_module(
      "offset", nn::Conv2d(nn::Conv2dOptions(2 * c, g * kDeformTaps * 3, 3).padding(1)));
  weight = register_parameter("weight", torch::empty({c, c / g, 3, 3}));
  gate = register_parameter("gate", torch::zeros({2}));

  detail::he_init(ctx_proj);
  detail::he_init(phi_q);
  detail::he_init(phi_k);
  detail::he_init(phi_v);
  detail::zero_init(offset);
  torch::NoGradGuard no_grad;
  nn::init::kaiming_normal_(weight, 0.0, torch::kFanIn, torch::kReLU);
}

Tensor DsfSiteImpl::context(const Tensor& ctx0, const Tensor& ctx1) {
  expects(ctx0.sizes() == ctx1.sizes(), "dsf: context shapes differ: ", ctx0.sizes(), " vs ",
          ctx1.sizes());
  return ctx_proj->forward(torch::cat({ctx0, ctx1}, 1));
}

QKV DsfSiteImpl::project_qkv(const Tensor& f_ctx, const Tensor& d_hat) {
  expects(f_ctx.dim() == 4 && f_ctx.sizes() == d_hat.sizes() &&
              f_ctx.size(1) == config_.channels,
          "project_qkv: f_ctx ", f_ctx.sizes(), " and d_hat ", d_hat.sizes(),
          " must share shape with ", config_.channels, " channels");
  return {phi_q->forward(f_ctx), phi_k->forward(d_hat), phi_v->forward(d_hat)};
}

DSFState DsfSiteImpl::predict_offsets(const Tensor& q, const Tensor& k) {
  expects(q.sizes() == k.sizes(), "predict_offsets: Q ", q.sizes(), " and K ", k.sizes(),
          " differ");
  const int64_t n_offsets = config_.groups * kDeformTaps * 2;
  const Tensor raw = offset->forward(torch::cat({q, k}, 1));
  DSFState state;
  state.offsets = raw.slice(1, 0, n_offsets).clamp(-config_.max_offset, config_.max_offset);
  state.modulations = torch::sigmoid(raw.slice(1, n_offsets));
  return state;
}

Tensor DsfSiteImpl::align(const Tensor& value, DSFState& state, int direction) {
  expects(direction == 0 || direction == 1, "dsf: direction must be 0 or 1");
  state.gate = gate[direction];
  return deform_align(value, state, weight, config_);
}

DsfOutput DsfSiteImpl::forward(const Tensor& ctx0, const Tensor& ctx1, const Tensor& d_hat0,
                               const Tensor& d_hat1) {
  const Tensor f_ctx = context(ctx0, ctx1);
  const Tensor q = phi_q->forward(f_ctx);
  DsfOutput out;
  Tensor injection;
  for (int j = 0; j < 2; ++j) {
    const Tensor& d_hat = j == 0 ? d_hat0 : d_hat1;
    expects(d_hat.sizes() == f_ctx.sizes(), "dsf: refined semantics ", d_hat.sizes(),
            " do not match the site context ", f_ctx.sizes());
    DSFState state = predict_offsets(q, phi_k->forward(d_hat));
    const Tensor aligned = align(phi_v->forward(d_hat), state, j);
    injection = injection.defined() ? injection + aligned : aligned;
    (j == 0 ? out.past : out.future) = std::move(state);
  }
  out.injection = injection;
  return out;
}

}  // namespace semvfi
