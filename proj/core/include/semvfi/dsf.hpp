// Copyright 2026 The semvfi Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

#include <torch/torch.h>

#include "semvfi/split_fapm.hpp"

namespace semvfi {

inline constexpr int64_t kChannelsPerGroup = 32;

struct DSFConfig {
  Site site = Site::kS3;
  int64_t channels = 256;
  int64_t groups = 8;
  /// Offsets are clipped to +-max_offset px (kernel extent 3 times 4).
  double max_offset = 12.0;

  int64_t channels_per_group() const { return channels / groups; }
  /// Throws ContractViolation unless channels == groups * 32.
  void validate() const;
  /// Standard configuration for a site of the given width (groups = C / 32).
  static DSFConfig for_site(Site site, int64_t channels);
};

/// Alignment state for one direction at one site.
struct DSFState {
  torch::Tensor offsets;      // (B, G*9*2, h, w) px
  torch::Tensor modulations;  // (B, G*9, h, w) in (0,1)
  torch::Tensor gate;         // scalar
};

struct QKV {
  torch::Tensor q;
  torch::Tensor k;
  torch::Tensor v;
};

struct DsfOutput {
  torch::Tensor injection;  // fills the site's injection port
  DSFState past;            // t <- 0 direction
  DSFState future;          // t <- 1 direction
};

/// Gated grouped modulated deformable convolution of V:
/// gate * sum_k W_k V(p + p_k + dp_k) * dm_k, per group.
torch::Tensor deform_align(const torch::Tensor& value, const DSFState& state,
                           const torch::Tensor& weight, const DSFConfig& config);

/// Per-pixel mean over groups and taps of the offset vector length,
/// (B, G*18, h, w) -> (B, 1, h, w).
torch::Tensor offset_magnitude(const torch::Tensor& offsets, int64_t groups);

/// One deformable semantic fusion site.
///
/// Parameters: ctx_proj (1x1, both frames' context -> C), phi_q, phi_k,
/// phi_v (bias-free 1x1, C -> C; phi_k and phi_v are shared by both
/// directions), offset (3x3 over [Q, K], 2C -> G*27, zero-initialized),
/// weight (C, C/G, 3, 3) and gate (one entry per direction, zero-initialized).
class DsfSiteImpl : public torch::nn::Module {
 public:
  DsfSiteImpl(const DSFConfig& config, int64_t context_channels);

  /// Projects cat(ctx0, ctx1) to the site width.
  torch::Tensor context(const torch::Tensor& ctx0, const torch::Tensor& ctx1);
  QKV project_qkv(const torch::Tensor& f_ctx, const torch::Tensor& d_hat);
  /// Offsets (clipped) and sigmoid modulations from conv([Q, K]). The gate
  /// is left undefined; `direction` selects it in align().
  DSFState predict_offsets(const torch::Tensor& q, const torch::Tensor& k);
  torch::Tensor align(const torch::Tensor& value, DSFState& state, int direction);

  /// Bidirectional fusion: align(V_0) + align(V_1).
  DsfOutput forward(const torch::Tensor& ctx0, const torch::Tensor& ctx1,
                    const torch::Tensor& d_hat0, const torch::Tensor& d_hat1);

  const DSFConfig& config() const { return config_; }

  torch::nn::Conv2d ctx_proj{nullptr};
  torch::nn::Conv2d phi_q{nullptr};
  torch::nn::Conv2d phi_k{nullptr};
  torch::nn::Conv2d phi_v{nullptr};
  torch::nn::Conv2d offset{nullptr};
  torch::Tensor weight;
  torch::Tensor gate;

 private:
  DSFConfig config_;
};
TORCH_MODULE(DsfSite);

}  // namespace semvfi
