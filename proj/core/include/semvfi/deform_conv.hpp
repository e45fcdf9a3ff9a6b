// Copyright 2026 The semvfi Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

#include <torch/torch.h>

namespace semvfi {

inline constexpr int64_t kDeformTaps = 9;

/// Modulated deformable sampling for a 3x3 kernel (stride 1, padding 1).
///
/// Layouts, for G offset groups over C = G * c channels:
///   value      (B, C, h, w)
///   offsets    (B, G*9*2, h, w)  channel (g*9 + k)*2 is dx, +1 is dy
///   modulation (B, G*9, h, w)    channel g*9 + k
/// Tap k = ky*3 + kx sits at (kx-1, ky-1) relative to the output pixel.
///
/// Returns columns (B, C, 9, h, w) with
///   col[b,c,k,p] = modulation[b,g(c),k,p] * value_c(p + p_k + offset[b,g(c),k,p])
/// sampled bilinearly with clamp-to-edge. Differentiable with respect to all
/// three inputs. Throws NonFiniteError on NaN/Inf offsets.
torch::Tensor deform_sample(const torch::Tensor& value, const torch::Tensor& offsets,
                            const torch::Tensor& modulation, int64_t groups);

/// Grouped modulated deformable convolution without bias. `weight` is
/// (C_out, C/G, 3, 3); output channel block g only reads input block g, so
/// the layer holds C_out * C / G * 9 weights.
torch::Tensor modulated_deform_conv(const torch::Tensor& value, const torch::Tensor& offsets,
                                    const torch::Tensor& modulation, const torch::Tensor& weight,
                                    int64_t groups);

}  // namespace semvfi
