// Copyright 2026 The semvfi Authors
// SPDX-License-Identifier: Apache-2.0

// Slow reference implementations shared by the unit and acceptance tests.
// They are written against the documented contracts, not the production
// kernels, and operate on CPU double tensors.

#pragma once

#include <cstdint>
#include <functional>

#include <torch/torch.h>

namespace semvfi::testing {

/// Clamp-to-edge bilinear sample written as a tent-weighted sum over every
/// pixel of the plane (H,W).
double tent_sample(const torch::Tensor& plane, double x, double y);

/// Per-pixel reference for backward_warp.
torch::Tensor warp_oracle(const torch::Tensor& x, const torch::Tensor& flow);

/// Per-pixel, per-tap reference for a gated grouped modulated deformable
/// 3x3 convolution. Layouts follow deform_conv.hpp.
torch::Tensor deform_oracle(const torch::Tensor& value, const torch::Tensor& offsets,
                            const torch::Tensor& modulation, const torch::Tensor& weight,
                            int64_t groups, double gate = 1.0);

/// Loop-based SSIM on luminance with an 11x11 Gaussian window (sigma 1.5).
double ssim_oracle(const torch::Tensor& a, const torch::Tensor& b);

/// Central finite differences of a scalar function at `x` (double).
torch::Tensor numeric_grad(const std::function<torch::Tensor(const torch::Tensor&)>& f,
                           const torch::Tensor& x, double eps = 1e-6);

/// Autograd gradient of f at x.
torch::Tensor analytic_grad(const std::function<torch::Tensor(const torch::Tensor&)>& f,
                            const torch::Tensor& x);

/// ||a - b|| / max(||a||, ||b||, 1e-12).
double relative_error(const torch::Tensor& a, const torch::Tensor& b);

/// Values in [lo, hi) whose fractional part stays in [0.1, 0.9], away from
/// the bilinear kinks at integer positions.
torch::Tensor fractional_uniform(at::IntArrayRef sizes, double lo, double hi,
                                 torch::Generator& gen);

/// Gaussian draws with a fixed generator.
torch::Tensor randn(at::IntArrayRef sizes, torch::Generator& gen);
torch::Tensor rand(at::IntArrayRef sizes, torch::Generator& gen);

torch::Generator make_generator(uint64_t seed);

}  // namespace semvfi::testing
