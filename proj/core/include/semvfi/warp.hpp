// Copyright 2026 The semvfi Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

#include <torch/torch.h>

namespace semvfi {

/// Backward warp: out(p) = bilinear sample of `x` at p + flow(p).
///
/// `x` is (B,C,H,W), `flow` is (B,2,H,W) in pixels at x's resolution with
/// channel 0 = dx and channel 1 = dy. Sample positions are clamped to the
/// image rectangle (clamp-to-edge), so the gradient with respect to a flow
/// component vanishes once the sample leaves the image along that axis.
/// Differentiable with respect to both inputs. Throws NonFiniteError if the
/// flow contains NaN or Inf.
torch::Tensor backward_warp(const torch::Tensor& x, const torch::Tensor& flow);

/// Bilinear resize (half-pixel centers) to (height, width).
torch::Tensor resize_bilinear(const torch::Tensor& x, int64_t height, int64_t width);

/// Resize a (B,2,h,w) flow to (height, width) and rescale dx by width/w and
/// dy by height/h so the vectors stay in pixels of the new grid.
torch::Tensor resize_flow(const torch::Tensor& flow, int64_t height, int64_t width);

}  // namespace semvfi
