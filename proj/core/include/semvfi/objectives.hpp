// Copyright 2026 The semvfi Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include <torch/torch.h>

#include "semvfi/semantic_extractor.hpp"

namespace semvfi {

struct LossWeights {
  double rec = 0.1;
  double dis = 0.01;
  double tea = 0.1;
  double sem = 0.5;
  double reg = 0.0001;

  void validate() const;
};

/// Scalar loss components and their weighted total (double precision).
struct LossBreakdown {
  double rec = 0;
  double dis = 0;
  double tea = 0;
  double sem = 0;
  double reg = 0;
  double total = 0;
  LossWeights weights;
};

/// Differentiable components of one forward pass; undefined terms count as 0.
struct LossTerms {
  torch::Tensor rec;
  torch::Tensor dis;
  torch::Tensor tea;
  torch::Tensor sem;
  torch::Tensor reg;
};

/// Laplacian pyramid with `levels` entries: levels-1 band-pass images
/// followed by the low-pass residual. Gaussian kernel [1,4,6,4,1]/16 with
/// reflect padding; upsampling by zero insertion and 4x the kernel.
std::vector<torch::Tensor> laplacian_pyramid(const torch::Tensor& image, int64_t levels = 5);

/// sum_l 2^l * mean|Lap_l(pred) - Lap_l(gt)|.
torch::Tensor laplacian_loss(const torch::Tensor& pred, const torch::Tensor& gt,
                             int64_t levels = 5);

/// 1 where the student's merged frame is worse than the teacher's by more
/// than 0.01 (channel-mean absolute error), else 0. Detached, (B,1,H,W).
torch::Tensor privileged_mask(const torch::Tensor& student_frame,
                              const torch::Tensor& teacher_frame, const torch::Tensor& gt);

/// Mean over levels of mean(|teacher_flow - student_flow_l| * mask_l). The
/// teacher flow is detached. An empty `masks` means unmasked. Throws
/// ContractViolation if `teacher_flow` is undefined (no teacher at inference).
torch::Tensor distillation_loss(const std::vector<torch::Tensor>& student_flows,
                                const torch::Tensor& teacher_flow,
                                const std::vector<torch::Tensor>& masks = {});

/// 0.5 * (mean|D_s(pred) - D_s(gt)| + mean|D_d(pred) - D_d(gt)|). Gradients
/// reach `pred` through the frozen extractor; the gt branch is detached.
torch::Tensor semantic_consistency(const torch::Tensor& pred, const torch::Tensor& gt,
                                   SemanticExtractor& extractor);

/// mean|dp_s2| + mean|dp_s3|; undefined inputs contribute 0.
torch::Tensor offset_reg(const torch::Tensor& dp_s2, const torch::Tensor& dp_s3);

/// total = rec*w.rec + dis*w.dis + tea*w.tea + sem*w.sem + reg*w.reg,
/// accumulated left to right in double. Throws on a negative component.
LossBreakdown total_loss(double rec, double dis, double tea, double sem, double reg,
                         const LossWeights& weights = {});

/// Weighted sum of the defined terms as a tensor for backpropagation, plus
/// the matching breakdown.
std::pair<torch::Tensor, LossBreakdown> combine(const LossTerms& terms,
                                                const LossWeights& weights = {});

}  // namespace semvfi
