// Copyright 2026 The semvfi Authors
// SPDX-License-Identifier: Apache-2.0

#include "semvfi/objectives.hpp"

#include <cmath>

#include "semvfi/errors.hpp"

namespace semvfi {

using torch::Tensor;
namespace F = torch::nn::functional;

namespace {

Tensor gauss_kernel(int64_t channels, double scale, const torch::TensorOptions& options) {
  const Tensor k1 = torch::tensor({1.0, 4.0, 6.0, 4.0, 1.0}, options) / 16.0;
  const Tensor k2 = torch::outer(k1, k1) * scale;
  return k2.expand({channels, 1, 5, 5}).contiguous();
}

Tensor conv_gauss(const Tensor& x, double scale) {
  const Tensor padded = F::pad(x, F::PadFuncOptions({2, 2, 2, 2}).mode(torch::kReflect));
  return F::conv2d(padded, gauss_kernel(x.size(1), scale, x.options()),
                   F::Conv2dFuncOptions().groups(x.size(1)));
}

Tensor downsample(const Tensor& x) {
  return conv_gauss(x, 1.0).slice(2, 0, std::nullopt, 2).slice(3, 0, std::nullopt, 2);
}

Tensor upsample(const Tensor& x, int64_t height, int64_t width) {
  Tensor up = torch::zeros({x.size(0), x.size(1), height, width}, x.options());
  up.slice(2, 0, std::nullopt, 2).slice(3, 0, std::nullopt, 2).copy_(x);
  return conv_gauss(up, 4.0);
}

Tensor zero_like_scalar(const Tensor& like) { return torch::zeros({}, like.options()); }

}  // namespace

void LossWeights::validate() const {
  expects(rec >= 0 && dis >= 0 && tea >= 0 && sem >= 0 && reg >= 0,
          "LossWeights: weights must be non-negative");
}

std::vector<Tensor> laplacian_pyramid(const Tensor& image, int64_t levels) {
  expects(image.dim() == 4, "laplacian_pyramid: expected (B,C,H,W), got ", image.sizes());
  expects(levels >= 1, "laplacian_pyramid: levels must be >= 1");
  std::vector<Tensor> out;
  Tensor current = image;
  for (int64_t l = 0; l + 1 < levels; ++l) {
    expects(current.size(2) > 2 && current.size(3) > 2, "laplacian_pyramid: image too small for ",
            levels, " levels");
    const Tensor down = downsample(current);
    out.push_back(current - upsample(down, current.size(2), current.size(3)));
    current = down;
  }
  out.push_back(current);
  return out;
}

Tensor laplacian_loss(const Tensor& pred, const Tensor& gt, int64_t levels) {
  expects(pred.sizes() == gt.sizes(), "laplacian_loss: shapes differ: ", pred.sizes(), " vs ",
          gt.sizes());
  const auto a = laplacian_pyramid(pred, levels);
  const auto b = laplacian_pyramid(gt, levels);
  Tensor total = zero_like_scalar(pred);
  for (size_t l = 0; l < a.size(); ++l) {
    total = total + std::ldexp(1.0, static_cast<int>(l)) * (a[l] - b[l]).abs().mean();
  }
  return total;
}

Tensor privileged_mask(const Tensor& student_frame, const Tensor& teacher_frame,
                       const Tensor& gt) {
  torch::NoGradGuard no_grad;
  const Tensor student_err = (student_frame - gt).abs().mean(1, true);
  const Tensor teacher_err = (teacher_frame - gt).abs().mean(1, true);
  return (student_err > teacher_err + 0.01).to(student_frame.dtype());
}

Tensor distillation_loss(const std::vector<Tensor>& student_flows, const Tensor& teacher_flow,
                         const std::vector<Tensor>& masks) {
  expects(teacher_flow.defined(), "distillation_loss: no teacher flow (inference mode)");
  expects(!student_flows.empty(), "distillation_loss: no student flows");
  expects(masks.empty() || masks.size() == student_flows.size(),
          "distillation_loss: need one mask per level");
  const Tensor target = teacher_flow.detach();
  Tensor total = zero_like_scalar(target);
  for (size_t l = 0; l < student_flows.size(); ++l) {
    expects(student_flows[l].sizes() == target.sizes(), "distillation_loss: level ", l,
            " flow ", student_flows[l].sizes(), " does not match teacher ", target.sizes());
    Tensor diff = (target - student_flows[l]).abs();
    if (!masks.empty()) diff = diff * masks[l].detach();
    total = total + diff.mean();
  }
  return total / static_cast<double>(student_flows.size());
}

Tensor semantic_consistency(const Tensor& pred, const Tensor& gt, SemanticExtractor& extractor) {
  expects(pred.sizes() == gt.sizes(), "semantic_consistency: shapes differ: ", pred.sizes(),
          " vs ", gt.sizes());
  const SemanticFeatures fp = extractor.extract(pred);
  SemanticFeatures fg;
  {
    torch::NoGradGuard no_grad;
    fg = extractor.extract(gt);
  }
  return 0.5 * ((fp.shallow - fg.shallow).abs().mean() + (fp.deep - fg.deep).abs().mean());
}

Tensor offset_reg(const Tensor& dp_s2, const Tensor& dp_s3) {
  const Tensor& like = dp_s2.defined() ? dp_s2 : dp_s3;
  if (!like.defined()) return torch::zeros({});
  Tensor total = zero_like_scalar(like);
  if (dp_s2.defined()) total = total + dp_s2.abs().mean();
  if (dp_s3.defined()) total = total + dp_s3.abs().mean();
  return total;
}

LossBreakdown total_loss(double rec, double dis, double tea, double sem, double reg,
                         const LossWeights& weights) {
  weights.validate();
  expects(rec >= 0 && dis >= 0 && tea >= 0 && sem >= 0 && reg >= 0,
          "total_loss: components must be non-negative (rec=", rec, ", dis=", dis, ", tea=", tea,
          ", sem=", sem, ", reg=", reg, ")");
  LossBreakdown b{rec, dis, tea, sem, reg, 0.0, weights};
  double total = rec * weights.rec;
  total += dis * weights.dis;
  total += tea * weights.tea;
  total += sem * weights.sem;
  total += reg * weights.reg;
  b.total = total;
  return b;
}

std::pair<Tensor, LossBreakdown> combine(const LossTerms& terms, const LossWeights& weights) {
  auto value = [](const Tensor& t) { return t.defined() ? t.detach().item<double>() : 0.0; };
  const LossBreakdown b = total_loss(value(terms.rec), value(terms.dis), value(terms.tea),
                                     value(terms.sem), value(terms.reg), weights);
  Tensor total;
  auto add = [&](const Tensor& t, double w) {
    if (!t.defined()) return;
    total = total.defined() ? total + w * t : w * t;
  };
  add(terms.rec, weights.rec);
  add(terms.dis, weights.dis);
  add(terms.tea, weights.tea);
  add(terms.sem, weights.sem);
  add(terms.reg, weights.reg);
  if (!total.defined()) total = torch::zeros({});
  return {total, b};
}

}  // namespace semvfi
