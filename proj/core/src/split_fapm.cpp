// Copyright 2026 The semvfi Authors
// SPDX-License-Identifier: Apache-2.0

#include "semvfi/split_fapm.hpp"

#include "init.hpp"
#include "semvfi/errors.hpp"

namespace semvfi {

using torch::Tensor;
namespace nn = torch::nn;

namespace {

nn::Conv2d conv1x1(int64_t in, int64_t out, bool bias = true) {
  return nn::Conv2d(nn::Conv2dOptions(in, out, 1).bias(bias));
}

nn::Conv2d depthwise3x3(int64_t channels) {
  return nn::Conv2d(nn::Conv2dOptions(channels, channels, 3).padding(1).groups(channels));
}

void expect_channels(const Tensor& x, int64_t channels, const char* who) {
  expects(x.dim() == 4 && x.size(1) == channels, who, ": expected (B,", channels,
          ",h,w), got ", x.sizes());
}

}  // namespace

std::string to_string(Site site) { return site == Site::kS2 ? "s2" : "s3"; }

Site site_from_string(const std::string& name) {
  if (name == "s2" || name == "S2") return Site::kS2;
  if (name == "s3" || name == "S3") return Site::kS3;
  throw ContractViolation("unknown injection site '" + name + "'");
}

CompressorImpl::CompressorImpl(int64_t in_channels, int64_t out_channels)
    : feature(register_module("feature", conv1x1(in_channels, out_channels))),
      film(register_module("film", conv1x1(in_channels, 2 * out_channels))),
      in_(in_channels),
      out_(out_channels) {
  detail::he_init(feature);
  detail::he_init(film);
  // Start from gamma = 1, beta = 0 in expectation.
  torch::NoGradGuard no_grad;
  film->bias.slice(0, 0, out_channels).fill_(1.0);
}

Tensor CompressorImpl::features(const Tensor& x) {
  expect_channels(x, in_, "compress");
  return feature->forward(x);
}

Film CompressorImpl::modulation(const Tensor& x) {
  expect_channels(x, in_, "compress");
  const auto parts = film->forward(x).chunk(2, 1);
  return {parts[0], parts[1]};
}

Tensor CompressorImpl::modulate(const Tensor& features, const Film& film) {
  return film.gamma * features + film.beta;
}

Tensor CompressorImpl::forward(const Tensor& x) { return modulate(features(x), modulation(x)); }

SEBlockImpl::SEBlockImpl(int64_t channels, int64_t ratio) {
  expects(ratio > 0 && channels % ratio == 0, "SEBlock: channels ", channels,
          " not divisible by reduction ratio ", ratio);
  fc1 = register_module("fc1", conv1x1(channels, channels / ratio));
  fc2 = register_module("fc2", conv1x1(channels / ratio, channels));
  detail::he_init(fc1);
  detail::he_init(fc2);
}

Tensor SEBlockImpl::excitation(const Tensor& x) {
  const Tensor pooled = x.mean({2, 3}, true);
  return torch::sigmoid(fc2->forward(torch::gelu(fc1->forward(pooled))));
}

Tensor SEBlockImpl::forward(const Tensor& x) { return x * excitation(x); }

RefinerImpl::RefinerImpl(int64_t in_channels, int64_t out_channels, int64_t se_ratio)
    : dw1(register_module("dw1", depthwise3x3(in_channels))),
      pw1(register_module("pw1", conv1x1(in_channels, out_channels))),
      dw2(register_module("dw2", depthwise3x3(out_channels))),
      pw2(register_module("pw2", conv1x1(out_channels, out_channels))),
      se(register_module("se", SEBlock(out_channels, se_ratio))),
      proj(register_module("proj", conv1x1(out_channels, out_channels))),
      in_(in_channels),
      out_(out_channels) {
  if (in_channels != out_channels) {
    shortcut_ = register_module("shortcut", conv1x1(in_channels, out_channels));
    detail::he_init(shortcut_);
  }
  detail::he_init(dw1);
  detail::he_init(pw1);
  detail::he_init(dw2);
  detail::he_init(pw2);
  detail::zero_init(proj);
}

Tensor RefinerImpl::shortcut(const Tensor& x) {
  return shortcut_.is_empty() ? x : shortcut_->forward(x);
}

Tensor RefinerImpl::inner(const Tensor& x) {
  Tensor y = torch::gelu(pw1->forward(dw1->forward(x)));
  y = torch::gelu(pw2->forward(dw2->forward(y)));
  return proj->forward(se->forward(y));
}

Tensor RefinerImpl::forward(const Tensor& x) {
  expect_channels(x, in_, "refine");
  return shortcut(x) + inner(x);
}

SplitFapmImpl::SplitFapmImpl(const FapmConfig& config) : config_(config) {
  auto compress = std::make_shared<nn::Module>();
  shallow_ = compress->register_module(
      "shallow", Compressor(config.in_channels, config.compressed_channels));
  deep_ = compress->register_module("deep",
                                    Compressor(config.in_channels, config.compressed_channels));
  register_module("compress", compress);

  auto refine = std::make_shared<nn::Module>();
  s2_ = refine->register_module(
      "s2", Refiner(config.compressed_channels, config.s2_channels, config.se_ratio));
  s3_ = refine->register_module(
      "s3", Refiner(config.compressed_channels, config.s3_channels, config.se_ratio));
  register_module("refine", refine);
}

Tensor SplitFapmImpl::compress_shallow(const Tensor& x) { return shallow_->forward(x); }
Tensor SplitFapmImpl::compress_deep(const Tensor& x) { return deep_->forward(x); }

Tensor SplitFapmImpl::refine(const Tensor& warped, Site site) {
  return refiner(site)->forward(warped);
}

}  // namespace semvfi
