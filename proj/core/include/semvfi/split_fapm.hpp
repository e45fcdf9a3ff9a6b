// Copyright 2026 The semvfi Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>

#include <torch/torch.h>

namespace semvfi {

/// Semantic injection sites: S2 at stride 4, S3 at stride 8.
enum class Site { kS2, kS3 };

std::string to_string(Site site);
Site site_from_string(const std::string& name);

/// FiLM affine parameters, each (B,C,h,w).
struct Film {
  torch::Tensor gamma;
  torch::Tensor beta;
};

/// Pre-warp compressor: out = gamma * feature(x) + beta with (gamma, beta)
/// predicted from x by a second 1x1 conv.
class CompressorImpl : public torch::nn::Module {
 public:
  CompressorImpl(int64_t in_channels, int64_t out_channels);

  torch::Tensor forward(const torch::Tensor& x);

  /// The two branches, exposed separately.
  torch::Tensor features(const torch::Tensor& x);
  Film modulation(const torch::Tensor& x);
  static torch::Tensor modulate(const torch::Tensor& features, const Film& film);

  int64_t in_channels() const { return in_; }
  int64_t out_channels() const { return out_; }

  torch::nn::Conv2d feature{nullptr};
  torch::nn::Conv2d film{nullptr};  // first half gamma, second half beta

 private:
  int64_t in_;
  int64_t out_;
};
TORCH_MODULE(Compressor);

/// Squeeze-and-excitation: x * sigmoid(fc2(gelu(fc1(avgpool(x))))).
class SEBlockImpl : public torch::nn::Module {
 public:
  SEBlockImpl(int64_t channels, int64_t ratio = 8);

  torch::Tensor forward(const torch::Tensor& x);
  /// Per-channel scale (B,C,1,1).
  torch::Tensor excitation(const torch::Tensor& x);

  torch::nn::Conv2d fc1{nullptr};
  torch::nn::Conv2d fc2{nullptr};
};
TORCH_MODULE(SEBlock);

/// Post-warp refiner: shortcut(x) + proj(se(gelu(pw2(dw2(gelu(pw1(dw1(x)))))))).
/// `proj` is zero-initialized, so a fresh refiner equals its shortcut.
class RefinerImpl : public torch::nn::Module {
 public:
  RefinerImpl(int64_t in_channels, int64_t out_channels, int64_t se_ratio = 8);

  torch::Tensor forward(const torch::Tensor& x);
  torch::Tensor inner(const torch::Tensor& x);
  torch::Tensor shortcut(const torch::Tensor& x);

  int64_t out_channels() const { return out_; }
  bool identity_shortcut() const { return shortcut_.is_empty(); }

  torch::nn::Conv2d dw1{nullptr};
  torch::nn::Conv2d pw1{nullptr};
  torch::nn::Conv2d dw2{nullptr};
  torch::nn::Conv2d pw2{nullptr};
  SEBlock se{nullptr};
  torch::nn::Conv2d proj{nullptr};

 private:
  int64_t in_;
  int64_t out_;
  torch::nn::Conv2d shortcut_{nullptr};
};
TORCH_MODULE(Refiner);

struct FapmConfig {
  int64_t in_channels = 384;
  int64_t compressed_channels = 256;
  int64_t s2_channels = 128;
  int64_t s3_channels = 256;
  int64_t se_ratio = 8;
};

/// Compressors per depth (compress.shallow, compress.deep) shared across
/// frames, and one refiner per site (refine.s2, refine.s3).
class SplitFapmImpl : public torch::nn::Module {
 public:
  explicit SplitFapmImpl(const FapmConfig& config = {});

  torch::Tensor compress_shallow(const torch::Tensor& x);
  torch::Tensor compress_deep(const torch::Tensor& x);
  torch::Tensor refine(const torch::Tensor& warped, Site site);

  Compressor shallow_compressor() const { return shallow_; }
  Compressor deep_compressor() const { return deep_; }
  Refiner refiner(Site site) const { return site == Site::kS2 ? s2_ : s3_; }
  const FapmConfig& config() const { return config_; }

 private:
  FapmConfig config_;
  Compressor shallow_{nullptr};
  Compressor deep_{nullptr};
  Refiner s2_{nullptr};
  Refiner s3_{nullptr};
};
TORCH_MODULE(SplitFapm);

}  // namespace semvfi
