// Copyright 2026 The semvfi Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <torch/torch.h>

namespace semvfi {

/// Two-depth feature maps for one batch of frames. Both depths are
/// (B, C, ceil(H/patch_stride), ceil(W/patch_stride)).
struct SemanticFeatures {
  torch::Tensor shallow;  // routed to the S2 injection site
  torch::Tensor deep;     // routed to the S3 injection site
  int64_t patch_stride = 16;
};

enum class ExtractorKind { kPretrainedVit, kSurrogate };

struct ExtractorConfig {
  ExtractorKind kind = ExtractorKind::kSurrogate;
  std::string weights_path;                 // pretrained-vit only
  std::array<int64_t, 2> layer_indices{8, 11};
  std::array<double, 3> mean{0.485, 0.456, 0.406};
  std::array<double, 3> std{0.229, 0.224, 0.225};
  int64_t channels = 384;
  int64_t patch_stride = 16;
  uint64_t seed = 0;  // surrogate projection seed

  void validate(int64_t depth) const;
};

std::string to_string(ExtractorKind kind);
ExtractorKind extractor_kind_from_string(const std::string& name);

/// Environment variable naming a directory that relative weight paths are
/// resolved against.
inline constexpr const char* kWeightsDirEnv = "SEMVFI_WEIGHTS_DIR";
std::filesystem::path resolve_weights_path(const std::string& path);

/// Frozen semantic backbone. Parameters never require grad; gradients can
/// still flow into the input image.
class SemanticExtractor : public torch::nn::Module {
 public:
  explicit SemanticExtractor(ExtractorConfig config);
  ~SemanticExtractor() override = default;

  /// `image` is (B,3,H,W) in [0,1]; normalization happens internally.
  virtual SemanticFeatures extract(const torch::Tensor& image) = 0;

  const ExtractorConfig& config() const { return config_; }
  int64_t patch_stride() const { return config_.patch_stride; }
  int64_t channels() const { return config_.channels; }

 protected:
  /// Normalize with the configured mean/std and resize so both sides are
  /// multiples of the patch stride.
  torch::Tensor prepare(const torch::Tensor& image) const;
  void freeze();

 private:
  ExtractorConfig config_;
};

/// Deterministic stand-in: a seeded orthonormal channel projection of a
/// Gaussian-pyramid encoding of the image. Shallow features carry fine
/// structure, deep features coarse structure.
class SurrogateExtractor : public SemanticExtractor {
 public:
  explicit SurrogateExtractor(ExtractorConfig config);
  SemanticFeatures extract(const torch::Tensor& image) override;

  /// Upper bound L with ||f(a) - f(b)|| <= L ||a - b|| over the stacked
  /// (shallow, deep) output, valid for inputs whose sides are multiples of
  /// the patch stride.
  double lipschitz_bound() const;

  static constexpr int64_t kShallowEncoding = 57;
  static constexpr int64_t kDeepEncoding = 21;

 private:
  torch::Tensor shallow_projection_;  // (C, kShallowEncoding)
  torch::Tensor deep_projection_;     // (C, kDeepEncoding)
};

struct VitConfig {
  int64_t embed_dim = 384;
  int64_t depth = 12;
  int64_t heads = 6;
  int64_t mlp_ratio = 4;
  int64_t patch = 16;
  int64_t storage_tokens = 4;
  double rope_base = 100.0;
  double layer_norm_eps = 1e-5;
};

/// ViT-S/16 with register tokens, LayerScale and axial RoPE. Weight names
/// follow the upstream checkpoint layout (patch_embed.proj.*, cls_token,
/// storage_tokens, blocks.N.{norm1,attn.qkv,attn.proj,ls1.gamma,norm2,
/// mlp.fc1,mlp.fc2,ls2.gamma}.*, norm.*).
class VitExtractor : public SemanticExtractor {
 public:
  VitExtractor(ExtractorConfig config, VitConfig vit = {});

  /// Load weights from a pickled tensor dictionary. Throws LoadError on a
  /// missing file, a missing tensor, or a shape mismatch. Keys with no
  /// counterpart here are ignored only if they are known to be unused at
  /// inference (mask_token, rope periods, bias masks).
  void load(const std::filesystem::path& path);

  SemanticFeatures extract(const torch::Tensor& image) override;
  const VitConfig& vit_config() const { return vit_; }

 private:
  VitConfig vit_;
  torch::nn::Conv2d patch_proj_{nullptr};
  torch::Tensor cls_token_;
  torch::Tensor storage_tokens_;
  torch::nn::ModuleList blocks_{nullptr};
  torch::nn::LayerNorm norm_{nullptr};
};

/// Builds the configured extractor; pretrained-vit loads its weights.
std::shared_ptr<SemanticExtractor> make_extractor(const ExtractorConfig& config);

/// Shared-basis PCA maps for two frames' features.
struct PcaMaps {
  torch::Tensor map_a;  // (k, h, w) in [0,1]
  torch::Tensor map_b;
  std::vector<double> explained_variance_ratio;  // per retained component
};

/// Fits one PCA basis on the union of both frames' tokens, projects each
/// frame onto the top-k components and min-max normalizes the projections
/// jointly. Features are (1,C,h,w) or (C,h,w).
PcaMaps pca_visualize(const torch::Tensor& features_a, const torch::Tensor& features_b,
                      int64_t k = 3);

/// Mean squared finite difference relative to the variance of a (k,h,w)
/// map; larger means more high-frequency content.
double high_frequency_energy(const torch::Tensor& map);

}  // namespace semvfi
