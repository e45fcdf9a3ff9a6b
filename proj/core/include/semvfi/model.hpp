// Copyright 2026 The semvfi Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "semvfi/dsf.hpp"
#include "semvfi/flow_backbone.hpp"
#include "semvfi/semantic_extractor.hpp"
#include "semvfi/split_fapm.hpp"

namespace semvfi {

struct ModelConfig {
  IFNetConfig ifnet;
  int64_t context_width = 16;
  FusionConfig fusion;
  FapmConfig fapm;
  ExtractorConfig extractor;

  /// Full-width layout (RIFE widths, 384 -> 256 compressor, ViT-S extractor).
  static ModelConfig paper();
  /// Reduced widths for CPU training and tests with the surrogate extractor.
  static ModelConfig desk();
  void validate() const;
};

enum class InferenceMode { kBaseline, kSemantic };

/// Semantic path intermediates for one site.
struct SiteTrace {
  torch::Tensor warped0;  // compressed, resized and warped semantics, frame 0
  torch::Tensor warped1;
  torch::Tensor d_hat0;   // refined
  torch::Tensor d_hat1;
  DsfOutput dsf;
};

struct ModelOutput {
  FlowBundle bundle;
  FusionOutput fusion;
  std::optional<SiteTrace> s2;  // set in semantic mode
  std::optional<SiteTrace> s3;
  std::optional<TeacherOutput> teacher;  // set when requested in training mode

  const torch::Tensor& frame() const { return fusion.final; }
};

/// Top-level parameter groups; also the checkpoint key prefixes.
inline const std::vector<std::string>& parameter_groups() {
  static const std::vector<std::string> groups{"ifnet",     "teacher", "contextnet",
                                               "fusionnet", "fapm",    "dsf"};
  return groups;
}

/// Frozen backbone plus the semantic adapters.
///
/// Registered children: ifnet, teacher, contextnet, fusionnet, fapm, dsf
/// (dsf.s2, dsf.s3). The semantic extractor is held separately and is never
/// part of the parameter set or the checkpoint.
class SemanticVfiModelImpl : public torch::nn::Module {
 public:
  explicit SemanticVfiModelImpl(const ModelConfig& config,
                                std::shared_ptr<SemanticExtractor> extractor = nullptr);

  /// Interpolates at time t. Inputs of any size are reflect-padded to a
  /// multiple of 32 and outputs are cropped back. The teacher runs only
  /// when `with_teacher` is set, the module is in training mode and `igt`
  /// is given.
  ModelOutput forward(const torch::Tensor& i0, const torch::Tensor& i1, double t = 0.5,
                      InferenceMode mode = InferenceMode::kSemantic,
                      const torch::Tensor& igt = {}, bool with_teacher = false);

  /// The frozen-backbone baseline (empty injection ports).
  torch::Tensor baseline(const torch::Tensor& i0, const torch::Tensor& i1, double t = 0.5);

  IFNet ifnet{nullptr};
  Teacher teacher{nullptr};
  ContextNet contextnet{nullptr};
  FusionNet fusionnet{nullptr};
  SplitFapm fapm{nullptr};
  DsfSite dsf_s2{nullptr};
  DsfSite dsf_s3{nullptr};

  SemanticExtractor& extractor() const { return *extractor_; }
  std::shared_ptr<SemanticExtractor> extractor_ptr() const { return extractor_; }
  const ModelConfig& config() const { return config_; }

  /// Named parameters of one group (fully qualified names).
  std::vector<std::pair<std::string, torch::Tensor>> group_parameters(
      const std::string& group) const;
  /// Sets requires_grad for every parameter in `group`. Throws
  /// ContractViolation for an unknown group name.
  void set_trainable(const std::string& group, bool trainable);
  bool group_trainable(const std::string& group) const;

 private:
  SiteTrace semantic_site(Site site, const torch::Tensor& features0,
                          const torch::Tensor& features1, const FlowBundle& bundle,
                          const ContextPyramid& ctx0, const ContextPyramid& ctx1);

  ModelConfig config_;
  std::shared_ptr<SemanticExtractor> extractor_;
};
TORCH_MODULE(SemanticVfiModel);

/// Zero all DSF gates (baseline-equivalent adapters).
void reset_gates(SemanticVfiModelImpl& model);

/// SHA-256 (hex) over the names, shapes and raw bytes of the given tensors.
std::string tensor_hash(const std::vector<std::pair<std::string, torch::Tensor>>& tensors);
/// Hash of one parameter group, or of the extractor's parameters and buffers
/// for group "extractor".
std::string group_hash(const SemanticVfiModelImpl& model, const std::string& group);

int64_t count_parameters(const std::vector<std::pair<std::string, torch::Tensor>>& tensors);

struct ParameterRow {
  std::string module;
  std::string status;  // "Frozen", "Trained", "Fine-tuned", "Training only"
  int64_t params = 0;
  bool inference = true;
  bool trainable = false;  // in the final stage
};

struct ParameterReport {
  std::vector<ParameterRow> rows;
  int64_t total_frozen = 0;
  int64_t total_trainable = 0;
  int64_t total_inference = 0;  // excludes the teacher

  double trainable_fraction() const {
    return total_inference > 0 ? static_cast<double>(total_trainable) / total_inference : 0.0;
  }
  /// Fixed-width text table.
  std::string format() const;
};

/// Frozen/trainable breakdown. Extractor parameters are counted from an
/// unloaded instance of the configured architecture (the surrogate has none).
ParameterReport parameter_report(const SemanticVfiModelImpl& model);

}  // namespace semvfi
