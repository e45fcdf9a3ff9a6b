// Copyright 2026 The semvfi Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "semvfi/model.hpp"
#include "semvfi/objectives.hpp"

namespace semvfi {

/// Optimizer, schedule and stage lengths. Index 0 of `epochs`/`steps` is
/// the backbone bootstrap stage, 1 and 2 are the adapter stages. A positive
/// `steps[s]` overrides `epochs[s]`.
struct TrainConfig {
  int64_t batch_size = 8;
  double lr = 2e-4;
  double lr_min = 2e-6;
  double weight_decay = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double grad_clip_norm = 1.0;
  int64_t crop = 128;
  std::array<int64_t, 3> epochs{0, 5, 25};
  std::array<int64_t, 3> steps{0, 0, 0};
  /// Bootstrap learning rate (stage 0 trains the backbone from scratch).
  double bootstrap_lr = 1e-3;

  void validate() const;
};

struct DataConfig {
  std::string kind = "synthetic";  // "synthetic" or "vimeo"
  std::string root;
  std::string list;
  bool skip_missing = false;
  int64_t synthetic_count = 512;
  int64_t synthetic_size = 128;
  double motion_min = 4.0;
  double motion_max = 12.0;
  uint64_t synthetic_seed = 1;
  int64_t holdout_count = 64;

  void validate() const;
};

/// Everything a run depends on. Serialized as JSON; see README for the schema.
struct RunConfig {
  std::string profile = "desk";
  uint64_t seed = 0;
  int64_t threads = 1;
  std::string output_dir = "runs/desk";
  /// Optional pretrained backbone (RIFE key layout or this project's). When
  /// empty the bootstrap stage trains the backbone on the configured data.
  std::string backbone_checkpoint;
  ModelConfig model = ModelConfig::desk();
  TrainConfig train;
  DataConfig data;
  LossWeights weights;

  static RunConfig desk();
  static RunConfig paper();
  /// Throws ContractViolation for an unknown profile.
  static RunConfig from_profile(const std::string& name);

  /// Profile defaults (file "profile" key, or `profile_override` when set)
  /// overlaid with the file's values. Unknown keys are rejected.
  static RunConfig load(const std::filesystem::path& path, const std::string& profile_override = "");
  static RunConfig from_json(const nlohmann::json& j, const std::string& profile_override = "");

  nlohmann::json to_json() const;
  /// SHA-256 of the canonical JSON dump.
  std::string hash() const;
  void validate() const;
};

}  // namespace semvfi
