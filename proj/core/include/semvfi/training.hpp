// Copyright 2026 The semvfi Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "semvfi/checkpoint.hpp"
#include "semvfi/config.hpp"
#include "semvfi/data.hpp"
#include "semvfi/model.hpp"
#include "semvfi/objectives.hpp"

namespace semvfi {

/// Stage 0 bootstraps the backbone (stand-in for pretrained weights);
/// stage 1 trains the adapters; stage 2 adds the FusionNet.
struct StageSpec {
  int stage = 1;
  std::set<std::string> trainable;

  static StageSpec for_stage(int stage);
  std::string name() const;
};

struct StagePartition {
  std::vector<std::string> trainable;  // parameter names
  std::vector<std::string> frozen;
  std::vector<torch::Tensor> parameters;  // the trainable tensors
};

/// Marks exactly `spec.trainable` groups as trainable and every other group
/// frozen. Throws ContractViolation for a name that is not a parameter group.
StagePartition build_stage(const StageSpec& spec, SemanticVfiModelImpl& model);

/// lr_min + (lr - lr_min) * (1 + cos(pi * step / (total - 1))) / 2, so the
/// first step uses lr and the last uses lr_min.
double cosine_lr(int64_t step, int64_t total, double lr, double lr_min);

struct StepRecord {
  int stage = 0;
  int64_t step = 0;
  double lr = 0;
  LossBreakdown loss;
  double grad_norm = 0;          // before clipping
  double grad_norm_clipped = 0;  // after clipping
  std::array<double, 2> gate_s2{0, 0};
  std::array<double, 2> gate_s3{0, 0};

  nlohmann::json to_json() const;
};

/// Builds the losses for one forward pass of `stage`.
std::pair<torch::Tensor, LossBreakdown> stage_loss(int stage, SemanticVfiModelImpl& model,
                                                   const FrameTriplet& batch,
                                                   const LossWeights& weights);

class Trainer {
 public:
  Trainer(RunConfig config, SemanticVfiModel model, std::vector<TripletRecord> records);

  /// Subsequent steps append one JSON object per line.
  void set_log(const std::filesystem::path& path);

  /// Number of optimizer steps planned for `stage`.
  int64_t stage_steps(int stage) const;
  int64_t steps_per_epoch() const;

  /// Runs a full stage with a fresh optimizer and its own cosine schedule,
  /// writing a checkpoint at each epoch end when an output directory is set.
  std::vector<StepRecord> run_stage(int stage);

  /// Prepares a stage without running it (partition, optimizer, schedule).
  void begin_stage(int stage);
  /// One forward/backward/update on `batch` at the current step.
  StepRecord train_step(const FrameTriplet& batch);
  /// The batch delivered at `step` of `stage`: a pure function of
  /// (seed, stage, epoch) and the record list.
  FrameTriplet batch(int stage, int64_t step) const;

  void save_checkpoint(const std::filesystem::path& path) const;
  void set_checkpoint_dir(const std::filesystem::path& dir) { checkpoint_dir_ = dir; }

  SemanticVfiModel model() const { return model_; }
  const RunConfig& config() const { return config_; }

 private:
  TensorDict optimizer_state() const;

  RunConfig config_;
  SemanticVfiModel model_;
  std::vector<TripletRecord> records_;
  std::unique_ptr<torch::optim::AdamW> optimizer_;
  StagePartition partition_;
  int stage_ = -1;
  int64_t step_ = 0;
  int64_t total_steps_ = 0;
  std::unique_ptr<std::ofstream> log_;
  std::filesystem::path checkpoint_dir_;
};

struct TrainingSummary {
  std::map<std::string, std::string> frozen_hashes_before;  // ifnet, contextnet, extractor
  std::map<std::string, std::string> frozen_hashes_after;
  std::vector<StepRecord> records;
  std::filesystem::path final_checkpoint;
};

/// Full pipeline: data, extractor, optional backbone load or bootstrap,
/// stages 1 and 2, final checkpoint. Logs go to <output_dir>/train_log.jsonl.
TrainingSummary run_training(const RunConfig& config);

/// Builds the training records for a config (synthetic or Vimeo layout).
std::vector<TripletRecord> training_records(const RunConfig& config);
/// Held-out synthetic triplets (disjoint seed from the training set).
std::vector<TripletRecord> holdout_records(const RunConfig& config);

/// Loads a checkpoint (this project's or RIFE's key layout) into the model.
/// Backbone-only archives load non-strictly; full archives strictly.
void load_model_checkpoint(SemanticVfiModelImpl& model, const std::filesystem::path& path);

}  // namespace semvfi
