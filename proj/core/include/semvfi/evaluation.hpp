// Copyright 2026 The semvfi Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "semvfi/data.hpp"
#include "semvfi/metrics.hpp"
#include "semvfi/model.hpp"

namespace semvfi {

/// Smallest accepted frame side for interpolation and visualization.
inline constexpr int64_t kMinFrameSide = 32;

struct BenchmarkOptions {
  std::string method = "semvfi";
  std::string split = "test";
  InferenceMode mode = InferenceMode::kSemantic;
  int64_t warmup = 5;                // forward passes excluded from timing
  std::vector<std::string> plugins;  // registered metric names
  bool timing = true;
  bool reduced_precision = true;     // also time under bfloat16 autocast
};

/// Scores every record. Frames are loaded before the clock starts, so the
/// timing covers the model forward only. Throws DataError on an empty set.
MetricReport run_benchmark(SemanticVfiModelImpl& model, const std::vector<TripletRecord>& records,
                           const BenchmarkOptions& options);

/// Recursive bisection at t = 0.5. Returns factor - 1 frames ordered by
/// timestamp k / factor, k = 1..factor-1. `factor` must be a power of two
/// no smaller than 2.
std::vector<torch::Tensor> interpolate_frames(SemanticVfiModelImpl& model, const torch::Tensor& i0,
                                              const torch::Tensor& i1, int64_t factor,
                                              InferenceMode mode = InferenceMode::kSemantic);

/// Writes frames as <dir>/frame_<k>.png with k zero-padded to the width of
/// `factor`; returns the paths in order.
std::vector<std::filesystem::path> write_interpolated(const std::filesystem::path& dir,
                                                      const std::vector<torch::Tensor>& frames,
                                                      int64_t factor);

/// Mean of the two inputs, (3,H,W).
torch::Tensor overlay(const torch::Tensor& i0, const torch::Tensor& i1);

struct PcaPanel {
  torch::Tensor image;  // (3, H, 2W): frame 0 left, frame 1 right
  PcaMaps maps;
};

/// Shared-basis PCA of one depth ("shallow" or "deep"), upsampled by
/// nearest neighbour to the input size.
PcaPanel pca_panel(SemanticExtractor& extractor, const torch::Tensor& i0, const torch::Tensor& i1,
                   const std::string& depth);

/// ||dp|| per site and direction ("s2.past", "s2.future", ...), each
/// (h, w) in [0,1], normalized by the largest value at that site. A site
/// whose offsets are all zero yields an all-zero map.
std::map<std::string, torch::Tensor> offset_heatmaps(SemanticVfiModelImpl& model,
                                                     const torch::Tensor& i0,
                                                     const torch::Tensor& i1);

}  // namespace semvfi
