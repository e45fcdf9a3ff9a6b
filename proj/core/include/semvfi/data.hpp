// Copyright 2026 The semvfi Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "semvfi/flow_backbone.hpp"

namespace semvfi {

/// One training/evaluation triplet, either as file paths or in memory.
/// In-memory frames are (3,H,W) in [0,1].
struct TripletRecord {
  std::string source;
  std::filesystem::path path0;
  std::filesystem::path path_gt;
  std::filesystem::path path1;
  torch::Tensor i0;
  torch::Tensor igt;
  torch::Tensor i1;

  bool in_memory() const { return i0.defined(); }
  /// Returns a record with frames loaded (reads the files if needed).
  TripletRecord materialized() const;
};

struct SynthOptions {
  uint64_t seed = 0;
  int64_t count = 512;
  int64_t size = 128;
  double motion_min = 4.0;  // px of object displacement between i0 and i1
  double motion_max = 12.0;
};

/// Anti-aliased textured shapes translating and rotating linearly over a
/// panning background. igt is the exact render at t = 0.5. Record k depends
/// only on (seed, k).
std::vector<TripletRecord> synth_triplets(const SynthOptions& options);

enum class MissingPolicy { kFail, kSkip };

/// Vimeo90K layout: root/sequences/<a>/<b>/im{1,2,3}.png listed as "<a>/<b>"
/// lines; (im1, im2, im3) become (i0, igt, i1). Blank lines are ignored.
/// A malformed line throws DataError naming the line number; a missing
/// frame throws (kFail) or drops the record (kSkip).
std::vector<TripletRecord> load_vimeo_triplets(const std::filesystem::path& root,
                                               const std::filesystem::path& list_file,
                                               MissingPolicy policy = MissingPolicy::kFail);

/// SNU-FILM test list: each line holds three whitespace-separated frame
/// paths (i0, igt, i1), resolved against `root` when relative.
std::vector<TripletRecord> load_snufilm_triplets(const std::filesystem::path& root,
                                                 const std::filesystem::path& list_file,
                                                 MissingPolicy policy = MissingPolicy::kFail);

struct AugmentOptions {
  int64_t crop = 128;
  bool random_crop = true;  // otherwise center crop
  double p_hflip = 0.5;
  double p_vflip = 0.5;
  double p_reverse = 0.5;   // swap i0 and i1, keep igt
};

/// Joint crop/flip/reversal of one record into a batch-of-one triplet.
/// Throws ContractViolation when a frame is smaller than the crop.
FrameTriplet augment(const TripletRecord& record, const AugmentOptions& options, uint64_t seed);

/// Stacks records (3,H,W) into a (B,3,H,W) triplet without augmentation.
FrameTriplet stack_records(const std::vector<TripletRecord>& records);

/// Concatenates batch-of-one triplets along the batch dimension.
FrameTriplet collate(const std::vector<FrameTriplet>& items);

/// Epoch order: a permutation of [0, n) that depends only on (seed, epoch).
std::vector<int64_t> epoch_permutation(int64_t n, uint64_t seed, int64_t epoch);

/// Deterministic 64-bit mix of a seed with stream indices.
uint64_t mix_seed(uint64_t seed, uint64_t a, uint64_t b = 0, uint64_t c = 0);

}  // namespace semvfi
