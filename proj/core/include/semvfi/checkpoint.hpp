// Copyright 2026 The semvfi Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <torch/torch.h>

namespace semvfi {

/// Name -> tensor, ordered so that serialization and hashing are stable.
using TensorDict = std::map<std::string, torch::Tensor>;

/// On-disk checkpoint archive (pickled dictionary, readable from Python
/// with torch.load(path, weights_only=False)):
///
///   {"model":       {name: tensor},   parameter and buffer names, e.g.
///                                     ifnet.block0.conv0.0.0.weight,
///                                     contextnet.*, fusionnet.*, teacher.*,
///                                     fapm.compress.{shallow,deep}.*,
///                                     fapm.refine.{s2,s3}.*, dsf.{s2,s3}.*
///    "optimizer":   {name: tensor},   "<param>.exp_avg", "<param>.exp_avg_sq",
///                                     "<param>.step" (may be empty)
///    "stage":       int,              -1 when not written by the trainer
///    "step":        int,
///    "config_hash": str}
///
/// A flat {name: tensor} dictionary is also accepted on read and is treated
/// as the "model" entry.
struct CheckpointArchive {
  TensorDict model;
  TensorDict optimizer;
  int64_t stage = -1;
  int64_t step = 0;
  std::string config_hash;
};

void write_checkpoint(const std::filesystem::path& path, const CheckpointArchive& archive);

/// Throws LoadError when the file is missing or not a recognizable archive.
CheckpointArchive read_checkpoint(const std::filesystem::path& path);

/// Reads any pickled {str: tensor} dictionary (e.g. upstream weight files).
TensorDict read_tensor_dict(const std::filesystem::path& path);

/// Copies named values into `module`'s parameters and buffers.
///
/// In strict mode every module entry must be present in `weights` and every
/// entry of `weights` must map onto the module; otherwise the unmatched
/// names are listed in the thrown LoadError. Shape mismatches always throw.
/// Returns the names that were loaded.
std::vector<std::string> load_into(torch::nn::Module& module, const TensorDict& weights,
                                   bool strict);

/// Parameters and buffers of `module` by fully-qualified name (detached copies on CPU).
TensorDict state_dict(const torch::nn::Module& module);

/// Renames upstream RIFE weight keys onto this implementation's layout:
/// "module." prefixes are dropped, block0..2 move under ifnet., block_tea
/// becomes teacher., unet becomes fusionnet. Keys without a rule are kept
/// as-is, so a strict load reports them.
TensorDict map_rife_keys(const TensorDict& upstream);

}  // namespace semvfi
