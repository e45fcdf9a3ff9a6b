// Copyright 2026 The semvfi Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>

#include <torch/torch.h>

namespace semvfi {

/// Reads an 8-bit or 16-bit image as (3,H,W) float RGB in [0,1].
/// Throws DataError when the file is missing or undecodable.
torch::Tensor read_image(const std::filesystem::path& path);

/// Writes (3,H,W), (1,3,H,W) or (H,W)/(1,H,W) grayscale values in [0,1]
/// as a lossless 8-bit PNG (values are clamped and rounded).
void write_png(const std::filesystem::path& path, const torch::Tensor& image);

/// Maps a (H,W) or (1,H,W) map in [0,1] to (3,H,W) RGB using the "turbo"
/// colormap (blue = 0, red = 1).
torch::Tensor apply_colormap(const torch::Tensor& map);

}  // namespace semvfi
