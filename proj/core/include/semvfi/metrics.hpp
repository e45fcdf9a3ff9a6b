// Copyright 2026 The semvfi Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <torch/torch.h>

namespace semvfi {

/// Reported for MSE == 0.
inline constexpr double kPsnrCap = 99.0;

/// 10 log10(1 / MSE) over all elements of one sample, in double precision.
double psnr(const torch::Tensor& pred, const torch::Tensor& gt);

/// Mean local SSIM on luminance (0.299 R + 0.587 G + 0.114 B) with an
/// 11x11 Gaussian window (sigma 1.5), C1 = 0.01^2, C2 = 0.03^2, over valid
/// windows only. Inputs are (3,H,W) or (1,3,H,W) in [0,1].
double ssim(const torch::Tensor& pred, const torch::Tensor& gt);

enum class MetricDirection { kHigherBetter, kLowerBetter };

/// External metric seam: maps (pred batch, gt batch) to one value per sample.
struct MetricPlugin {
  std::string name;
  MetricDirection direction = MetricDirection::kLowerBetter;
  std::function<std::vector<double>(const torch::Tensor&, const torch::Tensor&)> evaluate;
};

/// Process-wide plugin registry. "l1" (mean absolute error, lower-better)
/// is built in.
void register_metric_plugin(MetricPlugin plugin);
const MetricPlugin& find_metric_plugin(const std::string& name);
std::vector<std::string> metric_plugin_names();

/// Order-independent mean: values are sorted, then summed with Neumaier
/// compensation.
double stable_mean(std::vector<double> values);
double stable_std(const std::vector<double>& values);

struct SampleMetrics {
  std::string id;
  double psnr = 0;
  double ssim = 0;
  std::map<std::string, double> plugins;
};

struct TimingReport {
  std::string precision;  // "fp32" or "bf16"
  std::string device;
  int64_t frames = 0;
  double mean_seconds = 0;
  double std_seconds = 0;
};

struct MetricReport {
  std::string method;
  std::string split;
  std::vector<SampleMetrics> samples;
  std::vector<std::string> plugin_names;
  std::vector<TimingReport> timings;

  int64_t count() const { return static_cast<int64_t>(samples.size()); }
  double mean_psnr() const;
  double mean_ssim() const;
  double mean_plugin(const std::string& name) const;
};

/// Per-sample CSV with the fixed header
///   method,split,sample,psnr,ssim[,<plugin>...]
/// followed by one "mean" row per (method, split). Values use 6 decimals.
std::string metrics_csv(const std::vector<MetricReport>& reports);
/// method,split,precision,device,frames,mean_seconds,std_seconds
std::string timing_csv(const std::vector<MetricReport>& reports);

/// Text table: one row per method, one "PSNR↑/SSIM↑" column per split plus
/// one column per plugin annotated with ↑ or ↓.
std::string metrics_table(const std::vector<MetricReport>& reports);

}  // namespace semvfi
