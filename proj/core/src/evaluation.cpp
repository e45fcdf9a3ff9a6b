// Copyright 2026 The semvfi Authors
// SPDX-License-Identifier: Apache-2.0

#include "semvfi/evaluation.hpp"

#include <ATen/autocast_mode.h>

#include <chrono>
#include <sstream>
#include <iomanip>

#include "semvfi/errors.hpp"
#include "semvfi/image_io.hpp"

namespace semvfi {

using torch::Tensor;
namespace F = torch::nn::functional;

namespace {

Tensor batched(const Tensor& x) { return x.dim() == 3 ? x.unsqueeze(0) : x; }

void check_frames(const Tensor& i0, const Tensor& i1) {
  expects(i0.sizes() == i1.sizes(), "frames differ in shape: ", i0.sizes(), " vs ", i1.sizes());
  const Tensor b = batched(i0);
  if (b.size(2) < kMinFrameSide || b.size(3) < kMinFrameSide) {
    throw DataError(detail::concat("frame size ", b.size(2), "x", b.size(3),
                                   " is below the minimum ", kMinFrameSide, "x", kMinFrameSide));
  }
}

std::string device_name() {
  std::ostringstream os;
  os << "cpu(threads=" << torch::get_num_threads() << ")";
  return os.str();
}

class AutocastScope {
 public:
  AutocastScope() {
    at::autocast::set_autocast_enabled(at::kCPU, true);
    at::autocast::set_autocast_dtype(at::kCPU, at::kBFloat16);
  }
  ~AutocastScope() {
    at::autocast::clear_cache();
    at::autocast::set_autocast_enabled(at::kCPU, false);
  }
  AutocastScope(const AutocastScope&) = delete;
  AutocastScope& operator=(const AutocastScope&) = delete;
};

TimingReport time_forward(SemanticVfiModelImpl& model, const std::vector<FrameTriplet>& inputs,
                          const BenchmarkOptions& options, const std::string& precision) {
  using Clock = std::chrono::steady_clock;
  for (int64_t w = 0; w < options.warmup; ++w) {
    const auto& x = inputs[static_cast<size_t>(w) % inputs.size()];
    model.forward(x.i0, x.i1, x.t, options.mode);
  }
  std::vector<double> seconds;
  seconds.reserve(inputs.size());
  for (const auto& x : inputs) {
    const auto start = Clock::now();
    const Tensor out = model.forward(x.i0, x.i1, x.t, options.mode).frame();
    (void)out.data_ptr();
    seconds.push_back(std::chrono::duration<double>(Clock::now() - start).count());
  }
  TimingReport t;
  t.precision = precision;
  t.device = device_name();
  t.frames = static_cast<int64_t>(seconds.size());
  t.mean_seconds = stable_mean(seconds);
  t.std_seconds = stable_std(seconds);
  return t;
}

}  // namespace

MetricReport run_benchmark(SemanticVfiModelImpl& model, const std::vector<TripletRecord>& records,
                           const BenchmarkOptions& options) {
  if (records.empty()) throw DataError("benchmark: the dataset is empty");
  for (const auto& p : options.plugins) find_metric_plugin(p);

  const bool was_training = model.is_training();
  model.eval();
  torch::NoGradGuard no_grad;

  MetricReport report;
  report.method = options.method;
  report.split = options.split;
  report.plugin_names = options.plugins;

  std::vector<FrameTriplet> inputs;
  inputs.reserve(records.size());
  for (const auto& r : records) {
    const TripletRecord m = r.materialized();
    FrameTriplet x{batched(m.i0), batched(m.i1), batched(m.igt), 0.5};
    x.validate();
    inputs.push_back(x);

    const Tensor pred = model.forward(x.i0, x.i1, x.t, options.mode).frame().clamp(0.0, 1.0);
    SampleMetrics s;
    s.id = r.source;
    s.psnr = psnr(pred, x.igt);
    s.ssim = ssim(pred, x.igt);
    for (const auto& p : options.plugins) {
      s.plugins[p] = find_metric_plugin(p).evaluate(pred, x.igt).at(0);
    }
    report.samples.push_back(std::move(s));
  }

  if (options.timing) {
    report.timings.push_back(time_forward(model, inputs, options, "fp32"));
    if (options.reduced_precision) {
      AutocastScope autocast;
      report.timings.push_back(time_forward(model, inputs, options, "bf16"));
    }
  }
  model.train(was_training);
  return report;
}

std::vector<Tensor> interpolate_frames(SemanticVfiModelImpl& model, const Tensor& i0,
                                       const Tensor& i1, int64_t factor, InferenceMode mode) {
  expects(factor >= 2 && (factor & (factor - 1)) == 0,
          "interpolation factor must be a power of two >= 2, got ", factor);
  check_frames(i0, i1);
  const bool was_training = model.is_training();
  model.eval();
  torch::NoGradGuard no_grad;

  std::vector<Tensor> out;
  out.reserve(static_cast<size_t>(factor - 1));
  auto bisect = [&](auto&& self, const Tensor& a, const Tensor& b, int64_t span) -> void {
    if (span < 2) return;
    const Tensor mid = model.forward(a, b, 0.5, mode).frame().clamp(0.0, 1.0);
    self(self, a, mid, span / 2);
    out.push_back(mid[0]);
    self(self, mid, b, span / 2);
  };
  bisect(bisect, batched(i0), batched(i1), factor);
  model.train(was_training);
  return out;
}

std::vector<std::filesystem::path> write_interpolated(const std::filesystem::path& dir,
                                                      const std::vector<Tensor>& frames,
                                                      int64_t factor) {
  std::filesystem::create_directories(dir);
  const auto digits = static_cast<int>(std::to_string(factor).size());
  std::vector<std::filesystem::path> paths;
  for (size_t k = 0; k < frames.size(); ++k) {
    std::ostringstream name;
    name << "frame_" << std::setw(digits) << std::setfill('0') << (k + 1) << ".png";
    paths.push_back(dir / name.str());
    write_png(paths.back(), frames[k]);
  }
  return paths;
}

Tensor overlay(const Tensor& i0, const Tensor& i1) {
  expects(i0.sizes() == i1.sizes(), "overlay: shapes differ: ", i0.sizes(), " vs ", i1.sizes());
  const Tensor a = i0.dim() == 4 ? i0[0] : i0;
  const Tensor b = i1.dim() == 4 ? i1[0] : i1;
  return 0.5 * (a + b);
}

PcaPanel pca_panel(SemanticExtractor& extractor, const Tensor& i0, const Tensor& i1,
                   const std::string& depth) {
  expects(depth == "shallow" || depth == "deep", "pca depth must be shallow or deep, got '",
          depth, "'");
  check_frames(i0, i1);
  torch::NoGradGuard no_grad;
  const Tensor a = batched(i0);
  const Tensor b = batched(i1);
  const SemanticFeatures fa = extractor.extract(a);
  const SemanticFeatures fb = extractor.extract(b);
  PcaPanel panel;
  panel.maps = depth == "shallow" ? pca_visualize(fa.shallow, fb.shallow)
                                  : pca_visualize(fa.deep, fb.deep);
  auto upsample = [&](const Tensor& m) {
    Tensor rgb = m;
    if (rgb.size(0) < 3) rgb = torch::cat({rgb, rgb.new_zeros({3 - rgb.size(0), rgb.size(1), rgb.size(2)})});
    return F::interpolate(rgb.unsqueeze(0), F::InterpolateFuncOptions()
                                                .size(std::vector<int64_t>{a.size(2), a.size(3)})
                                                .mode(torch::kNearest))[0];
  };
  panel.image = torch::cat({upsample(panel.maps.map_a), upsample(panel.maps.map_b)}, 2);
  return panel;
}

std::map<std::string, Tensor> offset_heatmaps(SemanticVfiModelImpl& model, const Tensor& i0,
                                              const Tensor& i1) {
  check_frames(i0, i1);
  const bool was_training = model.is_training();
  model.eval();
  torch::NoGradGuard no_grad;
  const ModelOutput out = model.forward(batched(i0), batched(i1), 0.5, InferenceMode::kSemantic);
  model.train(was_training);

  std::map<std::string, Tensor> maps;
  auto add = [&](const std::string& site, const SiteTrace& trace, int64_t groups) {
    const Tensor past = offset_magnitude(trace.dsf.past.offsets, groups)[0][0];
    const Tensor future = offset_magnitude(trace.dsf.future.offsets, groups)[0][0];
    const double peak = std::max(past.max().item<double>(), future.max().item<double>());
    const double scale = peak > 0.0 ? 1.0 / peak : 0.0;
    maps[site + ".past"] = past * scale;
    maps[site + ".future"] = future * scale;
  };
  add("s2", *out.s2, model.dsf_s2->config().groups);
  add("s3", *out.s3, model.dsf_s3->config().groups);
  return maps;
}

}  // namespace semvfi
