// Copyright 2026 The semvfi Authors
// SPDX-License-Identifier: Apache-2.0

// semvfi: train, interpolate, benchmark, visualize, inspect-params.
//
// Exit codes: 0 success, 2 usage error, 3 data/weights error.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "semvfi/config.hpp"
#include "semvfi/errors.hpp"
#include "semvfi/evaluation.hpp"
#include "semvfi/image_io.hpp"
#include "semvfi/metrics.hpp"
#include "semvfi/model.hpp"
#include "semvfi/training.hpp"

namespace fs = std::filesystem;
using namespace semvfi;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;

struct GlobalOptions {
  std::string config;
  std::string checkpoint;
  std::string profile;
  std::optional<uint64_t> seed;
  std::vector<std::string> plugins;
};

RunConfig resolve_config(const GlobalOptions& g) {
  RunConfig config = g.config.empty() ? RunConfig::from_profile(g.profile.empty() ? "desk" : g.profile)
                                      : RunConfig::load(g.config, g.profile);
  if (g.seed) config.seed = *g.seed;
  config.validate();
  torch::set_num_threads(static_cast<int>(config.threads));
  return config;
}

InferenceMode parse_mode(const std::string& mode) {
  return mode == "baseline" ? InferenceMode::kBaseline : InferenceMode::kSemantic;
}

SemanticVfiModel build_model(const RunConfig& config, const GlobalOptions& g, bool with_extractor) {
  torch::manual_seed(config.seed);
  SemanticVfiModel model(config.model,
                         with_extractor ? make_extractor(config.model.extractor) : nullptr);
  if (!g.checkpoint.empty()) load_model_checkpoint(*model, g.checkpoint);
  model->eval();
  return model;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw DataError(semvfi::detail::concat("cannot write ", path.string()));
  out << text;
}

int cmd_train(const GlobalOptions& g, const std::string& output_dir) {
  RunConfig config = resolve_config(g);
  if (!output_dir.empty()) config.output_dir = output_dir;
  if (!g.checkpoint.empty()) config.backbone_checkpoint = g.checkpoint;
  const TrainingSummary summary = run_training(config);
  for (const auto& [group, before] : summary.frozen_hashes_before) {
    const bool same = before == summary.frozen_hashes_after.at(group);
    std::cout << "frozen " << group << " " << before.substr(0, 16) << (same ? " unchanged" : " CHANGED")
              << '\n';
  }
  if (!summary.records.empty()) {
    std::cout << "final loss " << summary.records.back().loss.total << '\n';
  }
  std::cout << "checkpoint " << summary.final_checkpoint.string() << '\n';
  return kExitOk;
}

int cmd_interpolate(const GlobalOptions& g, const std::string& frame0, const std::string& frame1,
                    int64_t factor, const std::string& out_dir, const std::string& mode) {
  const RunConfig config = resolve_config(g);
  const InferenceMode m = parse_mode(mode);
  SemanticVfiModel model = build_model(config, g, m == InferenceMode::kSemantic);
  const torch::Tensor i0 = read_image(frame0);
  const torch::Tensor i1 = read_image(frame1);
  if (i0.sizes() != i1.sizes()) throw DataError("input frames differ in size");
  const auto frames = interpolate_frames(*model, i0, i1, factor, m);
  for (const auto& p : write_interpolated(out_dir, frames, factor)) std::cout << p.string() << '\n';
  return kExitOk;
}

int cmd_benchmark(const GlobalOptions& g, const std::string& layout, const std::string& root,
                  const std::string& list, const std::string& split, const std::string& out_dir,
                  const std::string& mode, int64_t warmup, bool no_timing, bool with_baseline,
                  int64_t synthetic_count) {
  const RunConfig config = resolve_config(g);
  std::vector<TripletRecord> records;
  if (layout == "vimeo") {
    records = load_vimeo_triplets(root, list);
  } else if (layout == "snufilm") {
    records = load_snufilm_triplets(root, list);
  } else {
    records = synth_triplets({mix_seed(config.data.synthetic_seed, 0xbe4c), synthetic_count,
                              config.data.synthetic_size, config.data.motion_min,
                              config.data.motion_max});
  }

  const InferenceMode m = parse_mode(mode);
  SemanticVfiModel model = build_model(config, g, m == InferenceMode::kSemantic);
  std::vector<MetricReport> reports;
  BenchmarkOptions options;
  options.split = split;
  options.warmup = warmup;
  options.plugins = g.plugins;
  options.timing = !no_timing;
  if (with_baseline) {
    options.method = "baseline";
    options.mode = InferenceMode::kBaseline;
    reports.push_back(run_benchmark(*model, records, options));
  }
  options.method = m == InferenceMode::kSemantic ? "semvfi" : "baseline";
  options.mode = m;
  if (!(with_baseline && m == InferenceMode::kBaseline)) {
    reports.push_back(run_benchmark(*model, records, options));
  }

  const fs::path dir = out_dir;
  write_text(dir / "metrics.csv", metrics_csv(reports));
  write_text(dir / "timing.csv", timing_csv(reports));
  const std::string table = metrics_table(reports);
  write_text(dir / "metrics.txt", table);
  std::cout << table;
  for (const auto& r : reports) {
    for (const auto& t : r.timings) {
      std::cout << r.method << " " << t.precision << " " << t.mean_seconds << " +/- "
                << t.std_seconds << " s/frame on " << t.device << '\n';
    }
  }
  return kExitOk;
}

int cmd_visualize(const GlobalOptions& g, const std::string& kind, const std::string& frame0,
                  const std::string& frame1, const std::string& out_dir, const std::string& depth) {
  const torch::Tensor i0 = read_image(frame0);
  const torch::Tensor i1 = read_image(frame1);
  if (i0.sizes() != i1.sizes()) throw DataError("input frames differ in size");
  const fs::path dir = out_dir;
  fs::create_directories(dir);
  if (kind == "overlay") {
    write_png(dir / "overlay.png", overlay(i0, i1));
    std::cout << (dir / "overlay.png").string() << '\n';
    return kExitOk;
  }
  const RunConfig config = resolve_config(g);
  SemanticVfiModel model = build_model(config, g, true);
  if (kind == "pca") {
    const PcaPanel panel = pca_panel(model->extractor(), i0, i1, depth);
    const fs::path path = dir / ("pca_" + depth + ".png");
    write_png(path, panel.image);
    std::cout << path.string() << " explained variance";
    for (double v : panel.maps.explained_variance_ratio) std::cout << ' ' << v;
    std::cout << '\n';
    return kExitOk;
  }
  for (const auto& [name, map] : offset_heatmaps(*model, i0, i1)) {
    const fs::path path = dir / ("offsets_" + name + ".png");
    write_png(path, apply_colormap(map));
    std::cout << path.string() << " max " << map.max().item<double>() << '\n';
  }
  return kExitOk;
}

int cmd_inspect(const GlobalOptions& g) {
  const RunConfig config = resolve_config(g);
  SemanticVfiModel model = build_model(config, g, false);
  std::cout << "profile " << config.profile << '\n' << parameter_report(*model).format();
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semantic-guided video frame interpolation"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions g;
  app.add_option("--config", g.config, "Run configuration (JSON)")->check(CLI::ExistingFile);
  app.add_option("--checkpoint", g.checkpoint, "Model or backbone checkpoint");
  app.add_option("--profile", g.profile, "Default profile")
      ->check(CLI::IsMember({"desk", "paper"}));
  app.add_option("--seed", g.seed, "Override the configured seed");
  app.add_option("--plugins", g.plugins, "Extra metric plugins (comma separated)")
      ->delimiter(',')
      ->check(CLI::IsMember(metric_plugin_names()));

  std::string output_dir;
  auto* train = app.add_subcommand("train", "Run the staged training pipeline");
  train->add_option("--output-dir", output_dir, "Overrides output_dir from the config");

  std::string frame0, frame1, out_dir = "out", mode = "semantic", kind, depth = "deep";
  int64_t factor = 2;
  auto* interp = app.add_subcommand("interpolate", "Synthesize intermediate frames");
  interp->add_option("frame0", frame0, "First frame")->required();
  interp->add_option("frame1", frame1, "Second frame")->required();
  interp->add_option("--factor", factor, "Power-of-two frame-rate multiplier")
      ->check(CLI::Range(int64_t{2}, int64_t{1} << 20));
  interp->add_option("--out", out_dir, "Output directory");
  interp->add_option("--mode", mode)->check(CLI::IsMember({"semantic", "baseline"}));

  std::string layout = "synthetic", root, list, split = "test";
  int64_t warmup = 5, synthetic_count = 50;
  bool no_timing = false, with_baseline = false;
  auto* bench = app.add_subcommand("benchmark", "Score a dataset and time the forward pass");
  bench->add_option("--layout", layout)->check(CLI::IsMember({"vimeo", "snufilm", "synthetic"}));
  bench->add_option("--root", root, "Dataset root");
  bench->add_option("--list", list, "Triplet list file");
  bench->add_option("--split", split, "Split label for the report");
  bench->add_option("--out", out_dir, "Report directory");
  bench->add_option("--mode", mode)->check(CLI::IsMember({"semantic", "baseline"}));
  bench->add_option("--warmup", warmup)->check(CLI::NonNegativeNumber);
  bench->add_option("--synthetic-count", synthetic_count)->check(CLI::PositiveNumber);
  bench->add_flag("--no-timing", no_timing);
  bench->add_flag("--with-baseline", with_baseline, "Also report the frozen-backbone baseline");

  auto* vis = app.add_subcommand("visualize", "PCA maps, offset heatmaps or input overlays");
  vis->add_option("kind", kind)->required()->check(CLI::IsMember({"pca", "offsets", "overlay"}));
  vis->add_option("frame0", frame0)->required();
  vis->add_option("frame1", frame1)->required();
  vis->add_option("--out", out_dir, "Output directory");
  vis->add_option("--depth", depth, "PCA feature depth")->check(CLI::IsMember({"shallow", "deep"}));

  auto* inspect = app.add_subcommand("inspect-params", "Frozen/trainable parameter breakdown");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*train) return cmd_train(g, output_dir);
    if (*interp) return cmd_interpolate(g, frame0, frame1, factor, out_dir, mode);
    if (*bench) {
      if (layout != "synthetic" && (root.empty() || list.empty())) {
        std::cerr << "error: --root and --list are required for layout " << layout << '\n';
        return kExitUsage;
      }
      return cmd_benchmark(g, layout, root, list, split, out_dir, mode, warmup, no_timing,
                           with_baseline, synthetic_count);
    }
    if (*vis) return cmd_visualize(g, kind, frame0, frame1, out_dir, depth);
    if (*inspect) return cmd_inspect(g);
  } catch (const ContractViolation& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const LoadError& e) {
    std::cerr << "load error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return kExitUsage;
}
