// Copyright 2026 The semvfi Authors
// SPDX-License-Identifier: Apache-2.0

#include "semvfi/evaluation.hpp"

#include <gtest/gtest.h>

#include <filesystem>

#include "semvfi/errors.hpp"

namespace semvfi {
namespace {

namespace fs = std::filesystem;
using torch::Tensor;

SemanticVfiModel desk_model() {
  torch::manual_seed(0);
  const ModelConfig cfg = ModelConfig::desk();
  SemanticVfiModel m(cfg, make_extractor(cfg.extractor));
  m->eval();
  return m;
}

std::vector<TripletRecord> small_set() {
  SynthOptions o;
  o.seed = 3;
  o.count = 3;
  o.size = 48;
  return synth_triplets(o);
}

TEST(Interpolate, FactorControlsTheFrameCount) {
  SemanticVfiModel m = desk_model();
  const Tensor i0 = torch::rand({3, 32, 40});
  const Tensor i1 = torch::rand({3, 32, 40});
  const auto two = interpolate_frames(*m, i0, i1, 2);
  ASSERT_EQ(two.size(), 1u);
  EXPECT_EQ(two[0].sizes(), i0.sizes());
  EXPECT_EQ(interpolate_frames(*m, i0, i1, 8, InferenceMode::kBaseline).size(), 7u);
  EXPECT_THROW(interpolate_frames(*m, i0, i1, 3), ContractViolation);
  EXPECT_THROW(interpolate_frames(*m, i0, i1, 1), ContractViolation);
  EXPECT_THROW(interpolate_frames(*m, torch::rand({3, 16, 40}), torch::rand({3, 16, 40}), 2),
               DataError);
}

TEST(Interpolate, MiddleFrameOfFactorFourIsTheDirectPrediction) {
  SemanticVfiModel m = desk_model();
  const Tensor i0 = torch::rand({3, 32, 32});
  const Tensor i1 = torch::rand({3, 32, 32});
  const auto four = interpolate_frames(*m, i0, i1, 4, InferenceMode::kBaseline);
  const auto two = interpolate_frames(*m, i0, i1, 2, InferenceMode::kBaseline);
  EXPECT_TRUE(torch::allclose(four[1], two[0]));
}

TEST(WriteInterpolated, PadsIndicesToTheFactorWidth) {
  const fs::path dir = fs::temp_directory_path() / "semvfi_write_interp";
  fs::remove_all(dir);
  const std::vector<Tensor> frames(15, torch::zeros({3, 8, 8}));
  const auto paths = write_interpolated(dir, frames, 16);
  ASSERT_EQ(paths.size(), 15u);
  EXPECT_EQ(paths.front().filename(), "frame_01.png");
  EXPECT_EQ(paths.back().filename(), "frame_15.png");
  EXPECT_TRUE(fs::exists(paths.back()));
  fs::remove_all(dir);
}

TEST(Overlay, IdenticalFramesAreReturnedUnchanged) {
  const Tensor x = torch::rand({3, 32, 32});
  EXPECT_TRUE(torch::allclose(overlay(x, x), x));
}

TEST(OffsetHeatmaps, AreZeroBeforeTraining) {
  SemanticVfiModel m = desk_model();
  const auto maps = offset_heatmaps(*m, torch::rand({3, 64, 64}), torch::rand({3, 64, 64}));
  for (const char* key : {"s2.past", "s2.future", "s3.past", "s3.future"}) {
    ASSERT_TRUE(maps.count(key)) << key;
    EXPECT_EQ(maps.at(key).abs().max().item<float>(), 0.0f) << key;
  }
}

TEST(PcaPanel, IdenticalFramesGiveIdenticalHalves) {
  SemanticVfiModel m = desk_model();
  const Tensor x = torch::rand({3, 64, 64});
  const PcaPanel p = pca_panel(m->extractor(), x, x, "deep");
  EXPECT_EQ(p.image.sizes(), (std::vector<int64_t>{3, 64, 128}));
  EXPECT_TRUE(torch::equal(p.image.narrow(2, 0, 64), p.image.narrow(2, 64, 64)));
  EXPECT_THROW(pca_panel(m->extractor(), x, x, "middle"), ContractViolation);
}

TEST(Benchmark, ZeroGatesMatchTheBaselineRowForRow) {
  SemanticVfiModel m = desk_model();
  BenchmarkOptions o;
  o.timing = false;
  o.plugins = {"l1"};
  const MetricReport sem = run_benchmark(*m, small_set(), o);
  o.mode = InferenceMode::kBaseline;
  const MetricReport base = run_benchmark(*m, small_set(), o);
  ASSERT_EQ(sem.count(), 3);
  for (size_t k = 0; k < sem.samples.size(); ++k) {
    EXPECT_NEAR(sem.samples[k].psnr, base.samples[k].psnr, 1e-4);
    EXPECT_NEAR(sem.samples[k].ssim, base.samples[k].ssim, 1e-6);
  }
  EXPECT_TRUE(sem.timings.empty());
}

TEST(Benchmark, IsDeterministicAndTimesBothPrecisions) {
  SemanticVfiModel m = desk_model();
  BenchmarkOptions o;
  o.warmup = 1;
  const MetricReport a = run_benchmark(*m, small_set(), o);
  const MetricReport b = run_benchmark(*m, small_set(), o);
  for (size_t k = 0; k < a.samples.size(); ++k) EXPECT_EQ(a.samples[k].psnr, b.samples[k].psnr);
  ASSERT_EQ(a.timings.size(), 2u);
  EXPECT_EQ(a.timings[0].precision, "fp32");
  EXPECT_EQ(a.timings[0].frames, 3);
  EXPECT_GT(a.timings[0].mean_seconds, 0.0);
  EXPECT_THROW(run_benchmark(*m, {}, o), DataError);
}

}  // namespace
}  // namespace semvfi
