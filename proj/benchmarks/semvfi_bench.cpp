// Copyright 2026 The semvfi Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>
#include <torch/torch.h>

#include "semvfi/deform_conv.hpp"
#include "semvfi/model.hpp"
#include "semvfi/warp.hpp"

namespace {

using torch::Tensor;

void BM_BackwardWarp(benchmark::State& state) {
  const int64_t side = state.range(0);
  torch::manual_seed(0);
  const Tensor x = torch::rand({1, 64, side, side});
  const Tensor flow = 4.0 * torch::randn({1, 2, side, side});
  torch::NoGradGuard ng;
  for (auto _ : state) benchmark::DoNotOptimize(semvfi::backward_warp(x, flow));
  state.SetItemsProcessed(state.iterations() * side * side);
}
BENCHMARK(BM_BackwardWarp)->Arg(32)->Arg(64)->Arg(128)->Unit(benchmark::kMicrosecond);

void BM_ModulatedDeformConv(benchmark::State& state) {
  const int64_t groups = state.range(0);
  const int64_t c = groups * 32;
  torch::manual_seed(0);
  const Tensor value = torch::randn({1, c, 16, 16});
  const Tensor offsets = torch::randn({1, groups * 18, 16, 16});
  const Tensor modulation = torch::rand({1, groups * 9, 16, 16});
  const Tensor weight = torch::randn({c, 32, 3, 3});
  torch::NoGradGuard ng;
  for (auto _ : state) {
    benchmark::DoNotOptimize(semvfi::modulated_deform_conv(value, offsets, modulation, weight, groups));
  }
}
BENCHMARK(BM_ModulatedDeformConv)->Arg(2)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond);

void BM_DeskForward(benchmark::State& state) {
  const bool semantic = state.range(0) != 0;
  torch::manual_seed(0);
  const semvfi::ModelConfig cfg = semvfi::ModelConfig::desk();
  semvfi::SemanticVfiModel model(cfg, semvfi::make_extractor(cfg.extractor));
  model->eval();
  const Tensor i0 = torch::rand({1, 3, 128, 128});
  const Tensor i1 = torch::rand({1, 3, 128, 128});
  const auto mode = semantic ? semvfi::InferenceMode::kSemantic : semvfi::InferenceMode::kBaseline;
  torch::NoGradGuard ng;
  for (auto _ : state) benchmark::DoNotOptimize(model->forward(i0, i1, 0.5, mode).frame());
  state.SetLabel(semantic ? "semantic" : "baseline");
}
BENCHMARK(BM_DeskForward)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
