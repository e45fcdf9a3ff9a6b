// Copyright 2026 The semvfi Authors
// SPDX-License-Identifier: Apache-2.0

#include "semvfi/data.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "semvfi/errors.hpp"
#include "semvfi/image_io.hpp"

namespace semvfi {
namespace {

namespace fs = std::filesystem;
using torch::Tensor;

class TempDir {
 public:
  explicit TempDir(const std::string& name) : path_(fs::temp_directory_path() / name) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

void write_sequence(const fs::path& dir) {
  fs::create_directories(dir);
  for (const char* name : {"im1.png", "im2.png", "im3.png"}) {
    write_png(dir / name, torch::rand({3, 40, 48}));
  }
}

TEST(Synthetic, IsDeterministicAndInRange) {
  SynthOptions o;
  o.seed = 5;
  o.count = 4;
  o.size = 64;
  const auto a = synth_triplets(o);
  const auto b = synth_triplets(o);
  ASSERT_EQ(a.size(), 4u);
  for (size_t k = 0; k < a.size(); ++k) {
    EXPECT_TRUE(torch::equal(a[k].igt, b[k].igt));
    EXPECT_EQ(a[k].i0.sizes(), (std::vector<int64_t>{3, 64, 64}));
    EXPECT_GE(a[k].i0.min().item<float>(), 0.0f);
    EXPECT_LE(a[k].i1.max().item<float>(), 1.0f);
  }
  o.seed = 6;
  EXPECT_FALSE(torch::equal(synth_triplets(o)[0].igt, a[0].igt));
}

TEST(Synthetic, FramesActuallyMoveAndTheMiddleFrameIsNotTheAverage) {
  SynthOptions o;
  o.count = 8;
  o.size = 128;
  const auto t = synth_triplets(o);
  double motion = 0, avg_gap = 0;
  for (const auto& r : t) {
    motion += (r.i0 - r.i1).abs().mean().item<double>();
    avg_gap += (0.5 * (r.i0 + r.i1) - r.igt).abs().mean().item<double>();
  }
  EXPECT_GT(motion / t.size(), 0.01);
  EXPECT_GT(avg_gap / t.size(), 0.005);
}

TEST(Vimeo, LoadsListedSequences) {
  TempDir tmp("semvfi_vimeo_ok");
  write_sequence(tmp.path() / "sequences/00001/0001");
  write_sequence(tmp.path() / "sequences/00001/0002");
  std::ofstream(tmp.path() / "list.txt") << "00001/0001\n\n00001/0002\r\n";
  const auto recs = load_vimeo_triplets(tmp.path(), tmp.path() / "list.txt");
  ASSERT_EQ(recs.size(), 2u);
  EXPECT_EQ(recs[1].source, "00001/0002");
  const TripletRecord m = recs[0].materialized();
  EXPECT_EQ(m.i0.sizes(), (std::vector<int64_t>{3, 40, 48}));
}

TEST(Vimeo, MalformedLinesReportFileAndLine) {
  TempDir tmp("semvfi_vimeo_bad");
  std::ofstream(tmp.path() / "list.txt") << "00001/0001\n../etc/passwd\n";
  write_sequence(tmp.path() / "sequences/00001/0001");
  try {
    load_vimeo_triplets(tmp.path(), tmp.path() / "list.txt");
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("list.txt:2"), std::string::npos) << e.what();
  }
}

TEST(Vimeo, MissingFramesFailOrSkipByPolicy) {
  TempDir tmp("semvfi_vimeo_missing");
  write_sequence(tmp.path() / "sequences/00001/0001");
  fs::create_directories(tmp.path() / "sequences/00001/0002");
  std::ofstream(tmp.path() / "list.txt") << "00001/0001\n00001/0002\n";
  EXPECT_THROW(load_vimeo_triplets(tmp.path(), tmp.path() / "list.txt"), DataError);
  EXPECT_EQ(load_vimeo_triplets(tmp.path(), tmp.path() / "list.txt", MissingPolicy::kSkip).size(), 1u);
  EXPECT_THROW(load_vimeo_triplets(tmp.path(), tmp.path() / "nope.txt"), DataError);
}

TEST(Snufilm, ParsesThreePathLines) {
  TempDir tmp("semvfi_snufilm");
  write_sequence(tmp.path() / "clip");
  std::ofstream(tmp.path() / "test-easy.txt") << "clip/im1.png clip/im2.png clip/im3.png\n";
  const auto recs = load_snufilm_triplets(tmp.path(), tmp.path() / "test-easy.txt");
  ASSERT_EQ(recs.size(), 1u);
  EXPECT_EQ(recs[0].path_gt, tmp.path() / "clip/im2.png");
  std::ofstream(tmp.path() / "bad.txt") << "clip/im1.png clip/im2.png\n";
  EXPECT_THROW(load_snufilm_triplets(tmp.path(), tmp.path() / "bad.txt"), DataError);
}

TEST(ImageIo, PngRoundTripIsWithinQuantization) {
  TempDir tmp("semvfi_png");
  const Tensor img = torch::rand({3, 17, 23});
  write_png(tmp.path() / "a.png", img);
  const Tensor back = read_image(tmp.path() / "a.png");
  EXPECT_LE((back - img).abs().max().item<float>(), 0.5f / 255.0f + 1e-6f);
  EXPECT_THROW(read_image(tmp.path() / "missing.png"), DataError);
}

TEST(Augment, IsAPureFunctionOfTheSeed) {
  SynthOptions o;
  o.count = 1;
  o.size = 64;
  const TripletRecord r = synth_triplets(o)[0];
  AugmentOptions a;
  a.crop = 32;
  const FrameTriplet x = augment(r, a, 11);
  const FrameTriplet y = augment(r, a, 11);
  EXPECT_TRUE(torch::equal(x.i0, y.i0));
  EXPECT_TRUE(torch::equal(x.igt, y.igt));
  EXPECT_EQ(x.i0.sizes(), (std::vector<int64_t>{1, 3, 32, 32}));
  a.crop = 96;
  EXPECT_THROW(augment(r, a, 11), ContractViolation);
}

TEST(Augment, ReversalSwapsTheEndpointsOnly) {
  SynthOptions o;
  o.count = 1;
  o.size = 32;
  const TripletRecord r = synth_triplets(o)[0];
  AugmentOptions a;
  a.crop = 32;
  a.random_crop = false;
  a.p_hflip = 0;
  a.p_vflip = 0;
  a.p_reverse = 1;
  const FrameTriplet x = augment(r, a, 3);
  EXPECT_TRUE(torch::equal(x.i0[0], r.i1));
  EXPECT_TRUE(torch::equal(x.i1[0], r.i0));
  EXPECT_TRUE(torch::equal(x.igt[0], r.igt));
}

TEST(EpochPermutation, IsAPermutationAndVariesByEpoch) {
  const auto p0 = epoch_permutation(50, 1, 0);
  const auto p1 = epoch_permutation(50, 1, 1);
  std::vector<int64_t> sorted = p0;
  std::sort(sorted.begin(), sorted.end());
  for (int64_t i = 0; i < 50; ++i) EXPECT_EQ(sorted[static_cast<size_t>(i)], i);
  EXPECT_NE(p0, p1);
  EXPECT_EQ(p0, epoch_permutation(50, 1, 0));
}

TEST(Collate, StacksAlongTheBatchDimension) {
  SynthOptions o;
  o.count = 3;
  o.size = 32;
  const auto batch = stack_records(synth_triplets(o));
  EXPECT_EQ(batch.i0.sizes(), (std::vector<int64_t>{3, 3, 32, 32}));
  EXPECT_NO_THROW(batch.validate());
}

}  // namespace
}  // namespace semvfi
