// Copyright 2026 The rvseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "rvseg/kitti_io.hpp"

#include <gtest/gtest.h>

#include <cstdint>
#include <filesystem>
#include <fstream>

#include "rvseg/errors.hpp"

namespace rvseg {
namespace {

namespace fs = std::filesystem;

class KittiIoTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("rvseg_kitti_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
                                        "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path dir_;
};

TEST_F(KittiIoTest, RoundTripIsExact) {
  PointCloud pc;
  pc.push_back(1.5f, -2.25f, 0.125f, 0.5f, 1);
  pc.push_back(-1e-7f, 3e4f, -7.f, 1.0f, 65535);
  pc.push_back(0.f, 0.f, 0.f, 0.f, 0);
  write_kitti_points(dir_ / "a.bin", pc);
  write_kitti_labels(dir_ / "a.label", pc.labels);
  const auto back = read_kitti_scan(dir_ / "a.bin", dir_ / "a.label");
  EXPECT_EQ(back.x, pc.x);
  EXPECT_EQ(back.y, pc.y);
  EXPECT_EQ(back.z, pc.z);
  EXPECT_EQ(back.r, pc.r);
  EXPECT_EQ(back.labels, pc.labels);
  EXPECT_EQ(fs::file_size(dir_ / "a.bin"), 3u * 16u);
}

TEST_F(KittiIoTest, UpperLabelBitsAreInstanceIdsAndIgnored) {
  const std::uint32_t raw[2] = {(7u << 16) | 3u, 0xABCD0001u};
  std::ofstream(dir_ / "l.label", std::ios::binary).write(reinterpret_cast<const char*>(raw), sizeof raw);
  EXPECT_EQ(read_kitti_labels(dir_ / "l.label"), (std::vector<int>{3, 1}));
}

TEST_F(KittiIoTest, TruncatedFilesAreRejected) {
  std::ofstream(dir_ / "t.bin", std::ios::binary).write("0123456789", 10);
  EXPECT_THROW(read_kitti_points(dir_ / "t.bin"), DataError);
  std::ofstream(dir_ / "t.label", std::ios::binary).write("012", 3);
  EXPECT_THROW(read_kitti_labels(dir_ / "t.label"), DataError);
}

TEST_F(KittiIoTest, LabelCountMismatchIsRejected) {
  PointCloud pc;
  pc.push_back(1, 1, 1, 0, 1);
  write_kitti_points(dir_ / "m.bin", pc);
  const std::vector<int> two{1, 2};
  write_kitti_labels(dir_ / "m.label", two);
  EXPECT_THROW(read_kitti_scan(dir_ / "m.bin", dir_ / "m.label"), DataError);
}

TEST_F(KittiIoTest, MissingFileAndOversizedLabel) {
  EXPECT_THROW(read_kitti_points(dir_ / "nope.bin"), DataError);
  const std::vector<int> big{70000};
  EXPECT_THROW(write_kitti_labels(dir_ / "b.label", big), DataError);
}

}  // namespace
}  // namespace rvseg
