// SPDX-License-Identifier: Apache-2.0
#include <sstream>

#include <gtest/gtest.h>

#include "granulite/checkpoint.hpp"

using namespace granulite;

namespace {

Checkpoint sample() {
  Checkpoint ck;
  ck.ensemble = init_ensemble(InitialCondition::modulated(0.7, 0.2, {0, 1, 0}), 257, 3);
  ck.ensemble.time = 1.0 / 3.0;
  ck.lambda = 0.05;
  ck.model = RestitutionModel::capped(1.5, 0.3, 0.6);
  ck.seed = 0xfeedfacecafebeefULL;
  ck.step = 4242;
  return ck;
}

std::string bytes_of(const Checkpoint& ck) {
  std::ostringstream out(std::ios::binary);
  write_checkpoint(out, ck);
  return out.str();
}

}  // namespace

TEST(Checkpoint, WriteReadWriteIsByteIdentical) {
  for (const auto& model : {RestitutionModel::constant(0.9), RestitutionModel::viscoelastic(0.05),
                            RestitutionModel::capped(1.5, 0.3, 0.6)}) {
    auto ck = sample();
    ck.model = model;
    const auto first = bytes_of(ck);
    std::istringstream in(first, std::ios::binary);
    const auto back = read_checkpoint(in);
    EXPECT_EQ(back, ck);
    EXPECT_EQ(bytes_of(back), first);
  }
}

TEST(Checkpoint, RejectsForeignOrDamagedFiles) {
  auto bytes = bytes_of(sample());
  {
    auto bad = bytes;
    bad[0] = 'X';
    std::istringstream in(bad, std::ios::binary);
    EXPECT_THROW(read_checkpoint(in), FormatError);
  }
  {
    auto bad = bytes;
    bad[4] = 9;
    std::istringstream in(bad, std::ios::binary);
    EXPECT_THROW(read_checkpoint(in), FormatError);
  }
  {
    std::istringstream in(bytes.substr(0, bytes.size() - 5), std::ios::binary);
    EXPECT_THROW(read_checkpoint(in), FormatError);
  }
}

TEST(Checkpoint, FileRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "granulite_checkpoint_test.grnl";
  const auto ck = sample();
  save_checkpoint(path, ck);
  EXPECT_EQ(load_checkpoint(path), ck);
  std::filesystem::remove(path);
  EXPECT_THROW(load_checkpoint(path), FormatError);
}
