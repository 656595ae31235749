// Copyright 2026 The actguard Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "actguard/activation_store.hpp"

#include <cmath>
#include <cstring>
#include <functional>
#include <fstream>
#include <random>

#include <gtest/gtest.h>
#include <json.hpp>

#include "test_util.hpp"

namespace actguard {
namespace {

namespace fs = std::filesystem;
using testing::TempDir;
using testing::slurp;

ActivationMatrix make_record(const std::string& sample, Modality modality, RowMatrixF data,
                             Label label = Label::benign) {
  ActivationMatrix a;
  a.data = std::move(data);
  a.modality = modality;
  a.label = label;
  a.sample_id = sample;
  return a;
}

bool contains(const std::string& haystack, const std::string& needle) {
  return haystack.find(needle) != std::string::npos;
}

void rewrite_manifest(const fs::path& dir, const std::function<void(nlohmann::json&)>& edit) {
  nlohmann::json j = nlohmann::json::parse(slurp(dir / "manifest.json"));
  edit(j);
  std::ofstream(dir / "manifest.json", std::ios::trunc) << j.dump(2);
}

TEST(ActivationStoreTest, SmallMatrixRoundTripsBitExact) {
  TempDir tmp;
  RowMatrixF m(2, 3);
  m << 1, 2, 3, 4, 5, 6;
  const auto rec = make_record("s0", Modality::textual, m);
  const DumpManifest manifest = write_dump({rec}, tmp.path(), "unit");
  ASSERT_EQ(manifest.records.size(), 1u);
  EXPECT_EQ(fs::file_size(tmp / manifest.records[0].file), 24u);

  const std::string bytes = slurp(tmp / manifest.records[0].file);
  float first;
  std::memcpy(&first, bytes.data(), 4);
  EXPECT_EQ(first, 1.0f);  // little-endian, row-major: first entry first
  float fourth;
  std::memcpy(&fourth, bytes.data() + 12, 4);
  EXPECT_EQ(fourth, 4.0f);

  const Dump back = read_dump(tmp.path());
  ASSERT_EQ(back.records.size(), 1u);
  EXPECT_TRUE(back.records[0] == rec);
  EXPECT_EQ(back.manifest.hidden_dim, 3);
  EXPECT_EQ(back.manifest.model, "unit");
}

TEST(ActivationStoreTest, EmptyDumpIsRejected) {
  TempDir tmp;
  try {
    write_dump({}, tmp.path());
    FAIL() << "expected DumpError";
  } catch (const DumpError& e) {
    EXPECT_TRUE(contains(e.what(), "empty dump"));
  }
}

TEST(ActivationStoreTest, HeterogeneousDimsNameBothDims) {
  TempDir tmp;
  const auto a = make_record("a", Modality::textual, RowMatrixF::Zero(2, 8));
  const auto b = make_record("b", Modality::textual, RowMatrixF::Zero(2, 16));
  try {
    write_dump({a, b}, tmp.path());
    FAIL() << "expected DumpError";
  } catch (const DumpError& e) {
    const std::string msg = e.what();
    EXPECT_TRUE(contains(msg, "8")) << msg;
    EXPECT_TRUE(contains(msg, "16")) << msg;
    EXPECT_TRUE(contains(msg, "hidden_dim")) << msg;
  }
}

TEST(ActivationStoreTest, NonFiniteEntriesAreRejected) {
  TempDir tmp;
  RowMatrixF m = RowMatrixF::Zero(2, 2);
  m(1, 1) = std::nanf("");
  EXPECT_THROW(write_dump({make_record("x", Modality::visual, m)}, tmp.path()), DumpError);
}

TEST(ActivationStoreTest, TruncatedBlobReportsLengthMismatchWithRecordId) {
  TempDir tmp;
  const auto rec = make_record("s0", Modality::visual, RowMatrixF::Ones(4, 4));
  write_dump({rec}, tmp.path());
  fs::resize_file(tmp / "s0_visual.f32", 60);
  try {
    read_dump(tmp.path());
    FAIL() << "expected DumpError";
  } catch (const DumpError& e) {
    ASSERT_EQ(e.problems().size(), 1u);
    EXPECT_TRUE(contains(e.problems()[0], "length mismatch"));
    EXPECT_TRUE(contains(e.problems()[0], "s0_visual"));
  }
}

TEST(ActivationStoreTest, EveryFailingRecordIsEnumerated) {
  TempDir tmp;
  std::vector<ActivationMatrix> recs;
  for (int i = 0; i < 4; ++i) {
    recs.push_back(make_record("s" + std::to_string(i), Modality::textual,
                               RowMatrixF::Constant(3, 5, static_cast<float>(i))));
  }
  write_dump(recs, tmp.path());
  fs::resize_file(tmp / "s1_textual.f32", 8);
  fs::remove(tmp / "s3_textual.f32");
  try {
    read_dump(tmp.path());
    FAIL() << "expected DumpError";
  } catch (const DumpError& e) {
    ASSERT_EQ(e.problems().size(), 2u);
    EXPECT_TRUE(contains(e.problems()[0], "s1_textual"));
    EXPECT_TRUE(contains(e.problems()[0], "length mismatch"));
    EXPECT_TRUE(contains(e.problems()[1], "s3_textual"));
    EXPECT_TRUE(contains(e.problems()[1], "missing blob"));
  }
}

TEST(ActivationStoreTest, UnknownModalityIsSchemaError) {
  TempDir tmp;
  write_dump({make_record("s0", Modality::visual, RowMatrixF::Ones(1, 2))}, tmp.path());
  rewrite_manifest(tmp.path(), [](nlohmann::json& j) { j["records"][0]["modality"] = "audio"; });
  try {
    read_dump(tmp.path());
    FAIL() << "expected DumpError";
  } catch (const DumpError& e) {
    EXPECT_TRUE(contains(e.what(), "schema error"));
    EXPECT_TRUE(contains(e.what(), "audio"));
  }
}

TEST(ActivationStoreTest, NewerVersionIsRejected) {
  TempDir tmp;
  write_dump({make_record("s0", Modality::visual, RowMatrixF::Ones(1, 2))}, tmp.path());
  rewrite_manifest(tmp.path(), [](nlohmann::json& j) { j["version"] = 2; });
  try {
    read_dump(tmp.path());
    FAIL() << "expected DumpError";
  } catch (const DumpError& e) {
    EXPECT_TRUE(contains(e.what(), "unsupported dump version 2"));
  }
}

TEST(ActivationStoreTest, PathEscapeAndStrayBlobsAreRejected) {
  TempDir tmp;
  write_dump({make_record("s0", Modality::visual, RowMatrixF::Ones(1, 2))}, tmp.path());
  {
    std::ofstream(tmp / "stray.f32", std::ios::binary) << "abcd";
  }
  EXPECT_THROW(read_dump(tmp.path()), DumpError);
  fs::remove(tmp / "stray.f32");
  rewrite_manifest(tmp.path(), [](nlohmann::json& j) { j["records"][0]["file"] = "../x.f32"; });
  EXPECT_THROW(read_dump(tmp.path()), DumpError);
}

TEST(ActivationStoreTest, RandomShapesRoundTripBitExact) {
  std::mt19937_64 rng(1234);
  std::uniform_int_distribution<int> shape(1, 9);
  std::uniform_real_distribution<float> value(-1e6f, 1e6f);
  for (int trial = 0; trial < 25; ++trial) {
    TempDir tmp;
    const int d = shape(rng);
    const int count = shape(rng);
    std::vector<ActivationMatrix> recs;
    for (int r = 0; r < count; ++r) {
      RowMatrixF m(shape(rng), d);
      for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = value(rng);
      m(0, 0) = -0.0f;
      auto rec = make_record("t" + std::to_string(r), r % 2 ? Modality::visual : Modality::textual,
                             m, r % 3 ? Label::benign : Label::malicious);
      rec.layer = 7;
      recs.push_back(std::move(rec));
    }
    write_dump(recs, tmp.path());
    const Dump back = read_dump(tmp.path());
    ASSERT_EQ(back.records.size(), recs.size());
    for (std::size_t i = 0; i < recs.size(); ++i) EXPECT_TRUE(back.records[i] == recs[i]);
  }
}

TEST(SyntheticTest, SameSeedGivesIdenticalBytes) {
  SyntheticConfig cfg;
  cfg.n_benign = 3;
  cfg.n_malicious = 3;
  cfg.hidden_dim = 8;
  cfg.tokens_per_sample = 5;
  cfg.seed = 7;
  TempDir a, b;
  const auto first = gen_synthetic(cfg);
  const auto second = gen_synthetic(cfg);
  write_dump(first.malicious, a.path());
  write_dump(second.malicious, b.path());
  for (const auto& entry : fs::directory_iterator(a.path())) {
    EXPECT_EQ(slurp(entry.path()), slurp(b / entry.path().filename().string()))
        << entry.path();
  }
  cfg.seed = 8;
  const auto other = gen_synthetic(cfg);
  EXPECT_FALSE(other.malicious[0] == first.malicious[0]);
}

TEST(SyntheticTest, PlantedDirsBeyondHiddenDimIsRejected) {
  SyntheticConfig cfg;
  cfg.hidden_dim = 32;
  cfg.planted_dirs = 64;
  try {
    gen_synthetic(cfg);
    FAIL() << "expected invalid_argument";
  } catch (const std::invalid_argument& e) {
    EXPECT_TRUE(contains(e.what(), "64"));
    EXPECT_TRUE(contains(e.what(), "32"));
  }
}

TEST(SyntheticTest, MaliciousVarianceAlongPlantedDirectionMatchesClosedForm) {
  // Var(e^T x) = 1 + g^2 for the spiked model; direct sample variance oracle.
  SyntheticConfig cfg;
  cfg.n_benign = 1;
  cfg.n_malicious = 2000;
  cfg.tokens_per_sample = 1;
  cfg.hidden_dim = 32;
  cfg.planted_dirs = 1;
  cfg.planted_gain = 5.0;
  cfg.planted_token_pairs = 0;
  cfg.seed = 11;
  const auto data = gen_synthetic(cfg);
  const Eigen::VectorXd e = data.truth.planted_basis.col(0);
  EXPECT_NEAR(e.norm(), 1.0, 1e-12);
  std::vector<double> proj;
  for (const auto& rec : data.malicious) {
    if (rec.modality == Modality::textual) proj.push_back(rec.as_double().row(0).dot(e));
  }
  ASSERT_EQ(proj.size(), 2000u);
  double mean = 0.0;
  for (double p : proj) mean += p;
  mean /= static_cast<double>(proj.size());
  double var = 0.0;
  for (double p : proj) var += (p - mean) * (p - mean);
  var /= static_cast<double>(proj.size() - 1);
  EXPECT_NEAR(var, 26.0, 0.15 * 26.0);
}

TEST(SyntheticTest, PlantedVisualTokensCopyTextualTokens) {
  SyntheticConfig cfg;
  cfg.n_benign = 2;
  cfg.n_malicious = 2;
  cfg.tokens_per_sample = 16;
  cfg.hidden_dim = 16;
  cfg.planted_token_pairs = 2;
  cfg.noise_scale = 0.01;
  cfg.seed = 3;
  const auto data = gen_synthetic(cfg);
  for (const auto* group : {&data.benign, &data.malicious}) {
    for (std::size_t i = 0; i < group->size(); i += 2) {
      const auto& vis = (*group)[i];
      const auto& txt = (*group)[i + 1];
      ASSERT_EQ(vis.modality, Modality::visual);
      ASSERT_EQ(txt.sample_id, vis.sample_id);
      const auto& planted = data.truth.planted.at(vis.sample_id);
      ASSERT_EQ(planted.visual.size(), 2u);
      EXPECT_NE(planted.visual[0], planted.visual[1]);
      for (std::size_t p = 0; p < 2; ++p) {
        const double gap = (vis.data.row(planted.visual[p]) - txt.data.row(planted.textual_source[p]))
                               .cast<double>()
                               .norm();
        EXPECT_LT(gap, 0.2);
      }
    }
  }
}

TEST(SyntheticTest, ZeroGainLeavesClassesIdenticalInLaw) {
  SyntheticConfig cfg;
  cfg.n_benign = 500;
  cfg.n_malicious = 500;
  cfg.tokens_per_sample = 4;
  cfg.hidden_dim = 8;
  cfg.planted_gain = 0.0;
  cfg.planted_token_pairs = 0;
  const auto data = gen_synthetic(cfg);
  auto second_moment = [](const std::vector<ActivationMatrix>& recs) {
    double total = 0.0;
    Eigen::Index count = 0;
    for (const auto& r : recs) {
      total += r.as_double().squaredNorm();
      count += r.data.size();
    }
    return total / static_cast<double>(count);
  };
  EXPECT_NEAR(second_moment(data.benign), 1.0, 0.03);
  EXPECT_NEAR(second_moment(data.malicious), 1.0, 0.03);
}

}  // namespace
}  // namespace actguard
