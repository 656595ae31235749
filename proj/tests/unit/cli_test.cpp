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

#include "cli.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "actguard/activation_store.hpp"
#include "actguard/subspace.hpp"
#include "test_util.hpp"

namespace actguard {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using testing::TempDir;
using testing::slurp;

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run_tool(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

// Restores ACTGUARD_SEED when a test is done with it.
class SeedEnv {
 public:
  SeedEnv() {
    if (const char* v = std::getenv(cli::kSeedEnvVar)) saved_ = v;
    unsetenv(cli::kSeedEnvVar);
  }
  ~SeedEnv() {
    if (saved_.empty()) {
      unsetenv(cli::kSeedEnvVar);
    } else {
      setenv(cli::kSeedEnvVar, saved_.c_str(), 1);
    }
  }
  void set(const std::string& v) { setenv(cli::kSeedEnvVar, v.c_str(), 1); }

 private:
  std::string saved_;
};

json read_json(const fs::path& file) { return json::parse(slurp(file)); }

std::vector<double> eigenvalues_of(const fs::path& subspace_dir) {
  return read_json(subspace_dir / "subspace.json").at("eigenvalues").get<std::vector<double>>();
}

TEST(CliTest, MissingRequiredOptionIsUsageError) {
  SeedEnv env;
  const Result r = run_tool({"synth", "--dim", "8"});
  EXPECT_EQ(r.code, cli::kExitUsage);
  EXPECT_NE(r.err.find("--out"), std::string::npos);
  EXPECT_EQ(run_tool({}).code, cli::kExitUsage);
  EXPECT_EQ(run_tool({"frobnicate"}).code, cli::kExitUsage);
}

TEST(CliTest, HelpAndFormatVersion) {
  EXPECT_EQ(run_tool({"--help"}).code, cli::kExitOk);
  const Result r = run_tool({"--format-version"});
  ASSERT_EQ(r.code, cli::kExitOk);
  const json j = json::parse(r.out);
  EXPECT_EQ(j.at("dump").get<int>(), DumpManifest::kSupportedVersion);
  EXPECT_EQ(j.at("subspace").get<int>(), kSubspaceFormatVersion);
}

TEST(CliTest, SynthIsDeterministicPerSeed) {
  SeedEnv env;
  TempDir a, b, c;
  const std::vector<std::string> common = {"--n-benign", "4", "--n-malicious", "4",
                                           "--tokens",   "8", "--dim",         "8"};
  auto synth = [&](const TempDir& dir, const std::string& seed) {
    std::vector<std::string> args = {"synth", "--out", dir.path().string(), "--seed", seed};
    args.insert(args.end(), common.begin(), common.end());
    return run_tool(args).code;
  };
  ASSERT_EQ(synth(a, "5"), cli::kExitOk);
  ASSERT_EQ(synth(b, "5"), cli::kExitOk);
  ASSERT_EQ(synth(c, "6"), cli::kExitOk);
  const std::string blob = "benign/benign_00000_textual.f32";
  EXPECT_EQ(slurp(a / blob), slurp(b / blob));
  EXPECT_NE(slurp(a / blob), slurp(c / blob));
  EXPECT_TRUE(fs::exists(a / "ground_truth.json"));
  EXPECT_EQ(read_dump(a / "malicious").records.size(), 8u);
}

TEST(CliTest, SynthRejectsPlantedDirsBeyondDim) {
  SeedEnv env;
  TempDir tmp;
  const Result r = run_tool(
      {"synth", "--out", tmp.path().string(), "--dim", "32", "--planted-dirs", "64"});
  EXPECT_EQ(r.code, cli::kExitUsage);
  EXPECT_NE(r.err.find("64"), std::string::npos);
  EXPECT_NE(r.err.find("32"), std::string::npos);
}

class FitPipelineTest : public ::testing::Test {
 protected:
  void synth(const std::vector<std::string>& extra) {
    std::vector<std::string> args = {"synth", "--out", data_.path().string(), "--seed", "11"};
    args.insert(args.end(), extra.begin(), extra.end());
    ASSERT_EQ(run_tool(args).code, cli::kExitOk);
  }
  Result fit(const std::string& benign, const std::string& malicious, const fs::path& out,
             const std::string& modality = "textual") {
    return run_tool({"fit", "--benign", (data_ / benign).string(), "--malicious",
                     (data_ / malicious).string(), "--modality", modality, "--out",
                     out.string()});
  }

  SeedEnv env_;
  TempDir data_;
  TempDir work_;
};

TEST_F(FitPipelineTest, PlantedSpikeDominatesSpectrum) {
  synth({"--dim", "32"});
  const Result r = fit("benign", "malicious", work_ / "sub");
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  EXPECT_NE(r.err.find("clamped to 31"), std::string::npos);
  const std::vector<double> lambda = eigenvalues_of(work_ / "sub");
  ASSERT_EQ(lambda.size(), 31u);
  EXPECT_GT(lambda[0], 10.0 * lambda[1]);
}

TEST_F(FitPipelineTest, NullAndSelfFitsStayNearOne) {
  synth({"--n-benign", "2000", "--n-malicious", "2000", "--tokens", "8", "--dim", "16",
         "--gain", "0"});
  ASSERT_EQ(fit("benign", "malicious", work_ / "null").code, cli::kExitOk);
  EXPECT_LE(eigenvalues_of(work_ / "null")[0], 1.5);
  ASSERT_EQ(fit("benign", "benign", work_ / "self").code, cli::kExitOk);
  EXPECT_LE(eigenvalues_of(work_ / "self")[0], 1.3);
}

TEST_F(FitPipelineTest, ProjectWithZeroBetaMapsBenignMeanToItsProjection) {
  synth({"--dim", "16"});
  ASSERT_EQ(fit("benign", "malicious", work_ / "sub", "visual").code, cli::kExitOk);
  const SafetySubspace sub = read_subspace(work_ / "sub");
  EXPECT_EQ(sub.modality, Modality::visual);

  const std::vector<float> mu(sub.benign_mean.data(),
                              sub.benign_mean.data() + sub.benign_mean.size());
  std::vector<float> input;
  for (float v : mu) input.push_back(static_cast<float>(v));
  write_f32(work_ / "mu.f32", input.data(), input.size());
  const Result r = run_tool({"project", "--subspace", (work_ / "sub").string(), "--input",
                             (work_ / "mu.f32").string(), "--output",
                             (work_ / "out.f32").string(), "--report",
                             (work_ / "report.json").string(), "--beta", "0"});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  const std::vector<float> out = read_f32(work_ / "out.f32");
  const Eigen::VectorXd expected = sub.project(sub.benign_mean);
  ASSERT_EQ(out.size(), static_cast<std::size_t>(expected.size()));
  for (std::size_t i = 0; i < out.size(); ++i) {
    EXPECT_NEAR(out[i], expected(static_cast<Eigen::Index>(i)), 1e-5);
  }
  EXPECT_TRUE(fs::exists(work_ / "report.json"));
}

TEST_F(FitPipelineTest, FuseWithIdentitySubspacesIsANoOp) {
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(4);
  write_subspace(SafetySubspace::identity(zero, Modality::visual, 0), work_ / "vis");
  write_subspace(SafetySubspace::identity(zero, Modality::textual, 0), work_ / "txt");
  const std::vector<float> input = {1.5f, -2.0f, 0.25f, 8.0f, 0.0f, 3.0f, -1.0f, 2.0f};
  write_f32(work_ / "in.f32", input.data(), input.size());
  const Result r = run_tool({"fuse", "--visual-subspace", (work_ / "vis").string(),
                             "--textual-subspace", (work_ / "txt").string(), "--input",
                             (work_ / "in.f32").string(), "--output",
                             (work_ / "out.f32").string(), "--report",
                             (work_ / "fuse.json").string()});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  EXPECT_EQ(read_f32(work_ / "out.f32"), input);
  const json report = read_json(work_ / "fuse.json");
  EXPECT_EQ(report.dump().find("w_vis") != std::string::npos, true);
}

TEST_F(FitPipelineTest, AttributeWritesScoresPerRecord) {
  synth({"--n-benign", "2", "--n-malicious", "2", "--dim", "8"});
  const Result r = run_tool({"attribute", "--dump", (data_ / "benign").string(), "--out",
                             (work_ / "attr.json").string()});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  const json j = read_json(work_ / "attr.json");
  const json& rec = j.at("records").at("benign_00000_visual");
  EXPECT_EQ(rec.at("mi").size(), 16u);
  EXPECT_EQ(rec.at("selected").size(), 2u);
}

TEST_F(FitPipelineTest, DiagnoseSingleLayer) {
  synth({"--n-benign", "20", "--n-malicious", "20", "--dim", "8", "--layer", "3"});
  const Result r = run_tool({"diagnose", "--benign", (data_ / "benign").string(), "--malicious",
                             (data_ / "malicious").string(), "--out",
                             (work_ / "diag.json").string()});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  EXPECT_EQ(read_json(work_ / "diag.json").at("selected_layer").get<int>(), 3);
}

TEST(CliTest, VerifyPassesOnCleanBuildAndCatchesMutation) {
  SeedEnv env;
  for (const char* seed : {"42", "43"}) {
    const Result r = run_tool({"verify", "--seed", seed});
    EXPECT_EQ(r.code, cli::kExitOk) << r.out;
    EXPECT_EQ(r.out.find("FAIL"), std::string::npos);
  }
  const Result m = run_tool({"verify", "--seed", "42", "--mutation", "skip-orthonormalization"});
  EXPECT_EQ(m.code, cli::kExitFailure);
  EXPECT_NE(m.out.find("FAIL projector.laws"), std::string::npos);
  EXPECT_NE(m.out.find("counterexample"), std::string::npos);
}

TEST(CliConfigTest, PrecedenceFlagsOverEnvOverFileOverDefaults) {
  SeedEnv env;
  TempDir tmp;
  std::ofstream(tmp / "cfg.json") << R"({"seed": 3, "beta": 1.25, "k_eigen": 7})";
  auto verify_seed = [&](std::vector<std::string> extra) {
    std::vector<std::string> args = {"verify", "--out", (tmp / "v.json").string()};
    args.insert(args.end(), extra.begin(), extra.end());
    run_tool(args);
    return read_json(tmp / "v.json").at("seed").get<std::uint64_t>();
  };
  EXPECT_EQ(verify_seed({}), 0u);
  EXPECT_EQ(verify_seed({"--config", (tmp / "cfg.json").string()}), 3u);
  env.set("9");
  EXPECT_EQ(verify_seed({"--config", (tmp / "cfg.json").string()}), 9u);
  EXPECT_EQ(verify_seed({"--config", (tmp / "cfg.json").string(), "--seed", "12"}), 12u);
  env.set("nope");
  EXPECT_EQ(run_tool({"verify"}).code, cli::kExitUsage);
}

TEST(CliConfigTest, FileValuesMergeAndUnknownKeysFail) {
  cli::ToolConfig cfg;
  cfg.merge(json{{"beta", 1.25}, {"k_eigen", 7}});
  EXPECT_EQ(cfg.beta, 1.25);
  EXPECT_EQ(cfg.k_eigen, 7);
  EXPECT_EQ(cfg.top_frac, 0.125);
  EXPECT_ANY_THROW(cfg.merge(json{{"bogus", 1}}));
  cli::ToolConfig bad;
  bad.top_frac = 0.0;
  EXPECT_ANY_THROW(bad.validate());

  SeedEnv env;
  TempDir tmp;
  std::ofstream(tmp / "cfg.json") << R"({"unknown_key": 1})";
  EXPECT_EQ(run_tool({"verify", "--config", (tmp / "cfg.json").string()}).code, cli::kExitUsage);
}

}  // namespace
}  // namespace actguard
