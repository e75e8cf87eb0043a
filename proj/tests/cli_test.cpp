// Copyright (c) the CFID Project Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Runs the installed command-line tool as a subprocess.

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdio>
#include <fstream>
#include <json.hpp>

#include "cfid/bundle.hpp"
#include "cfid/image_io.hpp"
#include "cfid/sweep.hpp"
#include "onnx_builder.hpp"
#include "test_support.hpp"

#ifndef CFID_CLI_PATH
#error "CFID_CLI_PATH must name the cfid executable"
#endif

namespace cfid {
namespace {

using testing::SyntheticPhotoSet;
using testing::TempDir;

struct RunResult {
  int exit_code = -1;
  std::string out;
};

RunResult RunCli(const std::string& args) {
  const std::string cmd = std::string(CFID_CLI_PATH) + " " + args + " 2>&1";
  RunResult r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (pipe == nullptr) return r;
  char buf[4096];
  while (std::fgets(buf, sizeof(buf), pipe) != nullptr) r.out += buf;
  const int status = pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string Q(const std::filesystem::path& p) { return "'" + p.string() + "'"; }

class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir();
    SaveImageSet(SyntheticPhotoSet(5, 40, 32, 1), dir_->path() / "a");
    SaveImageSet(SyntheticPhotoSet(5, 40, 32, 2), dir_->path() / "b");
  }
  static void TearDownTestSuite() {
    delete dir_;
    dir_ = nullptr;
  }
  static std::filesystem::path P(const std::string& name) { return dir_->path() / name; }
  static TempDir* dir_;
};

TempDir* CliTest::dir_ = nullptr;

// Low-rank mode keeps these runs fast; the dense default is covered by the
// acceptance suite.
constexpr char kToy[] = " --extractor toy --mode lowrank";

TEST_F(CliTest, ScoreIdenticalDirectories) {
  const RunResult r = RunCli("score " + Q(P("a")) + " " + Q(P("a")) + kToy + " --out " +
                          Q(P("same.json")));
  ASSERT_EQ(r.exit_code, 0) << r.out;
  EXPECT_NE(r.out.find("cfid_max="), std::string::npos);
  const nlohmann::json j = nlohmann::json::parse(std::ifstream(P("same.json")));
  EXPECT_LE(j["cfid_max"].get<double>(), 1e-6);
  EXPECT_EQ(j["extractor_id"], "toy-v1");
  EXPECT_EQ(j["levels"].size(), 3u);
}

TEST_F(CliTest, ExtractThenScoreBundles) {
  ASSERT_EQ(RunCli("extract " + Q(P("a")) + " --out " + Q(P("bundle_a")) + kToy).exit_code, 0);
  const RunResult e = RunCli("extract " + Q(P("b")) + " --out " + Q(P("bundle_b")) + kToy +
                          " --threads 2");
  ASSERT_EQ(e.exit_code, 0) << e.out;
  EXPECT_NE(e.out.find("MaxPool1 dim=341056 count=5"), std::string::npos) << e.out;
  EXPECT_TRUE(IsBundleDirectory(P("bundle_b")));

  const RunResult bundles = RunCli("score " + Q(P("bundle_a")) + " " + Q(P("bundle_b")));
  ASSERT_EQ(bundles.exit_code, 0) << bundles.out;
  const RunResult mixed = RunCli("score " + Q(P("bundle_a")) + " " + Q(P("b")) + kToy);
  ASSERT_EQ(mixed.exit_code, 0) << mixed.out;
  EXPECT_EQ(bundles.out, mixed.out);
}

TEST_F(CliTest, DistortWritesPngs) {
  const RunResult r = RunCli("distort " + Q(P("a")) +
                          " --kind spiral_warp --alpha 2 --center 10,12 --out " + Q(P("swirl")));
  ASSERT_EQ(r.exit_code, 0) << r.out;
  EXPECT_EQ(ListImageFiles(P("swirl")).size(), 5u);
  EXPECT_EQ(RunCli("distort " + Q(P("a")) + " --kind swirl --alpha 1 --center 10 --out " +
                Q(P("bad"))).exit_code,
            4);
}

TEST_F(CliTest, SweepWritesCsvAndJsonAndResumes) {
  const std::string base = "sweep " + Q(P("a")) + " --kind salt_pepper --alphas 0,0.1 --out " +
                           Q(P("sp.csv")) + kToy;
  const RunResult r = RunCli(base);
  ASSERT_EQ(r.exit_code, 0) << r.out;
  const std::vector<SweepRow> rows = ReadSweepCsv(P("sp.csv"));
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_LE(rows[0].cfid_max, 1e-6);
  EXPECT_TRUE(std::filesystem::exists(P("sp.json")));
  const RunResult resumed = RunCli(base + " --resume");
  ASSERT_EQ(resumed.exit_code, 0) << resumed.out;
  EXPECT_EQ(ReadSweepCsv(P("sp.csv")), rows);
}

TEST_F(CliTest, ExitCodes) {
  EXPECT_EQ(RunCli("score " + Q(P("missing")) + " " + Q(P("a")) + kToy).exit_code, 2);
  EXPECT_EQ(RunCli("score " + Q(P("a")) + " " + Q(P("a")) + " --extractor onnx --model " +
                Q(P("nope.onnx")))
                .exit_code,
            2);
  EXPECT_EQ(RunCli("score " + Q(P("a")) + " " + Q(P("a")) + " --extractor bogus").exit_code, 4);
  EXPECT_EQ(RunCli("sweep " + Q(P("a")) + " --kind warp --out x.csv").exit_code, 4);
  EXPECT_EQ(RunCli("sweep " + Q(P("a")) + " --kind blur --alphas 1,2 --out " + Q(P("x.csv")) + kToy)
                .exit_code,
            4);
  EXPECT_EQ(RunCli("frobnicate").exit_code, 4);
  EXPECT_EQ(RunCli("--version").exit_code, 0);

  const RunResult err = RunCli("score " + Q(P("missing")) + " " + Q(P("a")) + kToy);
  EXPECT_NE(err.out.find("cfid: error: IoError"), std::string::npos) << err.out;
}

TEST_F(CliTest, ForeignBundleIsCompatibilityError) {
  ASSERT_EQ(RunCli("extract " + Q(P("a")) + " --out " + Q(P("bundle_x")) + kToy).exit_code, 0);
  nlohmann::json m = nlohmann::json::parse(std::ifstream(P("bundle_x") / kBundleManifestName));
  m["extractor_id"] = "someone-else";
  std::ofstream(P("bundle_x") / kBundleManifestName) << m.dump();
  const RunResult r = RunCli("score " + Q(P("bundle_x")) + " " + Q(P("a")) + kToy);
  EXPECT_EQ(r.exit_code, 3) << r.out;
  EXPECT_NE(r.out.find("ExtractorMismatch"), std::string::npos);
}

TEST_F(CliTest, VerifyModelWithOnnxExtractor) {
  const auto mdir = P("model");
  testing::WriteModelDir(testing::MiniInception(), mdir);
  // Without a golden file the model loads but verification fails on I/O.
  EXPECT_EQ(RunCli("verify-model --model " + Q(mdir / "model.onnx")).exit_code, 2);
  EXPECT_EQ(RunCli("score " + Q(P("a")) + " " + Q(P("a")) + " --mode lowrank --model " +
                Q(mdir / "model.onnx"))
                .exit_code,
            0);
}

}  // namespace
}  // namespace cfid
