// Copyright 2026 The Pctx Authors.
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

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "pctx/cli.hpp"
#include "pctx/pipeline.hpp"

namespace pctx {
namespace {

namespace fs = std::filesystem;

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() /
           (std::string("pctx_cli_") + info->name() + "_" +
            std::to_string(::getpid()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  int run(std::vector<std::string> args, const fs::path& out_dir) {
    args.insert(args.begin(), {"--out", out_dir.string()});
    out_.str("");
    err_.str("");
    return run_cli(args, out_, err_);
  }

  // Small corpus and codebooks keep the whole chain well under a second.
  int synth(const fs::path& out_dir) {
    return run({"--codebook-sizes", "8,8,8", "--beam", "20", "synth",
                "--users", "300", "--items", "60"},
               out_dir);
  }

  static std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  fs::path dir_;
  std::ostringstream out_, err_;
};

TEST_F(CliTest, FullChainWritesEveryArtifact) {
  const auto run_dir = dir_ / "run";
  ASSERT_EQ(synth(run_dir), kExitOk) << err_.str();
  for (const char* stage : {"build-tokenizer", "tokenize", "fit", "eval"}) {
    ASSERT_EQ(run({stage}, run_dir), kExitOk) << stage << ": " << err_.str();
  }
  EXPECT_NE(out_.str().find("recall@10"), std::string::npos);
  for (const char* f :
       {"interactions.tsv", "features.emb", "truth.tsv", "contexts.emb",
        "centroids.tsv", "codebooks.rq", "tokenizer.json", "registry.tsv",
        "sid_groups.tsv", "sid_stats.csv", "tokens.txt", "model.txt",
        "metrics.csv", "predictions.tsv", "config.resolved.json",
        "manifest.json"}) {
    EXPECT_TRUE(fs::exists(run_dir / f)) << f;
  }
  const auto manifest = nlohmann::json::parse(slurp(run_dir / "manifest.json"));
  EXPECT_EQ(manifest["stages"]["fit"]["artifacts"]["model.txt"],
            sha256_file((run_dir / "model.txt").string()));
  // Flags given to synth persist through the resolved config.
  const auto cfg =
      nlohmann::json::parse(slurp(run_dir / "config.resolved.json"));
  EXPECT_EQ(cfg["eval"]["beam_width"], 20);
  EXPECT_EQ(cfg["quantize"]["codebook_sizes"], nlohmann::json({8, 8, 8}));

  ASSERT_EQ(run({"analyze"}, run_dir), kExitOk) << err_.str();
  EXPECT_TRUE(fs::exists(run_dir / "popular_rate.csv"));
  ASSERT_EQ(run({"sweep", "--param", "gamma", "--values", "0,0.5"}, run_dir),
            kExitOk)
      << err_.str();
  EXPECT_TRUE(fs::exists(run_dir / "sweep.csv"));
}

TEST_F(CliTest, EvalBeforeFitNamesTheMissingStage) {
  const auto run_dir = dir_ / "run";
  ASSERT_EQ(synth(run_dir), kExitOk);
  ASSERT_EQ(run({"build-tokenizer"}, run_dir), kExitOk) << err_.str();
  EXPECT_EQ(run({"eval"}, run_dir), kExitMissing);
  EXPECT_NE(err_.str().find("model.txt"), std::string::npos);
  EXPECT_NE(err_.str().find("pctx fit"), std::string::npos);
}

TEST_F(CliTest, TokenizeWithoutDataNamesIngest) {
  EXPECT_EQ(run({"tokenize"}, dir_ / "empty"), kExitMissing);
  EXPECT_NE(err_.str().find("pctx ingest"), std::string::npos);
}

TEST_F(CliTest, InvalidValuesAreConfigErrors) {
  EXPECT_EQ(run({"--gamma", "1.5", "synth"}, dir_ / "r"), kExitConfig);
  EXPECT_NE(err_.str().find("gamma must lie in [0,1]"), std::string::npos);
  EXPECT_EQ(run({"--mode", "dynamic", "synth"}, dir_ / "r"), kExitConfig);
  EXPECT_EQ(run({"no-such-stage"}, dir_ / "r"), kExitConfig);
  EXPECT_EQ(run({}, dir_ / "r"), kExitConfig);
}

TEST_F(CliTest, BinaryReportsConfigExitCode) {
  const std::string cmd = std::string(PCTX_CLI_PATH) + " --out " +
                          (dir_ / "bin").string() +
                          " --gamma 2 synth > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  ASSERT_TRUE(WIFEXITED(status));
  EXPECT_EQ(WEXITSTATUS(status), kExitConfig);
}

TEST_F(CliTest, RerunReproducesArtifactsByteForByte) {
  for (const char* name : {"a", "b"}) {
    const auto run_dir = dir_ / name;
    ASSERT_EQ(synth(run_dir), kExitOk);
    for (const char* stage : {"build-tokenizer", "tokenize", "fit", "eval"}) {
      ASSERT_EQ(run({stage}, run_dir), kExitOk) << err_.str();
    }
  }
  for (const char* f : {"registry.tsv", "tokens.txt", "model.txt",
                        "metrics.csv", "tokenizer.json", "codebooks.rq"}) {
    EXPECT_EQ(sha256_file((dir_ / "a" / f).string()),
              sha256_file((dir_ / "b" / f).string()))
        << f;
  }
}

}  // namespace
}  // namespace pctx
