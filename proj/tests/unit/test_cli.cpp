// Copyright 2026 The PackSense Authors. All rights reserved.
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

#include <filesystem>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cli.hpp"
#include "packsense/checkpoint.hpp"
#include "packsense/corpus.hpp"
#include "packsense/lowentropy.hpp"

namespace packsense {
namespace {

namespace fs = std::filesystem;

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "packsense");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = fs::temp_directory_path() / ("packsense_cli_" + std::string(
                                                              ::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir);
    fs::create_directories(dir);
    Rng r(1);
    Bytes b(8192);
    for (auto& x : b) x = r.byte();
    sample = (dir / "sample.bin").string();
    write_file(sample, b);
  }
  void TearDown() override { fs::remove_all(dir); }
  void write_text(const std::string& path, const std::string& text) {
    write_file(path, ByteView(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
  }
  fs::path dir;
  std::string sample;
};

TEST_F(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"frobnicate"}).code, 2);
  EXPECT_EQ(run({"entropy-scan"}).code, 2);
  EXPECT_EQ(run({"entropy-scan", "--input", sample, "--granularity", "page"}).code, 2);
  EXPECT_EQ(run({"entropy-scan", "--input", sample, "--threshold", "9"}).code, 2);
  const auto r = run({"scan", "--input", sample});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("--model"), std::string::npos);
}

TEST_F(Cli, HelpExitsZero) { EXPECT_EQ(run({"--help"}).code, 0); }

TEST_F(Cli, OperationalErrorsExitOne) {
  EXPECT_EQ(run({"entropy-scan", "--input", (dir / "missing.bin").string()}).code, 1);
  // A checkpoint whose classifier was never fine-tuned cannot scan.
  checkpoint::Checkpoint ck;
  ck.config.layers = 1;
  ck.config.heads = 2;
  ck.config.d_model = 8;
  ck.config.d_ffn = 16;
  ck.config.vocab_size = static_cast<int>(normalizer::default_vocabulary().size());
  ck.vocab_hash = normalizer::default_vocabulary().hash();
  ck.params = encoder::init_params<float>(ck.config, 1);
  const auto model = (dir / "m.palm").string();
  checkpoint::save(model, ck);
  const auto r = run({"scan", "--model", model, "--input", sample});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("UntrainedModel"), std::string::npos);
}

TEST_F(Cli, EntropyScanJsonAndLogging) {
  const auto r = run({"entropy-scan", "--input", sample, "--granularity", "window", "--window", "1024"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["values"].size(), 8u);
  EXPECT_TRUE(j["verdict"]["packed"].get<bool>());
  for (const char* key : {"seed=", "config_hash=", "vocab_hash=", "checkpoint_hash="}) {
    EXPECT_NE(r.err.find(key), std::string::npos) << key;
  }
}

TEST_F(Cli, ConfigFileFillsUnsetFlagsOnly) {
  const auto cfg = (dir / "run.cfg").string();
  write_text(cfg, "# thresholds\ngranularity = window\nwindow=4096\nthreshold=7.9\n");
  auto r = run({"entropy-scan", "--config", cfg, "--input", sample, "--threshold", "7.5"});
  ASSERT_EQ(r.code, 0) << r.err;
  auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["granularity"], "window");
  EXPECT_EQ(j["window"], 4096);
  EXPECT_DOUBLE_EQ(j["threshold"].get<double>(), 7.5);

  write_text(cfg, "colour=blue\n");
  EXPECT_EQ(run({"entropy-scan", "--config", cfg, "--input", sample}).code, 2);
  write_text(cfg, "just words\n");
  EXPECT_EQ(run({"entropy-scan", "--config", cfg, "--input", sample}).code, 2);
  EXPECT_EQ(run({"entropy-scan", "--config", (dir / "none.cfg").string(), "--input", sample}).code, 2);
}

TEST_F(Cli, ConfigHashFollowsResolvedOptions) {
  auto hash_of = [](const std::string& err) {
    const auto p = err.find("config_hash=");
    return err.substr(p, 12 + 64);
  };
  const auto a = run({"entropy-scan", "--input", sample});
  const auto b = run({"entropy-scan", "--input", sample});
  const auto c = run({"entropy-scan", "--input", sample, "--threshold", "6.5"});
  EXPECT_EQ(hash_of(a.err), hash_of(b.err));
  EXPECT_NE(hash_of(a.err), hash_of(c.err));
}

TEST_F(Cli, GenAdversarialRoundTripsAndRecordsLineage) {
  const auto out = (dir / "enc.bin").string();
  auto r = run({"gen-adversarial", "--input", sample, "--out", out, "--scheme", "Encoding", "--alphabet", "base32"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_LE(j["entropy_after"].get<double>(), 5.0);
  EXPECT_EQ(lowentropy::invert_transform(read_file(out), j["metadata"]), read_file(sample));

  const auto corpus_dir = (dir / "corpus").string();
  ASSERT_EQ(run({"gen-corpus", "--out", corpus_dir, "--pretrain", "2", "--finetune", "3", "--test", "3"}).code, 0);
  const auto manifest = corpus_dir + "/manifest.jsonl";
  const auto parent = corpus_dir + "/" + corpus::read_manifest(manifest).entries.front().path;
  r = run({"gen-adversarial", "--input", parent, "--out", corpus_dir + "/test/derived.bin", "--scheme", "MonoSub",
           "--manifest", manifest, "--role", "Test"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto m = corpus::read_manifest(manifest);
  EXPECT_EQ(m.entries.size(), 9u);
  EXPECT_EQ(m.entries.back().parent_sha256, m.entries.front().sha256);
  EXPECT_FALSE(corpus::split_check(m).empty());  // Pretrain parent, Test child
}

}  // namespace
}  // namespace packsense
