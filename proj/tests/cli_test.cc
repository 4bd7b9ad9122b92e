// Copyright 2026 The ipmon Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "cli.h"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "ipmon/records.h"

namespace ipmon::cli {
namespace {

namespace fs = std::filesystem;

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result RunCli(std::vector<std::string> args, const std::string& stdin_text = "") {
  std::istringstream in(stdin_text);
  std::ostringstream out, err;
  const int code = Run(args, in, out, err);
  return {code, out.str(), err.str()};
}

std::string Slurp(const fs::path& p) {
  std::ifstream f(p);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::path(::testing::TempDir()) /
           ("ipmon_cli_" + std::string(::testing::UnitTest::GetInstance()
                                           ->current_test_info()
                                           ->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string P(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

TEST_F(CliTest, NoArgumentsIsAUsageError) {
  const Result r = RunCli({});
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_NE(r.err.find("--help"), std::string::npos);
}

TEST_F(CliTest, HelpExitsZero) {
  const Result r = RunCli({"--help"});
  EXPECT_EQ(r.code, kExitOk);
  EXPECT_NE(r.out.find("simulate"), std::string::npos);
  EXPECT_EQ(RunCli({"detect", "--help"}).code, kExitOk);
}

TEST_F(CliTest, UnknownFlagIsAUsageError) {
  EXPECT_EQ(RunCli({"detect", "--frobnicate"}).code, kExitUsage);
  EXPECT_EQ(RunCli({"report", "x", "--format", "xml"}).code, kExitUsage);
}

TEST_F(CliTest, ScenariosListsAllBuiltins) {
  const Result r = RunCli({"scenarios"});
  EXPECT_EQ(r.code, kExitOk);
  for (const char* n : {"s1-mild-internal", "s2-multi-internal", "s3-external",
                        "s4-heavy-internal", "nsp-incident"}) {
    EXPECT_NE(r.out.find(n), std::string::npos) << n;
  }
  const Result j = RunCli({"scenarios", "--format", "json"});
  EXPECT_EQ(j.code, kExitOk);
  EXPECT_EQ(j.out.front(), '[');
}

TEST_F(CliTest, UnknownScenarioListsValidNames) {
  const Result r = RunCli({"simulate", "s9", "-o", P("t.jsonl")});
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_NE(r.err.find("unknown scenario 's9'"), std::string::npos);
  EXPECT_NE(r.err.find("nsp-incident"), std::string::npos);
}

TEST_F(CliTest, SimulateWritesTraceAndTruth) {
  const Result r =
      RunCli({"simulate", "s1-mild-internal", "--seed", "3", "-o", P("t.jsonl")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_TRUE(fs::exists(P("t.jsonl.truth.json")));
  std::istringstream trace(Slurp(P("t.jsonl")));
  std::size_t lines = 0;
  ForEachLine(trace, [&](std::string_view l, std::size_t) {
    DecodeEvent(l);
    ++lines;
  });
  EXPECT_GT(lines, 1000u);
  // Explicit seeds are not echoed.
  EXPECT_EQ(r.err.find("seed: "), std::string::npos);
}

TEST_F(CliTest, SimulateWithoutSeedReportsTheDerivedSeed) {
  const Result r = RunCli({"simulate", "s2-multi-internal", "-o", P("t.jsonl")});
  ASSERT_EQ(r.code, kExitOk);
  const auto pos = r.err.find("seed: ");
  ASSERT_NE(pos, std::string::npos);
  const std::string seed =
      r.err.substr(pos + 6, r.err.find('\n', pos) - pos - 6);
  ASSERT_EQ(RunCli({"simulate", "s2-multi-internal", "--seed", seed, "-o",
                    P("u.jsonl")})
                .code,
            kExitOk);
  EXPECT_EQ(Slurp(P("t.jsonl")), Slurp(P("u.jsonl")));
}

TEST_F(CliTest, SimulateFromScenarioFile) {
  std::ofstream(P("s.json"))
      << R"({"name":"tiny","duration_ms":30000,"profile":{"seed":5},)"
      << R"("windows":[{"start_ms":10000,"end_ms":20000,"targets":["d2"],)"
      << R"("delay_multiplier":3}]})";
  const Result r = RunCli({"simulate", P("s.json"), "-o", P("t.jsonl")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(r.err.find("seed: "), std::string::npos);
  const Result bad = RunCli({"simulate", P("t.jsonl"), "-o", P("x.jsonl")});
  EXPECT_NE(bad.code, kExitOk);
}

TEST_F(CliTest, DetectThenReport) {
  ASSERT_EQ(RunCli({"simulate", "s3-external", "--seed", "1", "-o",
                    P("t.jsonl")})
                .code,
            kExitOk);
  const Result d = RunCli({"detect", P("t.jsonl"), "--truth",
                           P("t.jsonl.truth.json"), "-o", P("v.jsonl"),
                           "--scores", P("s.jsonl"), "--summary", P("sum.json")});
  ASSERT_EQ(d.code, kExitOk) << d.err;
  EXPECT_NE(d.out.find("episodes:"), std::string::npos);
  EXPECT_FALSE(Slurp(P("s.jsonl")).empty());
  EXPECT_NE(Slurp(P("sum.json")).find("\"windows\""), std::string::npos);

  const Result text = RunCli({"report", P("v.jsonl")});
  ASSERT_EQ(text.code, kExitOk) << text.err;
  EXPECT_NE(text.out.find("verdicts (* = labeled anomalous)"), std::string::npos);
  EXPECT_NE(text.out.find("external"), std::string::npos);

  const Result csv = RunCli({"report", P("v.jsonl"), "--format", "csv"});
  ASSERT_EQ(csv.code, kExitOk);
  EXPECT_EQ(csv.out.rfind("tau_ms,pattern,a_d1,", 0), 0u);

  const Result json = RunCli({"report", "-", "--format", "json"},
                             Slurp(P("v.jsonl")));
  EXPECT_EQ(json.code, kExitOk);
}

TEST_F(CliTest, DetectReadsStdin) {
  ASSERT_EQ(RunCli({"simulate", "s1-mild-internal", "--seed", "1", "-o",
                    P("t.jsonl")})
                .code,
            kExitOk);
  const Result r = RunCli({"detect", "-", "-o", "-"}, Slurp(P("t.jsonl")));
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(r.out.rfind("{\"tau_ms\":", 0), 0u);
  EXPECT_NE(r.err.find("episodes:"), std::string::npos);
}

TEST_F(CliTest, MalformedTraceIsADataError) {
  std::ofstream(P("bad.jsonl")) << "{\"tx_id\":\"A\"}\n";
  const Result r = RunCli({"detect", P("bad.jsonl"), "-o", P("v.jsonl")});
  EXPECT_EQ(r.code, kExitData);
  EXPECT_NE(r.err.find("line 1"), std::string::npos);
}

TEST_F(CliTest, MissingFileIsADataError) {
  EXPECT_EQ(RunCli({"detect", P("nope.jsonl")}).code, kExitData);
  EXPECT_EQ(RunCli({"report", P("nope.jsonl")}).code, kExitData);
}

TEST_F(CliTest, InvalidFlagValuesAreUsageErrors) {
  EXPECT_EQ(RunCli({"detect", "--theta-v", "1.5", "--show-config"}).code,
            kExitUsage);
  EXPECT_EQ(RunCli({"detect", "--eta-ms", "0", "--show-config"}).code,
            kExitUsage);
  EXPECT_EQ(RunCli({"detect", "--agg", "mode"}).code, kExitUsage);
}

TEST_F(CliTest, ShowConfigAppliesFileThenFlags) {
  std::ofstream(P("c.json")) << R"({"aggregation":{"eta_ms":2000}})";
  const Result r = RunCli(
      {"detect", "--config", P("c.json"), "--theta-v", "0.3", "--show-config"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.out.find("\"eta_ms\": 2000"), std::string::npos);
  EXPECT_NE(r.out.find("\"v\": 0.3"), std::string::npos);
  std::ofstream(P("bad.json")) << R"({"aggregation":{"eta":2000}})";
  EXPECT_EQ(RunCli({"detect", "--config", P("bad.json"), "--show-config"}).code,
            kExitData);
}

TEST_F(CliTest, ReplayIsDeterministic) {
  const Result a = RunCli({"replay", "s2-multi-internal", "-o", P("a.jsonl")});
  const Result b = RunCli({"replay", "s2-multi-internal", "-o", P("b.jsonl"),
                           "--threaded"});
  ASSERT_EQ(a.code, kExitOk) << a.err;
  ASSERT_EQ(b.code, kExitOk) << b.err;
  EXPECT_EQ(Slurp(P("a.jsonl")), Slurp(P("b.jsonl")));
  EXPECT_EQ(RunCli({"replay", "s7"}).code, kExitUsage);
}

TEST_F(CliTest, MalformedVerdictIsADataError) {
  const Result r = RunCli({"report", "-"}, "{}\n");
  EXPECT_EQ(r.code, kExitData);
  EXPECT_NE(r.err.find("line 1"), std::string::npos);
}

}  // namespace
}  // namespace ipmon::cli
