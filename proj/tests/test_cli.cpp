#include "cli.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "test_util.hpp"

#include <fstream>
#include <sstream>

using namespace layerlimit;
using nlohmann::json;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string data(const std::string& rel) { return test::data_path(rel); }

}  // namespace

TEST(Cli, CheckTheory) {
  const Result r = run({"--json", "check", "--theory", data("theories/dlo.theory")});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  EXPECT_TRUE(json::parse(r.out)["ok"].get<bool>());
}

TEST(Cli, CheckFormulaRedundancy) {
  const Result r =
      run({"--json", "check", "--theory", data("theories/dlo.theory"), "--formula", "Lt(x1,y)"});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  EXPECT_FALSE(json::parse(r.out)["formula"]["nonredundant"].get<bool>());
}

TEST(Cli, CheckFragment) {
  const Result r = run({"--json", "check", "--fragment", data("fragments/digraph.frag")});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  EXPECT_EQ(json::parse(r.out)["fragment"]["axioms"], 1);
}

TEST(Cli, ParseErrorIsJsonOnStderr) {
  const std::string path = ::testing::TempDir() + "bad.theory";
  {
    std::ofstream f(path);
    f << "rel E/2\nexists y : E(x,)\n";
  }
  const Result r = run({"check", "--theory", path});
  EXPECT_EQ(r.code, cli::kError);
  EXPECT_TRUE(r.out.empty());
  const json e = json::parse(r.err);
  EXPECT_EQ(e["error"], "parse");
  EXPECT_EQ(e["line"], 2);
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run({}).code, cli::kError);
  EXPECT_EQ(run({"sample", "--theory", data("theories/dlo.theory")}).code, cli::kError);
  const Result r = run({"check"});
  EXPECT_EQ(r.code, cli::kError);
  EXPECT_EQ(json::parse(r.err)["error"], "usage");
}

TEST(Cli, MissingFileIsIoError) {
  const Result r = run({"check", "--theory", "/nonexistent/x.theory"});
  EXPECT_EQ(r.code, cli::kError);
  EXPECT_TRUE(json::parse(r.err).contains("error"));
}

TEST(Cli, MorleyizeWithStructure) {
  const Result r = run({"--json", "morleyize", "--fragment", data("fragments/digraph.frag"), "--structure",
                        data("structures/p3.json")});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  const json j = json::parse(r.out);
  EXPECT_TRUE(j["verified"]["ok"].get<bool>());
  EXPECT_FALSE(j["theory"].get<std::string>().empty());
}

TEST(Cli, DclOnStructures) {
  const Result p3 = run({"--json", "dcl", "--structure", data("structures/p3.json")});
  ASSERT_EQ(p3.code, cli::kOk) << p3.err;
  EXPECT_EQ(json::parse(p3.out)["findings"][0]["witness"]["closure"], json::array({1}));
  const Result c4 = run({"--json", "dcl", "--structure", data("structures/c4.json")});
  ASSERT_EQ(c4.code, cli::kOk) << c4.err;
  EXPECT_EQ(json::parse(c4.out)["findings"][0]["witness"]["closure"], json::array());
}

TEST(Cli, DclFormulaOnUniqueRedPoint) {
  const Result r = run({"--json", "dcl", "--theory", data("theories/unique_red_point.theory"), "--formula",
                        "Red(y)", "--bound", "3"});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  const json j = json::parse(r.out);
  EXPECT_EQ(j["findings"].back()["verdict"], "violation");
}

TEST(Cli, BuildAndValidate) {
  const Result r = run({"--json", "build", "--theory", data("theories/dlo.theory"), "--oracle", "dlo", "--stages",
                        "12", "--validate", "--seed", "1"});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  const json j = json::parse(r.out);
  EXPECT_EQ(j["levels"].size(), 13u);
  EXPECT_TRUE(j.contains("validation"));
}

TEST(Cli, BuildRefusesUniqueWitness) {
  const Result r =
      run({"--json", "build", "--theory", data("theories/unique_red_point.theory"), "--oracle", "pureset"});
  EXPECT_EQ(r.code, cli::kRefused);
  EXPECT_EQ(json::parse(r.out)["label"], "bounded evidence");
}

TEST(Cli, SampleZeroPointsIsEmpty) {
  const Result r = run({"--json", "sample", "--theory", data("theories/dlo.theory"), "--oracle", "dlo", "--points",
                        "0", "--seed", "3"});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  EXPECT_EQ(json::parse(r.out)["size"], 0);
}

TEST(Cli, SampleIsByteIdenticalUnderSeed) {
  const std::vector<std::string> args{"--json", "sample", "--theory", data("theories/rado.theory"), "--oracle",
                                      "rado",   "--points", "6", "--seed", "17"};
  const Result a = run(args);
  const Result b = run(args);
  ASSERT_EQ(a.code, cli::kOk) << a.err;
  EXPECT_EQ(a.out, b.out);
  EXPECT_EQ(json::parse(a.out)["size"], 6);
}

TEST(Cli, SampleWritesFile) {
  const std::string path = ::testing::TempDir() + "sample.json";
  const Result r = run({"--json", "sample", "--theory", data("theories/dlo.theory"), "--oracle", "dlo", "--points",
                        "3", "--seed", "3", "--out", path});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  EXPECT_EQ(json::parse(r.out)["written"], path);
  std::ifstream f(path);
  EXPECT_EQ(json::parse(f)["size"], 3);
}

TEST(Cli, Stats) {
  const std::vector<std::string> args{"--json",  "stats",     "--theory", data("theories/rado.theory"),
                                      "--oracle", "rado",     "--patterns", data("structures/graph_patterns.json"),
                                      "--samples", "2000",    "--stages", "12", "--seed", "4"};
  const Result a = run(args);
  ASSERT_EQ(a.code, cli::kOk) << a.err;
  const json j = json::parse(a.out);
  EXPECT_EQ(j["patterns"].size(), 4u);
  EXPECT_TRUE(j["monotone_ok"].is_boolean());
  EXPECT_EQ(run(args).out, a.out);
}

TEST(Cli, ClassifyDloSamples) {
  const Result r = run({"--json", "classify", "--theory", data("theories/dlo.theory"), "--oracle", "dlo",
                        "--points", "4", "--seed", "2"});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  const json j = json::parse(r.out);
  EXPECT_EQ(j["verdict"], "sampled");
  EXPECT_EQ(j["structure"]["size"], 4);
}

TEST(Cli, ClassifyRefusesWithReplayableWitness) {
  const std::string theory = data("theories/unique_red_point.theory");
  const Result r = run({"--json", "classify", "--theory", theory, "--oracle", "pureset", "--bound", "3", "--seed", "2"});
  ASSERT_EQ(r.code, cli::kRefused) << r.err;
  const json j = json::parse(r.out);
  EXPECT_EQ(j["label"], "bounded evidence");
  const std::string replay = j["replay"];
  EXPECT_NE(replay.find("--formula"), std::string::npos);
  // Replaying the recorded dcl command reproduces the violation.
  const std::string formula = replay.substr(replay.find('\'') + 1, replay.rfind('\'') - replay.find('\'') - 1);
  const Result again =
      run({"--json", "dcl", "--theory", theory, "--formula", formula, "--bound", "3"});
  ASSERT_EQ(again.code, cli::kOk) << again.err;
  EXPECT_EQ(json::parse(again.out)["findings"].back()["verdict"], "violation");
}

TEST(Cli, HumanReadableDefault) {
  const Result r = run({"check", "--theory", data("theories/dlo.theory")});
  ASSERT_EQ(r.code, cli::kOk);
  EXPECT_NE(r.out.find("ok"), std::string::npos);
}
