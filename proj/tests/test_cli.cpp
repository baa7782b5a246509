// Copyright (c) raceset contributors.
// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <vector>

#include "raceset/cli.hpp"

using namespace raceset;

namespace {

std::string fixture(const std::string& name) {
  const char* dir = std::getenv("RACESET_FIXTURES");
  REQUIRE(dir != nullptr);
  return std::string(dir) + "/" + name;
}

struct CliResult {
  int code;
  std::string out, err;
};

CliResult cli(std::vector<std::string> argv) {
  argv.insert(argv.begin(), "raceset");
  std::vector<const char*> raw;
  for (const auto& a : argv) raw.push_back(a.c_str());
  std::ostringstream out, err;
  int code = run_cli(static_cast<int>(raw.size()), raw.data(), out, err);
  return CliResult{code, out.str(), err.str()};
}

const std::string kGrid = "2,1,1/4,1,1";
const std::string kSections = "init:I,do_fetch:F,accum:T";

}  // namespace

TEST_CASE("check: the barriered gespmm mini-IR is race-free with exit 0") {
  CliResult r = cli({"check", fixture("gespmm_alg2.mir"), "--grid", kGrid, "--sections",
                     kSections});
  CHECK(r.code == 0);
  CHECK(r.out.find("RACE-FREE") != std::string::npos);
  CHECK(r.err.empty());
}

TEST_CASE("check: the unbarriered variant exits 1 with a witness") {
  CliResult r = cli({"check", fixture("gespmm_nobarrier.mir"), "--grid", kGrid, "--sections",
                     kSections});
  CHECK(r.code == 1);
  CHECK(r.out.find("RACE-FOUND") != std::string::npos);
  CHECK(r.out.find("sm_") != std::string::npos);
}

TEST_CASE("check: missing input files are diagnosed on stderr with exit > 2") {
  CliResult r = cli({"check", "missing.mir"});
  CHECK(r.code > 2);
  CHECK(r.out.empty());
  CHECK(r.err.find("missing.mir") != std::string::npos);
}

TEST_CASE("check: structured reports parse as json with stable fields") {
  CliResult r = cli({"check", fixture("gespmm_nobarrier.model"), "--format", "structured"});
  CHECK(r.code == 1);
  nlohmann::json j = nlohmann::json::parse(r.out);
  CHECK(j["verdict"] == "RACE-FOUND");
  REQUIRE(!j["races"].empty());
  for (const auto& e : j["races"]) {
    CHECK(e.contains("kind"));
    CHECK(e.contains("source"));
    CHECK(e.contains("target"));
    CHECK(e.contains("cell"));
    CHECK(e.contains("verdict"));
    CHECK(e.contains("witness"));
  }
}

TEST_CASE("check: dependence mode reports all three kinds") {
  CliResult r = cli({"check", fixture("polyp.model"), "--mode", "dep"});
  CHECK(r.code == 0);
  CHECK(r.out.find("RaW") != std::string::npos);
  CHECK(r.out.find("WaW") != std::string::npos);
  CHECK(r.out.find("WaR") != std::string::npos);
}

TEST_CASE("emit-iscc writes the golden script") {
  CliResult r = cli({"emit-iscc", fixture("polyp.model")});
  CHECK(r.code == 0);
  CHECK(r.out.find("Domain := [n] -> {") != std::string::npos);
  CHECK(r.out.find("\"WaR dependences:\"; WaR;") != std::string::npos);
}

TEST_CASE("oracle: verdicts and exit codes from concrete runs") {
  CliResult ok = cli({"oracle", fixture("gespmm_alg2.mir"), fixture("gespmm_small.inst")});
  CHECK(ok.code == 0);
  CHECK(ok.out.find("RACE-FREE") != std::string::npos);

  CliResult bad = cli({"oracle", fixture("gespmm_nobarrier.mir"), fixture("gespmm_small.inst")});
  CHECK(bad.code == 1);
  CHECK(bad.out.find("RACE-FOUND") != std::string::npos);
  CHECK(bad.out.find("sm_") != std::string::npos);
}

TEST_CASE("dump-model extracts I/F/T and round-trips through check") {
  CliResult r = cli({"dump-model", fixture("gespmm_alg2.mir"), "--grid", kGrid, "--sections",
                     kSections});
  CHECK(r.code == 0);
  CHECK(r.out.find("statement I") != std::string::npos);
  CHECK(r.out.find("statement F") != std::string::npos);
  CHECK(r.out.find("statement T") != std::string::npos);

  // The dumped text is itself a checkable model with the same verdict.
  std::string tmp = std::string(std::getenv("RACESET_FIXTURES")) + "/../build/dumped.model";
  CliResult w = cli({"dump-model", fixture("gespmm_alg2.mir"), "--grid", kGrid, "--sections",
                     kSections, "--out", tmp});
  REQUIRE(w.code == 0);
  CliResult chk = cli({"check", tmp});
  CHECK(chk.code == 0);
}

TEST_CASE("an empty kernel dumps an empty model") {
  std::string tmp = std::string(std::getenv("RACESET_FIXTURES")) + "/../build/empty.mir";
  {
    std::ofstream f(tmp);
    f << "kernel @nop() {\n}\n";
  }
  CliResult r = cli({"dump-model", tmp});
  CHECK(r.code == 0);
  CHECK(r.out.find("statement") == std::string::npos);
}

TEST_CASE("check: undecidable conflicts exit 2") {
  std::string tmp = std::string(std::getenv("RACESET_FIXTURES")) + "/../build/sampled.model";
  {
    std::ofstream f(tmp);
    f << R"(model sampled
params n
bounds n 1 20
array X f32 global [*]
grid blocks 1, 1, 1 threads 4, 1, 1
bind t = thread.x
statement W1
  domain [t] :
  write X[3*t]
statement W2
  domain [t] : t = 0
  write X[n]
schedule W1 = [0, 0]
schedule W2 = [0, 1]
)";
  }
  CliResult r = cli({"check", tmp});
  CHECK(r.code == 2);
  CHECK(r.out.find("INCONCLUSIVE") != std::string::npos);
  CHECK(r.out.find("no witness under sampled parameters") != std::string::npos);
}
