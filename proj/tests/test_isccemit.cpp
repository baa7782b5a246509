// Copyright (c) raceset contributors.
// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "raceset/depcheck.hpp"
#include "raceset/iscc_emit.hpp"
#include "raceset/model_text.hpp"
#include "raceset/oracle.hpp"

using namespace raceset;

namespace {

std::string fixture(const std::string& name) {
  const char* dir = std::getenv("RACESET_FIXTURES");
  REQUIRE(dir != nullptr);
  return std::string(dir) + "/" + name;
}

std::string golden(const std::string& name) {
  const char* dir = std::getenv("RACESET_GOLDEN");
  REQUIRE(dir != nullptr);
  std::ifstream in(std::string(dir) + "/" + name);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("polyp emission matches the committed golden byte for byte") {
  KernelModel m = load_model_file(fixture("polyp.model"));
  IsccScript s1 = emit_iscc(m);
  IsccScript s2 = emit_iscc(m);
  CHECK(s1.text == s2.text);  // deterministic across runs
  CHECK(s1.text == golden("polyp.iscc"));
  CHECK(s1.domain.find("S[k]") != std::string::npos);
  CHECK(s1.domain.find("T[i, j]") != std::string::npos);
  CHECK(s1.read.find("* Domain") != std::string::npos);
}

TEST_CASE("gespmm emission matches its golden and declares the paper symbols") {
  KernelModel m = load_model_file(fixture("gespmm_alg2.model"));
  IsccScript s = emit_iscc(m);
  CHECK(s.text == golden("gespmm.iscc"));
  for (const char* sym : {"M", "N", "K", "A_S"}) {
    INFO(sym);
    CHECK(s.domain.find(std::string("[A_S, K, M, N")) != std::string::npos);
    CHECK(s.domain.substr(0, s.domain.find('{')).find(sym) != std::string::npos);
  }
  // superset parameters gate the iterator
  CHECK(s.domain.find("ptr >= rs") != std::string::npos);
  CHECK(s.domain.find("re >= ptr + 1") != std::string::npos);
}

TEST_CASE("an empty model emits empty sections") {
  KernelModel m;
  m.name = "void";
  IsccScript s = emit_iscc(m);
  CHECK(s.domain == "Domain := { };\n");
  CHECK(s.read == "Read := { };\n");
  CHECK(s.write == "Write := { };\n");
}

TEST_CASE("emitted constraint text round-trips through the model-text parser") {
  KernelModel m = load_model_file(fixture("gespmm_alg2.model"));
  std::set<std::string> params(m.params.begin(), m.params.end());
  EnumBox box(-3, 6);
  for (const auto& st : m.statements) {
    // Rebuild the domain from its rendered constraints and compare as sets.
    std::vector<Constraint> cs = st.domain.disjuncts().front().constraints;
    std::string text = render_constraints(cs);
    std::set<std::string> dims(st.domain.dims().begin(), st.domain.dims().end());
    std::vector<Constraint> reparsed = parse_constraint_text(text, dims, params);
    IntSet rebuilt(st.label, st.domain.dims(), m.params);
    rebuilt.add_constraints(std::move(reparsed));
    std::map<std::string, int64_t> vals = {{"M", 3},  {"N", 4},  {"K", 4}, {"A_S", 5},
                                           {"rs", 0}, {"re", 4}, {"kb", 1}};
    CHECK(equal_on_box(st.domain.substitute_params(vals), rebuilt.substitute_params(vals), box));
  }
}

TEST_CASE("dumped model text reloads to an equivalent model") {
  KernelModel m = load_model_file(fixture("polyp.model"));
  std::string dumped = render_model_text(m);
  KernelModel back = parse_model_text(dumped);
  REQUIRE(back.statements.size() == m.statements.size());
  EnumBox box(-2, 6);
  std::map<std::string, int64_t> vals = {{"n", 4}};
  for (size_t i = 0; i < m.statements.size(); ++i) {
    CHECK(equal_on_box(m.statements[i].domain.substitute_params(vals),
                       back.statements[i].domain.substitute_params(vals), box));
    REQUIRE(back.statements[i].reads.size() == m.statements[i].reads.size());
    REQUIRE(back.statements[i].writes.size() == m.statements[i].writes.size());
    for (size_t a = 0; a < m.statements[i].writes.size(); ++a) {
      CHECK(equal_on_box(
          m.statements[i].writes[a].rel.substitute_params(vals).as_set(),
          back.statements[i].writes[a].rel.substitute_params(vals).as_set(), box));
    }
  }
}

TEST_CASE("report text carries the verdict token exactly once") {
  KernelModel m = load_model_file(fixture("polyp.model"));
  DependenceReport r = races(m);
  std::string text = emit_report_text(r);
  size_t first = text.find("RACE-FREE");
  REQUIRE(first != std::string::npos);
  CHECK(text.find("RACE-FREE", first + 1) == std::string::npos);
}

TEST_CASE("race reports carry one witness line per race") {
  KernelModel m = load_model_file(fixture("gespmm_nobarrier.model"));
  DependenceReport r = races(m);
  REQUIRE(r.verdict == RaceVerdict::RaceFound);
  std::string text = emit_report_text(r);
  CHECK(text.find("RACE-FOUND") != std::string::npos);
  size_t lines = 0;
  for (size_t p = text.find("~"); p != std::string::npos; p = text.find("~", p + 1)) ++lines;
  CHECK(lines >= r.race_witnesses.size());
}

TEST_CASE("inconclusive reasons are preserved verbatim") {
  DependenceReport r;
  r.verdict = RaceVerdict::Inconclusive;
  r.inconclusive_reasons = {"RaW W1->W2 on X: no witness under sampled parameters (n)"};
  std::string text = emit_report_text(r);
  CHECK(text.find(r.inconclusive_reasons[0]) != std::string::npos);
}
