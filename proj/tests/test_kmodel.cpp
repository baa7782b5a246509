// Copyright (c) raceset contributors.
// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>

#include "raceset/kernel_model.hpp"
#include "raceset/model_text.hpp"
#include "raceset/oracle.hpp"

using namespace raceset;

namespace {

std::string fixture(const std::string& name) {
  const char* dir = std::getenv("RACESET_FIXTURES");
  REQUIRE(dir != nullptr);
  return std::string(dir) + "/" + name;
}

const std::map<std::string, int64_t> kSmall = {{"M", 4},  {"N", 4},  {"K", 4}, {"A_S", 6},
                                               {"rs", 0}, {"re", 2}, {"kb", 0}};

}  // namespace

TEST_CASE("polyp build_domain produces the two labeled spaces") {
  KernelModel m = load_model_file(fixture("polyp.model"));
  SetCollection dom = build_domain(m);
  REQUIRE(dom.find("S") != nullptr);
  REQUIRE(dom.find("T") != nullptr);

  IntSet s4 = dom.find("S")->substitute_params({{"n", 4}});
  CHECK(enumerate_set(s4, EnumBox{}) ==
        std::vector<std::vector<int64_t>>{{0}, {1}, {2}, {3}});
  IntSet t2 = dom.find("T")->substitute_params({{"n", 2}});
  CHECK(enumerate_set(t2, EnumBox{}).size() == 4);
}

TEST_CASE("gespmm build_domain carries the superset iterator bounds") {
  KernelModel m = load_model_file(fixture("gespmm_alg2.model"));
  SetCollection dom = build_domain(m);
  REQUIRE(dom.find("F") != nullptr);
  // ptr ranges over [rs, re) stepping 4 from rs: at rs=0, re=2 only ptr=0.
  IntSet f = dom.find("F")->substitute_params(kSmall);
  auto pts = enumerate_set(f, EnumBox{0, 8});
  for (const auto& p : pts) {
    int64_t ptr = p[4];
    CHECK(ptr == 0);           // rs + 4q below re=2 only at q=0
    CHECK(p[3] == 0);          // q
    CHECK(p[2] + ptr < 2);     // fetch guard ptr + tx < re
  }
  CHECK(!pts.empty());
  // Symbolic emptiness of the full domain is a witness question, not empty.
  CHECK(is_empty(*dom.find("F")).nonempty());
}

TEST_CASE("empty model yields an empty keyed collection") {
  KernelModel m;
  m.name = "empty";
  SetCollection dom = build_domain(m);
  CHECK(dom.empty());
}

TEST_CASE("polyp read and write access relations have the listing shapes") {
  KernelModel m = load_model_file(fixture("polyp.model"));
  auto reads = build_access(m, AccessKind::Read);
  auto writes = build_access(m, AccessKind::Write);

  // {T[i,j] -> A[i]} * Domain
  REQUIRE(reads.count({"T", "A"}));
  IntRel ta = reads.at({"T", "A"}).substitute_params({{"n", 3}});
  for (int64_t i = 0; i < 3; ++i)
    for (int64_t j = 0; j < 3; ++j) {
      CHECK(ta.contains({i, j}, {i}));
      CHECK(!ta.contains({i, j}, {i + 1}));
    }
  CHECK(!ta.contains({3, 0}, {3}));  // outside the domain after factoring

  // {T[i,j] -> B[j]} and {S[k] -> C[k,k]}
  REQUIRE(reads.count({"T", "B"}));
  REQUIRE(writes.count({"S", "C"}));
  IntRel sc = writes.at({"S", "C"}).substitute_params({{"n", 3}});
  CHECK(sc.contains({1}, {1, 1}));
  CHECK(!sc.contains({1}, {1, 2}));

  // S reads nothing: absent key.
  CHECK(reads.count({"S", "A"}) == 0);
  CHECK(reads.count({"S", "C"}) == 0);
}

TEST_CASE("happens_before orders same-thread loop iterations") {
  KernelModel m = load_model_file(fixture("polyp.model"));
  const Statement* t = m.find_statement("T");
  REQUIRE(t != nullptr);
  IntRel hb = happens_before(m, *t, *t).substitute_params({{"n", 4}});
  CHECK(hb.contains({0, 0}, {0, 1}));  // consecutive iterations
  CHECK(hb.contains({0, 3}, {1, 0}));
  CHECK(!hb.contains({0, 1}, {0, 0}));
  CHECK(!hb.contains({2, 2}, {2, 2}));  // irreflexive
}

TEST_CASE("a barrier orders cross-thread F writes before T reads") {
  KernelModel m = load_model_file(fixture("gespmm_alg2.model"));
  const Statement* f = m.find_statement("F");
  const Statement* t = m.find_statement("T");
  IntRel hb = happens_before(m, *f, *t).substitute_params(kSmall);
  // F(i=0,by=0,tx=0,q=0,ptr=0) before T(i=0,by=0,tx=1,q=0,ptr=0,kk=0):
  // different threads, same block, phase 0 < 1.
  CHECK(hb.contains({0, 0, 0, 0, 0}, {0, 0, 1, 0, 0, 0}));
  // Distinct blocks are never ordered.
  CHECK(!hb.contains({0, 0, 0, 0, 0}, {1, 0, 1, 0, 0, 0}));
}

TEST_CASE("removing the barrier leaves the cross-thread pair unordered") {
  KernelModel m = load_model_file(fixture("gespmm_nobarrier.model"));
  const Statement* f = m.find_statement("F");
  const Statement* t = m.find_statement("T");
  IntRel fwd = happens_before(m, *f, *t).substitute_params(kSmall);
  IntRel bwd = happens_before(m, *t, *f).substitute_params(kSmall);
  CHECK(!fwd.contains({0, 0, 0, 0, 0}, {0, 0, 1, 0, 0, 0}));
  CHECK(!bwd.contains({0, 0, 1, 0, 0, 0}, {0, 0, 0, 0, 0}));
  // Same thread stays ordered by the textual component.
  CHECK(fwd.contains({0, 0, 0, 0, 0}, {0, 0, 0, 0, 0, 0}));
}

TEST_CASE("happens_before is a strict partial order on a concrete instantiation") {
  KernelModel m = load_model_file(fixture("gespmm_alg2.model")).substitute_params(kSmall);
  auto hb = happens_before(m);

  struct Inst {
    std::string label;
    std::vector<int64_t> point;
  };
  std::vector<Inst> insts;
  for (const auto& st : m.statements) {
    IntSet dom = full_domain(m, st);
    for (auto& p : enumerate_set(dom, EnumBox{0, 8})) insts.push_back({st.label, p});
  }
  REQUIRE(insts.size() > 10);

  auto ordered = [&](const Inst& x, const Inst& y) {
    return hb.at({x.label, y.label}).contains(x.point, y.point);
  };
  for (size_t i = 0; i < insts.size(); ++i) {
    CHECK(!ordered(insts[i], insts[i]));
    for (size_t j = 0; j < insts.size(); ++j) {
      if (ordered(insts[i], insts[j])) CHECK(!ordered(insts[j], insts[i]));
      for (size_t k = 0; k < insts.size(); ++k)
        if (ordered(insts[i], insts[j]) && ordered(insts[j], insts[k]))
          CHECK(ordered(insts[i], insts[k]));
    }
  }
}

TEST_CASE("phase components reject thread-dim dependence") {
  KernelModel m = load_model_file(fixture("gespmm_alg2.model"));
  m.schedule.timestamps["F"][0] = AffineExpr::dim("tx");
  CHECK_THROWS_AS(m.validate(), Error);
}

TEST_CASE("validate rejects non-leading grid dims and undeclared params") {
  KernelModel m = load_model_file(fixture("polyp.model"));
  m.grid.bindings.push_back({"missing", GridRole::ThreadX});
  CHECK_THROWS_AS(m.validate(), Error);

  KernelModel m2 = load_model_file(fixture("polyp.model"));
  m2.params.clear();  // n is now undeclared at the model level
  CHECK_THROWS_AS(m2.validate(), Error);
}
