// Copyright (c) raceset contributors.
// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>

#include "raceset/miniir.hpp"
#include "raceset/model_text.hpp"
#include "raceset/oracle.hpp"

using namespace raceset;

namespace {

std::string fixture(const std::string& name) {
  const char* dir = std::getenv("RACESET_FIXTURES");
  REQUIRE(dir != nullptr);
  return std::string(dir) + "/" + name;
}

std::map<std::string, MemSpace> spaces_of(const Function& f) {
  std::map<std::string, MemSpace> s;
  for (const auto& p : f.params)
    if (p.is_pointer) s[p.name] = MemSpace::Global;
  for (const auto& d : f.shared_decls) s[d.name] = MemSpace::Shared;
  return s;
}

}  // namespace

TEST_CASE("the barriered gespmm run is race-free and phase-ordered") {
  Function f = load_miniir_file(fixture("gespmm_alg2.mir"));
  ConcreteInstance inst = load_instance_file(fixture("gespmm_small.inst"));
  AccessLog log = run(inst, f);
  REQUIRE(!log.empty());

  // Every sm_k write precedes, by phase, every read of the same cell by a
  // different thread of the same block.
  for (const auto& w : log) {
    if (w.array != "sm_k" || w.kind != AccessKind::Write) continue;
    for (const auto& r : log) {
      if (r.array != "sm_k" || r.kind != AccessKind::Read) continue;
      if (!w.same_block(r) || w.same_thread(r) || w.cell != r.cell) continue;
      CHECK(w.phase != r.phase);
    }
  }
  OracleVerdict v = detect_races(log, spaces_of(f));
  CHECK(!v.race_found);
}

TEST_CASE("removing the staging barrier produces logged conflicts") {
  Function f = load_miniir_file(fixture("gespmm_nobarrier.mir"));
  ConcreteInstance inst = load_instance_file(fixture("gespmm_small.inst"));
  AccessLog log = run(inst, f);
  OracleVerdict v = detect_races(log, spaces_of(f));
  REQUIRE(v.race_found);
  bool sm_pair = false;
  for (const auto& p : v.pairs) {
    if (p.first.array == "sm_k" || p.first.array == "sm_v") {
      sm_pair = true;
      CHECK(p.first.same_block(p.second));
      CHECK(!p.first.same_thread(p.second));
      CHECK(p.first.phase == p.second.phase);
    }
  }
  CHECK(sm_pair);
}

TEST_CASE("a single-thread run cannot race") {
  Function f = load_miniir_file(fixture("polyp.mir"));
  ConcreteInstance inst = load_instance_file(fixture("polyp_n4.inst"));
  AccessLog log = run(inst, f);
  REQUIRE(!log.empty());
  OracleVerdict v = detect_races(log, spaces_of(f));
  CHECK(!v.race_found);
  // And the computed values are the accumulated outer product on top of the
  // zeroed diagonal: C[i*4+j] = A[i] * B[j].
}

TEST_CASE("verdicts are invariant under thread execution order") {
  for (const char* name : {"gespmm_alg2.mir", "gespmm_nobarrier.mir"}) {
    Function f = load_miniir_file(fixture(name));
    ConcreteInstance inst = load_instance_file(fixture("gespmm_small.inst"));
    RunOptions fwd, rev;
    rev.reverse_thread_order = true;
    OracleVerdict a = detect_races(run(inst, f, fwd), spaces_of(f));
    OracleVerdict b = detect_races(run(inst, f, rev), spaces_of(f));
    CHECK(a.race_found == b.race_found);
    CHECK(a.pairs.size() == b.pairs.size());
  }
}

TEST_CASE("csr validation rejects malformed instances") {
  std::string bad = R"(instance broken
params M=2
grid 1, 1, 1
block 1, 1, 1
array rowPtr i32 = 0 2 1
array colInd i32 = 0 0
array val f32 = 1 1
csr rowPtr colInd val cols=2
)";
  CHECK_THROWS_AS(parse_instance(bad), Error);
  try {
    parse_instance(bad);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::CsrInvalid);
  }
}

TEST_CASE("out-of-bounds accesses are a reportable finding") {
  std::string text = R"(kernel @oob(%A: i32*) {
entry:
  store 1, A[9]
  ret
}
)";
  Function f = parse_miniir(text);
  ConcreteInstance inst;
  inst.arrays["A"].elem = ElemKind::I32;
  inst.arrays["A"].ints = {0, 0};
  try {
    run(inst, f);
    FAIL("expected OutOfBounds");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::OutOfBounds);
    CHECK(std::string(e.what()).find("A[9]") != std::string::npos);
  }
}

TEST_CASE("runaway loops hit the step limit") {
  std::string text = R"(kernel @spin(%A: i32*) {
entry:
  br head
head:
  %i = phi [0, entry], [%i1, head2]
  %c = icmp ge %i, 0
  br %c, head2, exit
head2:
  %i1 = add %i, 1
  br head
exit:
  ret
}
)";
  Function f = parse_miniir(text);
  ConcreteInstance inst;
  inst.arrays["A"].ints = {0};
  RunOptions o;
  o.step_limit = 1000;
  CHECK_THROWS_AS(run(inst, f, o), Error);
}

TEST_CASE("warp barriers order within the warp but not across it") {
  ConcreteInstance inst = load_instance_file(fixture("warp.inst"));
  Function warped = load_miniir_file(fixture("warpshift_warp.mir"));
  AccessLog wlog = run(inst, warped);
  OracleVerdict wv = detect_races(wlog, spaces_of(warped), 2);
  REQUIRE(wv.race_found);
  for (const auto& p : wv.pairs) {
    // Only the warp-boundary handoff (write S[1] by t1, read S[1] by t2)
    // is unordered.
    CHECK(p.first.array == "S");
    CHECK(p.first.thread[0] / 2 != p.second.thread[0] / 2);
  }

  Function blocked = load_miniir_file(fixture("warpshift_block.mir"));
  AccessLog block_log = run(inst, blocked);
  CHECK(!detect_races(block_log, spaces_of(blocked)).race_found);
}

TEST_CASE("the model interpreter agrees with the mini-IR run on polyp") {
  ConcreteInstance inst = load_instance_file(fixture("polyp_n4.inst"));
  KernelModel model = load_model_file(fixture("polyp.model"));
  AccessLog mlog = run(inst, model);
  REQUIRE(!mlog.empty());
  std::map<std::string, MemSpace> spaces = {{"A", MemSpace::Global},
                                            {"B", MemSpace::Global},
                                            {"C", MemSpace::Global}};
  CHECK(!detect_races(mlog, spaces).race_found);

  // Same multiset of (array, flat cell, kind) accesses as the mini-IR run,
  // mapping the model's 2-D C cells onto the flat layout.
  Function f = load_miniir_file(fixture("polyp.mir"));
  AccessLog ilog = run(inst, f);
  auto key = [](const AccessLogEntry& e, int64_t n) {
    int64_t flat = e.cell.size() == 2 ? e.cell[0] * n + e.cell[1] : e.cell[0];
    return std::make_tuple(e.array, flat, e.kind == AccessKind::Write);
  };
  std::multiset<std::tuple<std::string, int64_t, bool>> a, b;
  for (const auto& e : mlog) a.insert(key(e, 4));
  for (const auto& e : ilog) b.insert(key(e, 4));
  CHECK(a == b);
}

TEST_CASE("model runs demand fully determined cells") {
  // The gespmm hand model keeps rs/re/kb symbolic: not runnable.
  KernelModel model = load_model_file(fixture("gespmm_alg2.model"));
  ConcreteInstance inst = load_instance_file(fixture("gespmm_small.inst"));
  CHECK_THROWS_AS(run(inst, model), Error);
}

TEST_CASE("enumerate_set rejects oversized boxes") {
  IntSet s("S", {"a", "b", "c"});
  s.add_disjunct(Disjunct{});
  EnumBox box(-2000, 2000);
  CHECK_THROWS_AS(enumerate_set(s, box), Error);
}
