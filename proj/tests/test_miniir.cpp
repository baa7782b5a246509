// Copyright (c) raceset contributors.
// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>

#include "raceset/depcheck.hpp"
#include "raceset/miniir.hpp"

using namespace raceset;

namespace {

std::string fixture(const std::string& name) {
  const char* dir = std::getenv("RACESET_FIXTURES");
  REQUIRE(dir != nullptr);
  return std::string(dir) + "/" + name;
}

GridLaunch small_launch() {
  GridLaunch l;
  l.grid[0] = 2;
  l.block[0] = 4;
  return l;
}

ExtractOptions gespmm_opts() {
  ExtractOptions o;
  o.launch = small_launch();
  o.section_hints = {{"init", "I"}, {"do_fetch", "F"}, {"accum", "T"}};
  return o;
}

}  // namespace

TEST_CASE("the gespmm fixture parses with the expected structure") {
  Function f = load_miniir_file(fixture("gespmm_alg2.mir"));
  CHECK(f.name == "gespmm_alg2");
  CHECK(f.params.size() == 8);
  CHECK(f.shared_decls.size() == 2);
  int barriers = 0;
  for (const auto& b : f.blocks)
    for (const auto& ins : b.instrs)
      if (ins.op == Opcode::Barrier) ++barriers;
  CHECK(barriers == 2);  // one after staging, one closing the tile iteration
  auto loops = find_loops(f, small_launch());
  CHECK(loops.size() == 2);  // tile loop over ptr, accumulation loop over kk
}

TEST_CASE("an empty kernel body still yields an entry block") {
  Function f = parse_miniir("kernel @nop() {\n}\n");
  CHECK(f.blocks.size() == 1);
  CHECK(f.blocks[0].instrs.empty());
}

TEST_CASE("use before definition is an SSA violation") {
  std::string text = R"(kernel @bad(%A: i32*) {
entry:
  store %x, A[0]
  %x = add 1, 2
  ret
}
)";
  CHECK_THROWS_AS(parse_miniir(text), Error);
  try {
    parse_miniir(text);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::SsaViolation);
  }
}

TEST_CASE("double definition is an SSA violation") {
  std::string text = R"(kernel @bad() {
entry:
  %x = add 1, 2
  %x = add 2, 3
  ret
}
)";
  CHECK_THROWS_AS(parse_miniir(text), Error);
}

TEST_CASE("unknown opcodes are rejected") {
  std::string text = "kernel @bad() {\nentry:\n  %x = frobnicate 1, 2\n  ret\n}\n";
  try {
    parse_miniir(text);
    FAIL("expected UnknownOpcode");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::UnknownOpcode);
  }
}

TEST_CASE("syntax errors carry line positions") {
  std::string text = "kernel @bad() {\nentry:\n  %x = add 1\n  ret\n}\n";
  try {
    parse_miniir(text);
    FAIL("expected SyntaxError");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::SyntaxError);
    CHECK(e.line() == 3);
  }
}

TEST_CASE("grid iterators map intrinsic registers to roles") {
  Function f = load_miniir_file(fixture("gespmm_alg2.mir"));
  GridIterators gi = find_grid_iterators(f);
  CHECK(gi.reg_role.at("i") == GridRole::BlockX);
  CHECK(gi.reg_role.at("by") == GridRole::BlockY);
  CHECK(gi.reg_role.at("tx") == GridRole::ThreadX);
  CHECK(!gi.uses_warp_sync);
}

TEST_CASE("a host-style kernel has no grid bindings") {
  Function f = load_miniir_file(fixture("polyp.mir"));
  GridIterators gi = find_grid_iterators(f);
  CHECK(gi.reg_role.empty());
}

TEST_CASE("an id multiplied by a loaded value is unsupported") {
  std::string text = R"(kernel @bad(%A: i32*, %X: i32*) {
entry:
  %t = call tid.x
  %l = load X[0]
  %p = mul %t, %l
  %v = load A[%p]
  store %v, X[%t]
  ret
}
)";
  Function f = parse_miniir(text);
  try {
    find_grid_iterators(f);
    FAIL("expected UnsupportedIdPattern");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::UnsupportedIdPattern);
  }
}

TEST_CASE("composite ids stay affine") {
  std::string text = R"(kernel @row(%C: i32*, %M: i32) {
entry:
  %b = call bid.x
  %bd = call blockdim.x
  %t = call tid.x
  %r0 = mul %b, %bd
  %row = add %r0, %t
  store 1, C[%row]
  ret
}
)";
  Function f = parse_miniir(text);
  CHECK_NOTHROW(find_grid_iterators(f));
  GridLaunch l;
  l.block[0] = 8;
  Propagation p = propagate(f, l);
  REQUIRE(p.values.at("row").is_affine());
  const AffineExpr& e = *p.values.at("row").affine;
  CHECK(e.coeff_of_dim("b") == 8);
  CHECK(e.coeff_of_dim("t") == 1);
}

TEST_CASE("canonical counted loop is recognized") {
  std::string text = R"(kernel @count(%A: i32*, %rs: i32, %re: i32) {
entry:
  br head
head:
  %ptr = phi [%rs, entry], [%p1, latch]
  %c = icmp lt %ptr, %re
  br %c, body, exit
body:
  %v = load A[%ptr]
  store %v, A[%ptr]
  br latch
latch:
  %p1 = add %ptr, 1
  br head
exit:
  ret
}
)";
  Function f = parse_miniir(text);
  auto loops = find_loops(f);
  REQUIRE(loops.size() == 1);
  CHECK(loops[0].induction == "ptr");
  CHECK(loops[0].step == 1);
  CHECK(loops[0].pred == IcmpPred::Lt);
  CHECK(loops[0].counter == "q0");
}

TEST_CASE("a straight-line kernel has no loops") {
  std::string text = "kernel @s(%A: i32*) {\nentry:\n  store 1, A[0]\n  ret\n}\n";
  CHECK(find_loops(parse_miniir(text)).empty());
}

TEST_CASE("a step loaded from memory is a non-affine bound") {
  std::string text = R"(kernel @bad(%A: i32*, %n: i32) {
entry:
  %step = load A[0]
  br head
head:
  %i = phi [0, entry], [%i1, latch]
  %c = icmp lt %i, %n
  br %c, body, exit
body:
  store 1, A[%i]
  br latch
latch:
  %i1 = add %i, %step
  br head
exit:
  ret
}
)";
  try {
    find_loops(parse_miniir(text));
    FAIL("expected NonAffineBound");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NonAffineBound);
  }
}

TEST_CASE("propagation is an idempotent fixed point with constants folded") {
  std::string text = R"(kernel @p(%A: i32*, %base: i32) {
entry:
  %i = call tid.x
  %a = mul %i, 4
  %p = add %base, %a
  %c = add 2, 3
  %v = load A[%p]
  store %v, A[%c]
  ret
}
)";
  Function f = parse_miniir(text);
  Propagation p1 = propagate(f);
  REQUIRE(p1.values.at("a").is_affine());
  CHECK(p1.values.at("a").affine->coeff_of_dim("i") == 4);
  REQUIRE(p1.values.at("p").is_affine());
  CHECK(p1.values.at("p").affine->coeff_of_param("base") == 1);
  CHECK(p1.values.at("c").affine->constant_term() == 5);
  // idempotence: a second run reproduces the same expressions
  Propagation p2 = propagate(f);
  for (const auto& [reg, pe] : p1.values) {
    CHECK(p2.values.at(reg).is_affine() == pe.is_affine());
    if (pe.is_affine()) CHECK(*p2.values.at(reg).affine == *pe.affine);
  }
}

TEST_CASE("data-dependent addresses propagate as opaque loads") {
  Function f = load_miniir_file(fixture("gespmm_alg2.mir"));
  Propagation p = propagate(f, small_launch());
  // %ki = load sm_k[%kk]: opaque with its source
  REQUIRE(!p.values.at("ki").is_affine());
  CHECK(p.values.at("ki").opaque->array == "sm_k");
  // %baddr = %ki * N + j: opaque composition flagged data-dependent
  CHECK(!p.values.at("baddr").is_affine());
  // %caddr = i * N + j is not affine either (dim times param), but carries
  // no load: the extractor delinearizes it.
  CHECK(!p.values.at("caddr").is_affine());
  CHECK(p.values.at("caddr").opaque->array.empty());
  // %pt = ptr + tx resolves affinely over the loop counter and fresh rs.
  CHECK(!p.values.at("pt").is_affine());  // rs is an opaque load leaf
}

TEST_CASE("gespmm extraction recovers the I/F/T shape") {
  Function f = load_miniir_file(fixture("gespmm_alg2.mir"));
  Extraction ex = extract_model(f, gespmm_opts());
  const KernelModel& m = ex.model;

  REQUIRE(m.find_statement("I") != nullptr);
  REQUIRE(m.find_statement("F") != nullptr);
  REQUIRE(m.find_statement("T") != nullptr);
  CHECK(m.statements.size() == 3);

  // F writes the shared staging arrays at tid-indexed cells.
  const Statement* F = m.find_statement("F");
  REQUIRE(F->writes.size() == 2);
  CHECK(F->writes[0].array == "sm_k");
  CHECK(F->writes[1].array == "sm_v");
  for (const auto& w : F->writes) {
    // cell == tx
    CHECK(w.rel.contains({0, 0, 2, 0}, {2}, {{"M", 4}, {"N", 4}, {"K", 4}, {"rs", 0}, {"re", 4}}));
    CHECK(!w.rel.contains({0, 0, 2, 0}, {1}, {{"M", 4}, {"N", 4}, {"K", 4}, {"rs", 0}, {"re", 4}}));
  }

  // T reads sm_k/sm_v across the tile and rewrites its C cell; the B row
  // index is a fresh parameter (superset of the loaded colInd value).
  const Statement* T = m.find_statement("T");
  CHECK(T->reads.size() == 4);
  REQUIRE(T->writes.size() == 1);
  CHECK(T->writes[0].array == "C");
  const ArrayRef* c = m.find_array("C");
  REQUIRE(c != nullptr);
  CHECK(c->arity == 2);  // delinearized by the pitch N
  const ArrayRef* b = m.find_array("B");
  CHECK(b->arity == 2);

  // Fresh parameters for the rowPtr-derived bounds, named by the registers.
  CHECK(ex.param_origins.at("rs") == "rs");
  CHECK(ex.param_origins.at("re") == "re");

  // Phases: I at 0, F at 2q, T at 2q+1 with q the tile counter.
  const auto& tsI = m.schedule.timestamps.at("I");
  const auto& tsF = m.schedule.timestamps.at("F");
  const auto& tsT = m.schedule.timestamps.at("T");
  CHECK(tsI[0].is_constant());
  CHECK(tsI[0].constant_term() == 0);
  CHECK(tsF[0].coeff_of_dim("q0") == 2);
  CHECK(tsF[0].constant_term() == 0);
  CHECK(tsT[0].coeff_of_dim("q0") == 2);
  CHECK(tsT[0].constant_term() == 1);
}

TEST_CASE("a single unconditional store extracts to one thread-box statement") {
  std::string text = R"(kernel @triv(%C: i32*) {
entry:
  %t = call tid.x
  store 1, C[%t]
  ret
}
)";
  Function f = parse_miniir(text);
  ExtractOptions o;
  o.launch = GridLaunch{};
  o.launch->block[0] = 4;
  Extraction ex = extract_model(f, o);
  REQUIRE(ex.model.statements.size() == 1);
  const Statement& st = ex.model.statements[0];
  CHECK(st.domain.dims() == std::vector<std::string>{"t"});
  CHECK(st.writes.size() == 1);
  CHECK(st.reads.empty());
}

TEST_CASE("extracted gespmm matches the hand-written model verdicts") {
  Function good = load_miniir_file(fixture("gespmm_alg2.mir"));
  Function bad = load_miniir_file(fixture("gespmm_nobarrier.mir"));
  Extraction ge = extract_model(good, gespmm_opts());
  Extraction be = extract_model(bad, gespmm_opts());
  CHECK(races(ge.model).verdict == RaceVerdict::RaceFree);
  DependenceReport rb = races(be.model);
  REQUIRE(rb.verdict == RaceVerdict::RaceFound);
  bool sm = false;
  for (const auto& w : rb.race_witnesses) sm = sm || w.array == "sm_k" || w.array == "sm_v";
  CHECK(sm);
}

TEST_CASE("polyp extraction is race-free like the hand model") {
  Function f = load_miniir_file(fixture("polyp.mir"));
  ExtractOptions o;
  o.section_hints = {{"s_body", "S"}, {"t_body", "T"}};
  Extraction ex = extract_model(f, o);
  CHECK(ex.model.statements.size() == 2);
  const ArrayRef* c = ex.model.find_array("C");
  REQUIRE(c != nullptr);
  CHECK(c->arity == 2);
  CHECK(races(ex.model).verdict == RaceVerdict::RaceFree);

  // The diagonal write S and the accumulating T overlap exactly on k==i==j.
  auto deps = dependences(ex.model, DependenceKind::RaW);
  bool found = false;
  for (const auto& e : deps)
    if (e.source == "S" && e.target == "T" && e.array == "C") {
      found = true;
      CHECK(e.verdict.nonempty());
    }
  CHECK(found);
}

TEST_CASE("a second constant-step induction feeding an address is rejected") {
  std::string text = R"(kernel @two(%A: i32*, %n: i32) {
entry:
  br head
head:
  %i = phi [0, entry], [%i1, latch]
  %j = phi [0, entry], [%j2, latch]
  %c = icmp lt %i, %n
  br %c, body, exit
body:
  %v = load A[%j]
  store %v, A[%i]
  br latch
latch:
  %i1 = add %i, 1
  %j2 = add %j, 2
  br head
exit:
  ret
}
)";
  Function f = parse_miniir(text);
  try {
    extract_model(f, ExtractOptions{});
    FAIL("expected MultipleInductions");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::MultipleInductions);
  }
}

TEST_CASE("threads that never read their id still race on shared cells") {
  // Four threads all write C[0]; without a synthesized thread dim the model
  // would collapse them into one and miss the conflict.
  std::string text = R"(kernel @collapse(%C: i32*) {
entry:
  store 1, C[0]
  ret
}
)";
  Function f = parse_miniir(text);
  ExtractOptions o;
  o.launch = GridLaunch{};
  o.launch->block[0] = 4;
  Extraction ex = extract_model(f, o);
  REQUIRE(ex.model.grid.bindings.size() == 1);
  CHECK(races(ex.model).verdict == RaceVerdict::RaceFound);
}
