// Copyright (c) raceset contributors.
// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "raceset/intset.hpp"
#include "raceset/oracle.hpp"

using namespace raceset;

namespace {

AffineExpr d(const std::string& n, int64_t c = 1) { return AffineExpr::dim(n, c); }
AffineExpr p(const std::string& n, int64_t c = 1) { return AffineExpr::param(n, c); }
AffineExpr k(int64_t v) { return AffineExpr::constant(v); }

IntSet range_set(const std::string& space, const std::string& dim, int64_t lo, int64_t hi_excl) {
  IntSet s(space, {dim});
  s.add_constraints({constraint_le(k(lo), d(dim)), constraint_lt(d(dim), k(hi_excl))});
  return s;
}

}  // namespace

TEST_CASE("intersect conjoins bounds") {
  // {S[k]: 0<=k<n} * {S[k]: k>=2} = {S[k]: 2<=k<n}
  IntSet a("S", {"k"}, {"n"});
  a.add_constraints({constraint_le(k(0), d("k")), constraint_lt(d("k"), p("n"))});
  IntSet b("S", {"k"});
  b.add_constraints({constraint_le(k(2), d("k"))});
  IntSet r = intersect(a, b);
  IntSet inst = r.substitute_params({{"n", 6}});
  EnumBox box;
  auto pts = enumerate_set(inst, box);
  CHECK(pts == std::vector<std::vector<int64_t>>{{2}, {3}, {4}, {5}});
}

TEST_CASE("intersect of contradictory bounds is empty") {
  IntSet a = range_set("S", "k", 0, 5);
  IntSet b("S", {"k"});
  b.add_constraints({constraint_le(k(5), d("k"))});
  CHECK(is_empty(intersect(a, b)).empty());
}

TEST_CASE("intersect requires matching space") {
  IntSet a = range_set("S", "k", 0, 5);
  IntSet b = range_set("T", "k", 0, 5);
  CHECK_THROWS_AS(intersect(a, b), Error);
}

TEST_CASE("random intersections agree with pointwise brute force") {
  // 2-dim sets, coefficients in [-3,3], membership checked over [-10,10]^2.
  uint64_t state = 12345;
  auto rnd = [&state](int64_t lo, int64_t hi) {
    state = state * 6364136223846793005ull + 1442695040888963407ull;
    return lo + static_cast<int64_t>((state >> 33) % static_cast<uint64_t>(hi - lo + 1));
  };
  for (int iter = 0; iter < 25; ++iter) {
    IntSet a("S", {"x", "y"}), b("S", {"x", "y"});
    for (IntSet* s : {&a, &b}) {
      std::vector<Constraint> cs;
      for (int c = 0; c < 3; ++c) {
        AffineExpr e = d("x", rnd(-3, 3)) + d("y", rnd(-3, 3)) + k(rnd(-5, 5));
        cs.push_back(constraint_ge0(e));
      }
      s->add_constraints(std::move(cs));
    }
    IntSet r = intersect(a, b);
    for (int64_t x = -10; x <= 10; ++x)
      for (int64_t y = -10; y <= 10; ++y) {
        bool expect = a.contains({x, y}) && b.contains({x, y});
        CHECK(r.contains({x, y}) == expect);
      }
  }
}

TEST_CASE("union identity and membership") {
  IntSet x = range_set("S", "k", 0, 2);
  IntSet e("S", {"k"});  // canonical empty set
  CHECK(e.structurally_empty());
  IntSet u = union_same(e, x);
  EnumBox box;
  CHECK(enumerate_set(u, box) == enumerate_set(x, box));

  IntSet y = range_set("S", "k", 1, 4);
  auto pts = enumerate_set(union_same(x, y), box);
  CHECK(pts == std::vector<std::vector<int64_t>>{{0}, {1}, {2}, {3}});
}

TEST_CASE("union across spaces is keyed") {
  IntSet s = range_set("S", "k", 0, 2);
  IntSet t("T", {"i", "j"});
  t.add_constraints({constraint_le(k(0), d("i"))});
  SetCollection c = set_union(s, t);
  REQUIRE(c.find("S") != nullptr);
  REQUIRE(c.find("T") != nullptr);
  CHECK(c.find("S")->arity() == 1);
  CHECK(c.find("T")->arity() == 2);
}

TEST_CASE("subtract punches holes") {
  IntSet x = range_set("S", "k", 0, 4);
  IntSet e("S", {"k"});
  EnumBox box;
  CHECK(enumerate_set(subtract(x, e), box) == enumerate_set(x, box));

  IntSet mid("S", {"k"});
  mid.add_constraints({constraint_eq(d("k"), k(2))});
  auto pts = enumerate_set(subtract(x, mid), box);
  CHECK(pts == std::vector<std::vector<int64_t>>{{0}, {1}, {3}});

  CHECK(is_empty(subtract(x, x)).empty());
}

TEST_CASE("subtract random cases agree with brute force") {
  uint64_t state = 999;
  auto rnd = [&state](int64_t lo, int64_t hi) {
    state = state * 6364136223846793005ull + 1442695040888963407ull;
    return lo + static_cast<int64_t>((state >> 33) % static_cast<uint64_t>(hi - lo + 1));
  };
  for (int iter = 0; iter < 25; ++iter) {
    IntSet a("S", {"x", "y"}), b("S", {"x", "y"});
    for (IntSet* s : {&a, &b}) {
      std::vector<Constraint> cs;
      for (int c = 0; c < 2; ++c)
        cs.push_back(constraint_ge0(d("x", rnd(-3, 3)) + d("y", rnd(-3, 3)) + k(rnd(-4, 6))));
      s->add_constraints(std::move(cs));
    }
    IntSet r = subtract(a, b);
    for (int64_t x = -8; x <= 8; ++x)
      for (int64_t y = -8; y <= 8; ++y) {
        bool expect = a.contains({x, y}) && !b.contains({x, y});
        CHECK(r.contains({x, y}) == expect);
      }
  }
}

TEST_CASE("inverse swaps tuples") {
  // {A[i] -> B[i+1]} inverted is {B[j] -> A[j-1]}.
  IntRel r("A", {"i"}, "B", {"o"});
  r.add_constraints({constraint_eq(d("o"), d("i") + k(1))});
  IntRel inv = inverse(r);
  CHECK(inv.in_space() == "B");
  CHECK(inv.out_space() == "A");
  for (int64_t j = -5; j <= 5; ++j) {
    CHECK(inv.contains({j}, {j - 1}));
    CHECK(!inv.contains({j}, {j}));
  }
  // inverse(inverse(R)) == R pointwise
  IntRel back = inverse(inv);
  for (int64_t i = -5; i <= 5; ++i)
    for (int64_t o = -5; o <= 5; ++o) CHECK(back.contains({i}, {o}) == r.contains({i}, {o}));
}

TEST_CASE("compose with identity is identity") {
  IntRel id("S", {"a"}, "S", {"b"});
  id.add_constraints({constraint_eq(d("a"), d("b"))});
  IntRel r("S", {"x"}, "C", {"c"});
  r.add_constraints({constraint_eq(d("c"), d("x", 2) + k(1))});
  IntRel c = compose(id, r);
  for (int64_t x = -6; x <= 6; ++x)
    for (int64_t y = -6; y <= 6; ++y) CHECK(c.contains({x}, {y}) == r.contains({x}, {y}));
}

TEST_CASE("compose joins through the shared tuple") {
  // {S[k] -> C[k]} then inverse({T[i,j] -> C[i]}) relates S[k] to T[i,j] with k == i.
  IntRel w("S", {"sk"}, "C", {"c"});
  w.declare_param("n");
  w.add_constraints({constraint_eq(d("c"), d("sk")), constraint_le(k(0), d("sk")),
                     constraint_lt(d("sk"), p("n"))});
  IntRel rd("T", {"i", "j"}, "C", {"c"});
  rd.declare_param("n");
  rd.add_constraints({constraint_eq(d("c"), d("i")), constraint_le(k(0), d("i")),
                      constraint_lt(d("i"), p("n")), constraint_le(k(0), d("j")),
                      constraint_lt(d("j"), p("n"))});
  IntRel got = compose(w, inverse(rd));
  IntRel inst = got.substitute_params({{"n", 3}});
  for (int64_t sk = 0; sk < 3; ++sk)
    for (int64_t i = 0; i < 3; ++i)
      for (int64_t j = 0; j < 3; ++j) CHECK(inst.contains({sk}, {i, j}) == (sk == i));
}

TEST_CASE("compose with the empty relation is empty") {
  IntRel r("S", {"x"}, "C", {"c"});
  r.add_constraints({constraint_eq(d("c"), d("x"))});
  IntRel e("C", {"c"}, "T", {"t"});  // zero disjuncts
  CHECK(is_empty(compose(r, e)).empty());
}

TEST_CASE("compose arity mismatch") {
  IntRel r("S", {"x"}, "C", {"c", "c2"});
  IntRel q("C", {"c"}, "T", {"t"});
  CHECK_THROWS_AS(compose(r, q), Error);
}

TEST_CASE("lex_lt on one dim is a plain <") {
  IntRel r = lex_lt(1);
  for (int64_t a = -4; a <= 4; ++a)
    for (int64_t b = -4; b <= 4; ++b) CHECK(r.contains({a}, {b}) == (a < b));
}

TEST_CASE("lex_lt on two dims matches dictionary order") {
  IntRel r = lex_lt(2);
  for (int64_t a0 = 0; a0 < 3; ++a0)
    for (int64_t a1 = 0; a1 < 3; ++a1)
      for (int64_t b0 = 0; b0 < 3; ++b0)
        for (int64_t b1 = 0; b1 < 3; ++b1) {
          bool expect = a0 < b0 || (a0 == b0 && a1 < b1);
          CHECK(r.contains({a0, a1}, {b0, b1}) == expect);
        }
}

TEST_CASE("lex_lt is antisymmetric") {
  IntRel r = lex_lt(2);
  CHECK(is_empty(intersect(r, inverse(r))).empty());
}

TEST_CASE("lex_lt is irreflexive, transitive and total on a 3^d box") {
  for (size_t arity = 1; arity <= 3; ++arity) {
    IntRel r = lex_lt(arity);
    std::vector<std::vector<int64_t>> pts;
    std::vector<int64_t> cur(arity, 0);
    while (true) {
      pts.push_back(cur);
      size_t l = 0;
      for (; l < arity; ++l) {
        if (++cur[l] <= 2) break;
        cur[l] = 0;
      }
      if (l == arity) break;
    }
    for (const auto& a : pts) {
      CHECK(!r.contains(a, a));
      for (const auto& b : pts) {
        if (a != b) CHECK((r.contains(a, b) || r.contains(b, a)));
        for (const auto& c : pts)
          if (r.contains(a, b) && r.contains(b, c)) CHECK(r.contains(a, c));
      }
    }
  }
}

TEST_CASE("project_out with unit coefficients is exact") {
  // project i out of {[i,j]: i==j, 0<=i<4} -> {[j]: 0<=j<4}
  IntSet s("S", {"i", "j"});
  s.add_constraints({constraint_eq(d("i"), d("j")), constraint_le(k(0), d("i")),
                     constraint_lt(d("i"), k(4))});
  IntSet r = project_out(s, {"i"});
  CHECK(r.dims() == std::vector<std::string>{"j"});
  CHECK(!r.has_existentials());
  EnumBox box;
  CHECK(enumerate_set(r, box) ==
        std::vector<std::vector<int64_t>>{{0}, {1}, {2}, {3}});
}

TEST_CASE("project_out keeps exactness through a retained existential") {
  // {[i,j]: j == 2i, 0<=i<5}: projecting i needs the stride of j.
  IntSet s("S", {"i", "j"});
  s.add_constraints({constraint_eq(d("j"), d("i", 2)), constraint_le(k(0), d("i")),
                     constraint_lt(d("i"), k(5))});
  IntSet r = project_out(s, {"i"});
  EnumBox box;
  auto pts = enumerate_set(r, box);
  CHECK(pts == std::vector<std::vector<int64_t>>{{0}, {2}, {4}, {6}, {8}});
}

TEST_CASE("projecting every dim of a nonempty set leaves a nonempty zero-dim set") {
  IntSet s = range_set("S", "k", 0, 3);
  IntSet r = project_out(s, {"k"});
  CHECK(r.arity() == 0);
  CHECK(is_empty(r).nonempty());
}
