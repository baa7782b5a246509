// Copyright (c) raceset contributors.
// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "property_core.hpp"

using namespace raceset;
using namespace raceset::proptest;

TEST_CASE("set algebra agrees pointwise with enumeration over 1000 seeded cases") {
  Outcome out = run_agreement(seed_from_env(), 1000);
  CHECK(out.cases == 1000);
  CHECK(out.mismatches == 0);
  CHECK(out.unsound_empty == 0);
  CHECK(out.bounded_inconclusive == 0);
  CHECK(out.bad_witness == 0);
}

TEST_CASE("gcd_normalize preserves integer solution sets") {
  Gen gen(seed_from_env() ^ 0x9e3779b97f4a7c15ull);
  for (int iter = 0; iter < 200; ++iter) {
    AffineExpr e = AffineExpr::dim("x", 2 * gen.uniform(-3, 3)) +
                   AffineExpr::dim("y", 2 * gen.uniform(-3, 3)) +
                   AffineExpr::constant(gen.uniform(-9, 9));
    Constraint c{e, gen.uniform(0, 1) ? ConstraintKind::EqualsZero : ConstraintKind::NonNegative};
    GcdNormalized g = gcd_normalize(c);
    for (int64_t x = -6; x <= 6; ++x) {
      for (int64_t y = -6; y <= 6; ++y) {
        int64_t val = e.eval({{"x", x}, {"y", y}}, {});
        bool before = c.kind == ConstraintKind::EqualsZero ? val == 0 : val >= 0;
        bool after;
        if (g.infeasible)
          after = false;
        else if (g.trivially_true)
          after = true;
        else {
          int64_t nv = g.constraint->expr.eval({{"x", x}, {"y", y}}, {});
          after = g.constraint->kind == ConstraintKind::EqualsZero ? nv == 0 : nv >= 0;
        }
        CHECK(before == after);
      }
    }
  }
}

TEST_CASE("restricted lex_lt keeps ordered pairs on every nonempty box") {
  Gen gen(seed_from_env() ^ 0xdeadbeefull);
  for (int iter = 0; iter < 50; ++iter) {
    size_t arity = static_cast<size_t>(gen.uniform(1, 3));
    IntRel r = lex_lt(arity);
    IntSet dom(r.in_space(), r.in_dims());
    std::vector<Constraint> cs;
    for (const auto& d : dom.dims()) {
      cs.push_back(constraint_le(AffineExpr::constant(gen.uniform(-4, 0)), AffineExpr::dim(d)));
      cs.push_back(constraint_le(AffineExpr::dim(d), AffineExpr::constant(gen.uniform(1, 4))));
    }
    dom.add_constraints(std::move(cs));
    IntRel bounded = intersect_domain(r, dom);
    EmptinessVerdict v = is_empty(bounded);
    CHECK(v.nonempty());
  }
}
