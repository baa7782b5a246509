// Copyright (c) raceset contributors.
// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "raceset/affine.hpp"

using namespace raceset;

TEST_CASE("affine arithmetic keeps canonical form") {
  AffineExpr e = AffineExpr::dim("i", 2) + AffineExpr::dim("j") - AffineExpr::dim("i", 2);
  CHECK(e.coeff_of_dim("i") == 0);
  CHECK(e.coeffs().count("i") == 0);  // zero coefficients are not stored
  CHECK(e.coeff_of_dim("j") == 1);

  AffineExpr f = e.scaled(3) + AffineExpr::constant(4);
  CHECK(f.coeff_of_dim("j") == 3);
  CHECK(f.constant_term() == 4);
  CHECK(f.eval({{"j", 2}}, {}) == 10);
}

TEST_CASE("affine eval requires bindings") {
  AffineExpr e = AffineExpr::dim("i") + AffineExpr::param("n");
  CHECK(e.eval({{"i", 1}}, {{"n", 3}}) == 4);
  CHECK_THROWS_AS(e.eval({{"i", 1}}, {}), Error);
}

TEST_CASE("substitution") {
  AffineExpr e = AffineExpr::dim("ptr") + AffineExpr::dim("tx");
  AffineExpr ptr = AffineExpr::param("rs") + AffineExpr::dim("q", 4);
  AffineExpr r = e.substitute_dim("ptr", ptr);
  CHECK(r.coeff_of_dim("q") == 4);
  CHECK(r.coeff_of_dim("tx") == 1);
  CHECK(r.coeff_of_param("rs") == 1);

  AffineExpr s = r.substitute_param("rs", 2);
  CHECK(s.constant_term() == 2);
  CHECK(s.coeff_of_param("rs") == 0);
}

TEST_CASE("gcd_normalize: parity equality is infeasible") {
  // 2i - 1 == 0
  Constraint c = constraint_eq0(AffineExpr::dim("i", 2) - AffineExpr::constant(1));
  GcdNormalized g = gcd_normalize(c);
  CHECK(g.infeasible);
}

TEST_CASE("gcd_normalize: equality divided through") {
  // 2i - 4 == 0  ->  i - 2 == 0
  Constraint c = constraint_eq0(AffineExpr::dim("i", 2) - AffineExpr::constant(4));
  GcdNormalized g = gcd_normalize(c);
  REQUIRE(g.constraint.has_value());
  CHECK(g.constraint->expr.coeff_of_dim("i") == 1);
  CHECK(g.constraint->expr.constant_term() == -2);
}

TEST_CASE("gcd_normalize: inequality tightened by integer ceiling") {
  // 3i - 4 >= 0  ->  i - 2 >= 0  (i >= 4/3 implies i >= 2)
  Constraint c = constraint_ge0(AffineExpr::dim("i", 3) - AffineExpr::constant(4));
  GcdNormalized g = gcd_normalize(c);
  REQUIRE(g.constraint.has_value());
  CHECK(g.constraint->expr.coeff_of_dim("i") == 1);
  CHECK(g.constraint->expr.constant_term() == -2);
  CHECK(g.constraint->kind == ConstraintKind::NonNegative);
}

TEST_CASE("gcd_normalize: constant-only constraints resolve") {
  CHECK(gcd_normalize(constraint_ge0(AffineExpr::constant(3))).trivially_true);
  CHECK(gcd_normalize(constraint_ge0(AffineExpr::constant(-1))).infeasible);
  CHECK(gcd_normalize(constraint_eq0(AffineExpr::constant(0))).trivially_true);
  CHECK(gcd_normalize(constraint_eq0(AffineExpr::constant(2))).infeasible);
}

TEST_CASE("gcd_normalize preserves integer solutions exactly") {
  // 6i - 9j + 3 >= 0 -> 2i - 3j + 1 >= 0: same integer points.
  Constraint c = constraint_ge0(AffineExpr::dim("i", 6) - AffineExpr::dim("j", 9) +
                                AffineExpr::constant(3));
  GcdNormalized g = gcd_normalize(c);
  REQUIRE(g.constraint.has_value());
  for (int64_t i = -6; i <= 6; ++i) {
    for (int64_t j = -6; j <= 6; ++j) {
      std::map<std::string, int64_t> pt{{"i", i}, {"j", j}};
      bool before = c.expr.eval(pt, {}) >= 0;
      bool after = g.constraint->expr.eval(pt, {}) >= 0;
      CHECK(before == after);
    }
  }
}
