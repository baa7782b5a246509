// Copyright (c) raceset contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "raceset/error.hpp"

namespace raceset {

// Affine form over named integer dimensions and parameters:
//   sum(coeffs[d] * d) + sum(param_coeffs[p] * p) + constant
// Zero coefficients are never stored; dimension and parameter name sets are
// disjoint by construction.
class AffineExpr {
public:
  AffineExpr() = default;

  static AffineExpr constant(int64_t c);
  static AffineExpr dim(const std::string& name, int64_t coeff = 1);
  static AffineExpr param(const std::string& name, int64_t coeff = 1);

  const std::map<std::string, int64_t>& coeffs() const { return coeffs_; }
  const std::map<std::string, int64_t>& param_coeffs() const { return param_coeffs_; }
  int64_t constant_term() const { return constant_; }

  int64_t coeff_of_dim(const std::string& name) const;
  int64_t coeff_of_param(const std::string& name) const;

  void set_dim_coeff(const std::string& name, int64_t c);
  void set_param_coeff(const std::string& name, int64_t c);
  void set_constant(int64_t c) { constant_ = c; }

  bool is_constant() const { return coeffs_.empty() && param_coeffs_.empty(); }
  bool uses_dims() const { return !coeffs_.empty(); }

  AffineExpr operator+(const AffineExpr& o) const;
  AffineExpr operator-(const AffineExpr& o) const;
  AffineExpr operator-() const;
  AffineExpr scaled(int64_t k) const;

  AffineExpr& operator+=(const AffineExpr& o);

  // Evaluates with every referenced name bound; throws UndeclaredParameter on
  // a missing binding.
  int64_t eval(const std::map<std::string, int64_t>& dim_values,
               const std::map<std::string, int64_t>& param_values) const;

  // Renames dimensions (names absent from the map are kept).
  AffineExpr rename_dims(const std::map<std::string, std::string>& m) const;

  // Replaces a dimension with an arbitrary affine expression.
  AffineExpr substitute_dim(const std::string& name, const AffineExpr& value) const;
  // Replaces a parameter with a concrete value.
  AffineExpr substitute_param(const std::string& name, int64_t value) const;
  // Reclassifies a parameter as a dimension of the same name.
  AffineExpr param_to_dim(const std::string& name) const;

  bool operator==(const AffineExpr& o) const = default;

private:
  std::map<std::string, int64_t> coeffs_;
  std::map<std::string, int64_t> param_coeffs_;
  int64_t constant_ = 0;
};

enum class ConstraintKind {
  NonNegative,  // expr >= 0
  EqualsZero,   // expr == 0
};

struct Constraint {
  AffineExpr expr;
  ConstraintKind kind = ConstraintKind::NonNegative;

  bool operator==(const Constraint& o) const = default;
};

Constraint constraint_ge0(AffineExpr e);
Constraint constraint_eq0(AffineExpr e);
// a <= b, a < b, a == b as constraints.
Constraint constraint_le(const AffineExpr& a, const AffineExpr& b);
Constraint constraint_lt(const AffineExpr& a, const AffineExpr& b);
Constraint constraint_eq(const AffineExpr& a, const AffineExpr& b);

// Result of integer tightening. For EqualsZero with variable-coefficient gcd g
// not dividing the constant the constraint is proven infeasible; otherwise the
// constraint is divided through (floor division of the constant for
// NonNegative, exact division for EqualsZero). Constant-only constraints
// resolve to trivially true or infeasible.
struct GcdNormalized {
  std::optional<Constraint> constraint;  // empty when trivially true or infeasible
  bool infeasible = false;
  bool trivially_true = false;
};

GcdNormalized gcd_normalize(const Constraint& c);

// Checked signed arithmetic; throws on int64 overflow.
int64_t checked_add(int64_t a, int64_t b);
int64_t checked_mul(int64_t a, int64_t b);
// Floor division with nonzero divisor.
int64_t floor_div(int64_t a, int64_t b);

}  // namespace raceset
