// Copyright (c) raceset contributors.
// SPDX-License-Identifier: Apache-2.0
#include "raceset/affine.hpp"

#include <numeric>

namespace raceset {

const char* error_kind_name(ErrorKind k) {
  switch (k) {
  case ErrorKind::SpaceMismatch: return "space mismatch";
  case ErrorKind::ArityMismatch: return "arity mismatch";
  case ErrorKind::UndeclaredParameter: return "undeclared parameter";
  case ErrorKind::DisjunctLimit: return "disjunct limit exceeded";
  case ErrorKind::UnboundedSearch: return "unbounded search";
  case ErrorKind::BoxTooLarge: return "box too large";
  case ErrorKind::Overflow: return "integer overflow";
  case ErrorKind::InvalidSet: return "invalid set";
  case ErrorKind::SyntaxError: return "syntax error";
  case ErrorKind::SsaViolation: return "ssa violation";
  case ErrorKind::UnknownOpcode: return "unknown opcode";
  case ErrorKind::IrreducibleCfg: return "irreducible cfg";
  case ErrorKind::NonAffineBound: return "non-affine bound";
  case ErrorKind::MultipleInductions: return "multiple inductions";
  case ErrorKind::UnsupportedIdPattern: return "unsupported id pattern";
  case ErrorKind::UnsupportedConstruct: return "unsupported construct";
  case ErrorKind::StepLimitExceeded: return "step limit exceeded";
  case ErrorKind::OutOfBounds: return "out of bounds";
  case ErrorKind::CsrInvalid: return "invalid csr";
  case ErrorKind::InvalidModel: return "invalid model";
  case ErrorKind::Io: return "io error";
  }
  return "error";
}

int64_t checked_add(int64_t a, int64_t b) {
  int64_t r;
  if (__builtin_add_overflow(a, b, &r)) throw Error(ErrorKind::Overflow, "add");
  return r;
}

int64_t checked_mul(int64_t a, int64_t b) {
  int64_t r;
  if (__builtin_mul_overflow(a, b, &r)) throw Error(ErrorKind::Overflow, "mul");
  return r;
}

int64_t floor_div(int64_t a, int64_t b) {
  int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

AffineExpr AffineExpr::constant(int64_t c) {
  AffineExpr e;
  e.constant_ = c;
  return e;
}

AffineExpr AffineExpr::dim(const std::string& name, int64_t coeff) {
  AffineExpr e;
  if (coeff != 0) e.coeffs_[name] = coeff;
  return e;
}

AffineExpr AffineExpr::param(const std::string& name, int64_t coeff) {
  AffineExpr e;
  if (coeff != 0) e.param_coeffs_[name] = coeff;
  return e;
}

int64_t AffineExpr::coeff_of_dim(const std::string& name) const {
  auto it = coeffs_.find(name);
  return it == coeffs_.end() ? 0 : it->second;
}

int64_t AffineExpr::coeff_of_param(const std::string& name) const {
  auto it = param_coeffs_.find(name);
  return it == param_coeffs_.end() ? 0 : it->second;
}

void AffineExpr::set_dim_coeff(const std::string& name, int64_t c) {
  if (c == 0)
    coeffs_.erase(name);
  else
    coeffs_[name] = c;
}

void AffineExpr::set_param_coeff(const std::string& name, int64_t c) {
  if (c == 0)
    param_coeffs_.erase(name);
  else
    param_coeffs_[name] = c;
}

static void merge_into(std::map<std::string, int64_t>& dst,
                       const std::map<std::string, int64_t>& src, int64_t sign) {
  for (const auto& [k, v] : src) {
    auto it = dst.find(k);
    int64_t nv = checked_add(it == dst.end() ? 0 : it->second, checked_mul(sign, v));
    if (nv == 0)
      dst.erase(k);
    else
      dst[k] = nv;
  }
}

AffineExpr& AffineExpr::operator+=(const AffineExpr& o) {
  merge_into(coeffs_, o.coeffs_, 1);
  merge_into(param_coeffs_, o.param_coeffs_, 1);
  constant_ = checked_add(constant_, o.constant_);
  return *this;
}

AffineExpr AffineExpr::operator+(const AffineExpr& o) const {
  AffineExpr r = *this;
  r += o;
  return r;
}

AffineExpr AffineExpr::operator-(const AffineExpr& o) const {
  AffineExpr r = *this;
  merge_into(r.coeffs_, o.coeffs_, -1);
  merge_into(r.param_coeffs_, o.param_coeffs_, -1);
  r.constant_ = checked_add(r.constant_, -o.constant_);
  return r;
}

AffineExpr AffineExpr::operator-() const { return AffineExpr::constant(0) - *this; }

AffineExpr AffineExpr::scaled(int64_t k) const {
  AffineExpr r;
  if (k == 0) return r;
  for (const auto& [n, c] : coeffs_) r.coeffs_[n] = checked_mul(c, k);
  for (const auto& [n, c] : param_coeffs_) r.param_coeffs_[n] = checked_mul(c, k);
  r.constant_ = checked_mul(constant_, k);
  return r;
}

int64_t AffineExpr::eval(const std::map<std::string, int64_t>& dim_values,
                         const std::map<std::string, int64_t>& param_values) const {
  int64_t acc = constant_;
  for (const auto& [n, c] : coeffs_) {
    auto it = dim_values.find(n);
    if (it == dim_values.end())
      throw Error(ErrorKind::UndeclaredParameter, "no value for dimension " + n);
    acc = checked_add(acc, checked_mul(c, it->second));
  }
  for (const auto& [n, c] : param_coeffs_) {
    auto it = param_values.find(n);
    if (it == param_values.end())
      throw Error(ErrorKind::UndeclaredParameter, "no value for parameter " + n);
    acc = checked_add(acc, checked_mul(c, it->second));
  }
  return acc;
}

AffineExpr AffineExpr::rename_dims(const std::map<std::string, std::string>& m) const {
  AffineExpr r = *this;
  r.coeffs_.clear();
  for (const auto& [n, c] : coeffs_) {
    auto it = m.find(n);
    const std::string& name = it == m.end() ? n : it->second;
    int64_t nv = checked_add(r.coeff_of_dim(name), c);
    r.set_dim_coeff(name, nv);
  }
  return r;
}

AffineExpr AffineExpr::substitute_dim(const std::string& name, const AffineExpr& value) const {
  int64_t c = coeff_of_dim(name);
  if (c == 0) return *this;
  AffineExpr r = *this;
  r.coeffs_.erase(name);
  r += value.scaled(c);
  return r;
}

AffineExpr AffineExpr::substitute_param(const std::string& name, int64_t value) const {
  int64_t c = coeff_of_param(name);
  if (c == 0) return *this;
  AffineExpr r = *this;
  r.param_coeffs_.erase(name);
  r.constant_ = checked_add(r.constant_, checked_mul(c, value));
  return r;
}

AffineExpr AffineExpr::param_to_dim(const std::string& name) const {
  int64_t c = coeff_of_param(name);
  if (c == 0) return *this;
  AffineExpr r = *this;
  r.param_coeffs_.erase(name);
  r.set_dim_coeff(name, checked_add(r.coeff_of_dim(name), c));
  return r;
}

Constraint constraint_ge0(AffineExpr e) { return Constraint{std::move(e), ConstraintKind::NonNegative}; }
Constraint constraint_eq0(AffineExpr e) { return Constraint{std::move(e), ConstraintKind::EqualsZero}; }

Constraint constraint_le(const AffineExpr& a, const AffineExpr& b) { return constraint_ge0(b - a); }

Constraint constraint_lt(const AffineExpr& a, const AffineExpr& b) {
  return constraint_ge0(b - a - AffineExpr::constant(1));
}

Constraint constraint_eq(const AffineExpr& a, const AffineExpr& b) { return constraint_eq0(a - b); }

GcdNormalized gcd_normalize(const Constraint& c) {
  int64_t g = 0;
  for (const auto& [n, v] : c.expr.coeffs()) g = std::gcd(g, v < 0 ? -v : v);
  for (const auto& [n, v] : c.expr.param_coeffs()) g = std::gcd(g, v < 0 ? -v : v);

  GcdNormalized out;
  int64_t k = c.expr.constant_term();
  if (g == 0) {
    // Constant-only constraint.
    bool ok = c.kind == ConstraintKind::EqualsZero ? (k == 0) : (k >= 0);
    if (ok)
      out.trivially_true = true;
    else
      out.infeasible = true;
    return out;
  }
  if (g == 1) {
    out.constraint = c;
    return out;
  }
  if (c.kind == ConstraintKind::EqualsZero && k % g != 0) {
    out.infeasible = true;
    return out;
  }
  Constraint r = c;
  AffineExpr e;
  for (const auto& [n, v] : c.expr.coeffs()) e.set_dim_coeff(n, v / g);
  for (const auto& [n, v] : c.expr.param_coeffs()) e.set_param_coeff(n, v / g);
  e.set_constant(c.kind == ConstraintKind::EqualsZero ? k / g : floor_div(k, g));
  r.expr = e;
  out.constraint = r;
  return out;
}

}  // namespace raceset
