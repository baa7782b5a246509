// Copyright (c) raceset contributors.
// SPDX-License-Identifier: Apache-2.0
//
// Internal Fourier-Motzkin machinery shared by the set algebra and the
// emptiness decision. Works on flat linear forms where dimensions,
// existentials and parameters are all plain variables.
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "raceset/affine.hpp"

namespace raceset::fm {

struct Lin {
  std::map<std::string, int64_t> c;  // variable coefficients, no zeros
  int64_t k = 0;                     // constant term
  bool eq = false;                   // ==0 when true, >=0 otherwise

  int64_t coeff(const std::string& v) const {
    auto it = c.find(v);
    return it == c.end() ? 0 : it->second;
  }
  bool mentions(const std::string& v) const { return c.count(v) != 0; }
};

Lin from_constraint(const Constraint& cst);
Constraint to_constraint(const Lin& l, const std::set<std::string>& param_names);

enum class TightenResult { Keep, TriviallyTrue, Infeasible };
// gcd tightening; preserves the integer solution set exactly.
TightenResult tighten(Lin& l);

// Normalizes a system: tightens every row, drops trivially-true rows and
// duplicates, keeps the tightest constant per coefficient vector. Returns
// false when some row is infeasible.
bool normalize_system(std::vector<Lin>& sys);

// Substitutes v := value into the system (rational-exact for eliminating a
// variable pinned by a unit-coefficient equality).
void substitute(std::vector<Lin>& sys, const std::string& v, const Lin& value_expr);
void substitute_const(std::vector<Lin>& sys, const std::string& v, int64_t value);

// Finds an equality with coefficient +-1 on v, if any.
std::optional<size_t> find_unit_equality(const std::vector<Lin>& sys, const std::string& v);

// Eliminates v: Gauss on a unit equality when available, otherwise classic
// Fourier-Motzkin pairing (equalities involving v are split first). The
// result is the rational shadow; it is integer-exact when every coefficient
// of v is +-1. Returns false if an infeasible row is derived.
struct ElimInfo {
  bool exact = true;
};
bool eliminate(std::vector<Lin>& sys, const std::string& v, ElimInfo* info = nullptr);

// Rational infeasibility of the system over the given variables (every other
// name appearing in the system is treated as a further variable).
bool rationally_infeasible(std::vector<Lin> sys);

// Rational bounds of v from rows mentioning only v (all other variables must
// already be substituted away in those rows; rows mentioning other variables
// are ignored).
struct VarBounds {
  std::optional<int64_t> lo, hi;
};
VarBounds bounds_of(const std::vector<Lin>& sys, const std::string& v);

struct SearchResult {
  std::optional<std::map<std::string, int64_t>> point;
  // True when every level had finite FM bounds and the budget was not hit, so
  // the absence of a point proves integer emptiness.
  bool exhaustive = false;
  std::map<std::string, std::pair<int64_t, int64_t>> box_used;
};

struct SearchOptions {
  int64_t fallback_halfwidth = 10;
  int64_t budget = 4'000'000;
};

// Searches for an integer point of the system over `vars` (other names must
// not occur). Level systems come from successive FM elimination; candidate
// values are validated against the original system.
SearchResult find_point(const std::vector<Lin>& sys, const std::vector<std::string>& vars,
                        const SearchOptions& opts);

}  // namespace raceset::fm
