// Copyright (c) raceset contributors.
// SPDX-License-Identifier: Apache-2.0
#include "fm.hpp"

#include <algorithm>
#include <numeric>

namespace raceset::fm {

Lin from_constraint(const Constraint& cst) {
  Lin l;
  for (const auto& [n, v] : cst.expr.coeffs()) l.c[n] = v;
  for (const auto& [n, v] : cst.expr.param_coeffs()) {
    // Dim and param names are disjoint, so plain insert is safe.
    l.c[n] = v;
  }
  l.k = cst.expr.constant_term();
  l.eq = cst.kind == ConstraintKind::EqualsZero;
  return l;
}

Constraint to_constraint(const Lin& l, const std::set<std::string>& param_names) {
  AffineExpr e;
  for (const auto& [n, v] : l.c) {
    if (param_names.count(n))
      e.set_param_coeff(n, v);
    else
      e.set_dim_coeff(n, v);
  }
  e.set_constant(l.k);
  return Constraint{e, l.eq ? ConstraintKind::EqualsZero : ConstraintKind::NonNegative};
}

TightenResult tighten(Lin& l) {
  int64_t g = 0;
  for (const auto& [n, v] : l.c) g = std::gcd(g, v < 0 ? -v : v);
  if (g == 0) {
    bool ok = l.eq ? (l.k == 0) : (l.k >= 0);
    return ok ? TightenResult::TriviallyTrue : TightenResult::Infeasible;
  }
  if (g == 1) return TightenResult::Keep;
  if (l.eq && l.k % g != 0) return TightenResult::Infeasible;
  for (auto& [n, v] : l.c) v /= g;
  l.k = l.eq ? l.k / g : floor_div(l.k, g);
  return TightenResult::Keep;
}

bool normalize_system(std::vector<Lin>& sys) {
  // key: coefficient vector + eq flag; value: index of kept row
  std::map<std::pair<bool, std::map<std::string, int64_t>>, size_t> seen;
  std::vector<Lin> out;
  for (auto& l : sys) {
    switch (tighten(l)) {
    case TightenResult::Infeasible: return false;
    case TightenResult::TriviallyTrue: continue;
    case TightenResult::Keep: break;
    }
    auto key = std::make_pair(l.eq, l.c);
    auto it = seen.find(key);
    if (it == seen.end()) {
      seen[key] = out.size();
      out.push_back(std::move(l));
    } else {
      Lin& kept = out[it->second];
      if (l.eq) {
        if (kept.k != l.k) return false;  // same form equal to two constants
      } else {
        kept.k = std::min(kept.k, l.k);  // tightest lower bound wins
      }
    }
  }
  // An equality and inequalities with the same coefficients: equality decides.
  sys = std::move(out);
  return true;
}

void substitute(std::vector<Lin>& sys, const std::string& v, const Lin& value_expr) {
  for (auto& l : sys) {
    int64_t cv = l.coeff(v);
    if (cv == 0) continue;
    l.c.erase(v);
    for (const auto& [n, w] : value_expr.c) {
      int64_t nv = checked_add(l.coeff(n), checked_mul(cv, w));
      if (nv == 0)
        l.c.erase(n);
      else
        l.c[n] = nv;
    }
    l.k = checked_add(l.k, checked_mul(cv, value_expr.k));
  }
}

void substitute_const(std::vector<Lin>& sys, const std::string& v, int64_t value) {
  Lin ve;
  ve.k = value;
  substitute(sys, v, ve);
}

std::optional<size_t> find_unit_equality(const std::vector<Lin>& sys, const std::string& v) {
  for (size_t i = 0; i < sys.size(); ++i) {
    if (!sys[i].eq) continue;
    int64_t c = sys[i].coeff(v);
    if (c == 1 || c == -1) return i;
  }
  return std::nullopt;
}

bool eliminate(std::vector<Lin>& sys, const std::string& v, ElimInfo* info) {
  if (!normalize_system(sys)) return false;

  if (auto idx = find_unit_equality(sys, v)) {
    // v == value_expr with unit coefficient: integer-exact substitution.
    Lin eq = sys[*idx];
    sys.erase(sys.begin() + static_cast<ptrdiff_t>(*idx));
    int64_t cv = eq.coeff(v);
    eq.c.erase(v);
    // c*v + rest = 0  =>  v = -rest/c ; with c == +-1: v = -c*rest.
    Lin value;
    for (auto& [n, w] : eq.c) value.c[n] = checked_mul(-cv, w);
    value.k = checked_mul(-cv, eq.k);
    substitute(sys, v, value);
    return normalize_system(sys);
  }

  std::vector<Lin> keep, lowers, uppers;
  for (auto& l : sys) {
    int64_t c = l.coeff(v);
    if (c == 0) {
      keep.push_back(std::move(l));
      continue;
    }
    if (info && c != 1 && c != -1) info->exact = false;
    if (l.eq) {
      Lin a = l, b = l;
      a.eq = false;
      b.eq = false;
      for (auto& [n, w] : b.c) w = -w;
      b.k = -b.k;
      (a.coeff(v) > 0 ? lowers : uppers).push_back(a);
      (b.coeff(v) > 0 ? lowers : uppers).push_back(b);
    } else if (c > 0) {
      lowers.push_back(std::move(l));
    } else {
      uppers.push_back(std::move(l));
    }
  }
  for (const auto& lo : lowers) {
    for (const auto& up : uppers) {
      // lo: a*v + L >= 0 (a>0), up: -b*v + U >= 0 (b>0)  =>  b*L + a*U >= 0
      int64_t a = lo.coeff(v);
      int64_t b = -up.coeff(v);
      Lin sum;
      for (const auto& [n, w] : lo.c) {
        if (n == v) continue;
        sum.c[n] = checked_mul(b, w);
      }
      for (const auto& [n, w] : up.c) {
        if (n == v) continue;
        int64_t nv = checked_add(sum.coeff(n), checked_mul(a, w));
        if (nv == 0)
          sum.c.erase(n);
        else
          sum.c[n] = nv;
      }
      sum.k = checked_add(checked_mul(b, lo.k), checked_mul(a, up.k));
      keep.push_back(std::move(sum));
    }
  }
  sys = std::move(keep);
  return normalize_system(sys);
}

bool rationally_infeasible(std::vector<Lin> sys) {
  if (!normalize_system(sys)) return true;
  // Greedy minimal-fill order; give up (sound "not proven") on blowup.
  const size_t kRowCap = 4000;
  while (true) {
    std::set<std::string> vars;
    for (const auto& l : sys)
      for (const auto& [n, v] : l.c) vars.insert(n);
    if (vars.empty()) break;
    std::string best;
    size_t best_cost = SIZE_MAX;
    for (const auto& v : vars) {
      size_t lowers = 0, uppers = 0, eqs = 0;
      for (const auto& l : sys) {
        int64_t c = l.coeff(v);
        if (c == 0) continue;
        if (l.eq)
          ++eqs;
        else if (c > 0)
          ++lowers;
        else
          ++uppers;
      }
      size_t cost = find_unit_equality(sys, v) ? 0 : (lowers + eqs) * (uppers + eqs);
      if (cost < best_cost) {
        best_cost = cost;
        best = v;
      }
    }
    if (!eliminate(sys, best)) return true;
    if (sys.size() > kRowCap) return false;
  }
  return false;
}

VarBounds bounds_of(const std::vector<Lin>& sys, const std::string& v) {
  VarBounds b;
  for (const auto& l : sys) {
    int64_t c = l.coeff(v);
    if (c == 0) continue;
    if (l.c.size() != 1) continue;  // other variables still free
    if (l.eq) {
      // c*v + k == 0
      if (l.k % c != 0) {
        b.lo = 1;
        b.hi = 0;  // empty
        return b;
      }
      int64_t val = -l.k / c;
      b.lo = b.lo ? std::max(*b.lo, val) : val;
      b.hi = b.hi ? std::min(*b.hi, val) : val;
    } else if (c > 0) {
      // c*v + k >= 0  =>  v >= ceil(-k/c)
      int64_t lo = -floor_div(l.k, c);
      b.lo = b.lo ? std::max(*b.lo, lo) : lo;
    } else {
      // c*v + k >= 0, c<0  =>  v <= floor(k/(-c))
      int64_t hi = floor_div(l.k, -c);
      b.hi = b.hi ? std::min(*b.hi, hi) : hi;
    }
  }
  return b;
}

namespace {

bool satisfies(const std::vector<Lin>& sys, const std::map<std::string, int64_t>& point) {
  for (const auto& l : sys) {
    int64_t acc = l.k;
    for (const auto& [n, c] : l.c) {
      auto it = point.find(n);
      if (it == point.end()) return false;
      acc = checked_add(acc, checked_mul(c, it->second));
    }
    if (l.eq ? acc != 0 : acc < 0) return false;
  }
  return true;
}

struct SearchCtx {
  const std::vector<Lin>* original;
  const std::vector<std::string>* vars;
  std::vector<std::vector<Lin>> levels;  // levels[i] mentions vars[0..i]
  SearchOptions opts;
  int64_t visited = 0;
  bool budget_hit = false;
  bool used_fallback = false;
  std::map<std::string, std::pair<int64_t, int64_t>> box;
  std::map<std::string, int64_t> assign;

  bool recurse(size_t level);
};

bool SearchCtx::recurse(size_t level) {
  if (level == vars->size()) return satisfies(*original, assign);
  const std::string& v = (*vars)[level];
  std::vector<Lin> sys = levels[level];
  for (const auto& [name, val] : assign) substitute_const(sys, name, val);
  if (!normalize_system(sys)) return false;
  VarBounds b = bounds_of(sys, v);
  int64_t lo, hi;
  if (b.lo && b.hi) {
    lo = *b.lo;
    hi = *b.hi;
  } else if (b.lo) {
    used_fallback = true;
    lo = *b.lo;
    hi = checked_add(lo, 2 * opts.fallback_halfwidth);
  } else if (b.hi) {
    used_fallback = true;
    hi = *b.hi;
    lo = checked_add(hi, -2 * opts.fallback_halfwidth);
  } else {
    used_fallback = true;
    lo = -opts.fallback_halfwidth;
    hi = opts.fallback_halfwidth;
  }
  auto it = box.find(v);
  if (it == box.end()) {
    box.emplace(v, std::make_pair(lo, hi));
  } else {
    it->second.first = std::min(it->second.first, lo);
    it->second.second = std::max(it->second.second, hi);
  }
  for (int64_t x = lo; x <= hi; ++x) {
    if (++visited > opts.budget) {
      budget_hit = true;
      return false;
    }
    assign[v] = x;
    if (recurse(level + 1)) return true;
  }
  assign.erase(v);
  return false;
}

}  // namespace

SearchResult find_point(const std::vector<Lin>& sys, const std::vector<std::string>& vars,
                        const SearchOptions& opts) {
  SearchResult res;
  std::vector<Lin> norm = sys;
  if (!normalize_system(norm)) {
    res.exhaustive = true;  // infeasible: vacuously complete
    return res;
  }
  if (vars.empty()) {
    // Constant system already normalized: feasible.
    res.point = std::map<std::string, int64_t>{};
    res.exhaustive = true;
    return res;
  }

  SearchCtx ctx;
  ctx.original = &norm;
  ctx.vars = &vars;
  ctx.opts = opts;
  // levels[i]: all vars after i eliminated.
  ctx.levels.resize(vars.size());
  ctx.levels[vars.size() - 1] = norm;
  for (size_t i = vars.size() - 1; i > 0; --i) {
    std::vector<Lin> next = ctx.levels[i];
    if (!eliminate(next, vars[i])) {
      res.exhaustive = true;
      return res;
    }
    ctx.levels[i - 1] = std::move(next);
  }
  bool found = ctx.recurse(0);
  res.box_used = ctx.box;
  if (found) {
    res.point = ctx.assign;
    return res;
  }
  res.exhaustive = !ctx.budget_hit && !ctx.used_fallback;
  return res;
}

}  // namespace raceset::fm
