// Copyright (c) raceset contributors.
// SPDX-License-Identifier: Apache-2.0
#include "raceset/intset.hpp"

#include <algorithm>
#include <set>

#include "fm.hpp"

namespace raceset {

namespace {

std::string fresh_name(const std::set<std::string>& taken, const std::string& stem) {
  for (int i = 0;; ++i) {
    std::string cand = stem + std::to_string(i);
    if (!taken.count(cand)) return cand;
  }
}

std::set<std::string> name_set(const std::vector<std::string>& v) {
  return std::set<std::string>(v.begin(), v.end());
}

Constraint rename_constraint(const Constraint& c, const std::map<std::string, std::string>& m) {
  return Constraint{c.expr.rename_dims(m), c.kind};
}

// Canonicalizes a disjunct's existential names to $e0..$eN.
Disjunct canonical_exists(Disjunct d) {
  if (d.exists.empty()) return d;
  std::map<std::string, std::string> m;
  std::vector<std::string> fresh;
  for (size_t i = 0; i < d.exists.size(); ++i) {
    std::string name = "$e" + std::to_string(i);
    if (name != d.exists[i]) m[d.exists[i]] = name;
    fresh.push_back(name);
  }
  if (!m.empty())
    for (auto& c : d.constraints) c = rename_constraint(c, m);
  d.exists = std::move(fresh);
  return d;
}

}  // namespace

IntSet::IntSet(std::string space, std::vector<std::string> dims, std::vector<std::string> params)
    : space_(std::move(space)), dims_(std::move(dims)), params_(std::move(params)) {
  std::sort(params_.begin(), params_.end());
  params_.erase(std::unique(params_.begin(), params_.end()), params_.end());
  std::set<std::string> seen;
  for (const auto& d : dims_) {
    if (!seen.insert(d).second) throw Error(ErrorKind::InvalidSet, "duplicate dimension " + d);
  }
  for (const auto& p : params_) {
    if (seen.count(p))
      throw Error(ErrorKind::InvalidSet, "name used as both dim and param: " + p);
  }
}

IntSet IntSet::universe(std::string space, std::vector<std::string> dims,
                        std::vector<std::string> params) {
  IntSet s(std::move(space), std::move(dims), std::move(params));
  s.add_disjunct(Disjunct{});
  return s;
}

bool IntSet::has_existentials() const {
  for (const auto& d : disjuncts_)
    if (!d.exists.empty()) return true;
  return false;
}

void IntSet::declare_param(const std::string& name) {
  if (std::find(dims_.begin(), dims_.end(), name) != dims_.end())
    throw Error(ErrorKind::InvalidSet, "name used as both dim and param: " + name);
  auto it = std::lower_bound(params_.begin(), params_.end(), name);
  if (it == params_.end() || *it != name) params_.insert(it, name);
}

bool IntSet::is_param(const std::string& name) const {
  return std::binary_search(params_.begin(), params_.end(), name);
}

void IntSet::add_disjunct(Disjunct d) {
  d = canonical_exists(std::move(d));
  std::set<std::string> dim_names = name_set(dims_);
  std::set<std::string> ex_names = name_set(d.exists);
  std::vector<Constraint> kept;
  for (const auto& c : d.constraints) {
    for (const auto& [n, v] : c.expr.coeffs()) {
      if (!dim_names.count(n) && !ex_names.count(n))
        throw Error(ErrorKind::InvalidSet, "constraint uses undeclared dimension " + n +
                                               " in space " + space_);
    }
    for (const auto& [n, v] : c.expr.param_coeffs()) {
      if (!is_param(n))
        throw Error(ErrorKind::UndeclaredParameter, n + " in space " + space_);
    }
    GcdNormalized g = gcd_normalize(c);
    if (g.infeasible) return;  // statically empty disjunct: not added
    if (g.trivially_true) continue;
    kept.push_back(*g.constraint);
  }
  d.constraints = std::move(kept);
  if (disjuncts_.size() + 1 > kDisjunctLimit)
    throw Error(ErrorKind::DisjunctLimit, space_ + " exceeds " + std::to_string(kDisjunctLimit));
  disjuncts_.push_back(std::move(d));
}

void IntSet::add_constraints(std::vector<Constraint> cs) {
  Disjunct d;
  d.constraints = std::move(cs);
  add_disjunct(std::move(d));
}

IntSet IntSet::renamed_dims(const std::vector<std::string>& new_dims) const {
  if (new_dims.size() != dims_.size())
    throw Error(ErrorKind::ArityMismatch,
                space_ + ": rename to " + std::to_string(new_dims.size()) + " dims");
  std::map<std::string, std::string> m;
  for (size_t i = 0; i < dims_.size(); ++i)
    if (dims_[i] != new_dims[i]) m[dims_[i]] = new_dims[i];
  IntSet out(space_, new_dims, params_);
  for (const auto& d : disjuncts_) {
    Disjunct nd = d;
    // Keep existentials clear of the incoming names.
    std::set<std::string> taken = name_set(new_dims);
    std::map<std::string, std::string> exren;
    for (auto& e : nd.exists) {
      if (taken.count(e)) {
        std::string f = fresh_name(taken, "$r");
        exren[e] = f;
        e = f;
      }
      taken.insert(e);
    }
    for (auto& c : nd.constraints) {
      if (!exren.empty()) c = rename_constraint(c, exren);
      c = rename_constraint(c, m);
    }
    out.add_disjunct(std::move(nd));
  }
  return out;
}

IntSet IntSet::with_space(std::string space) const {
  IntSet out = *this;
  out.space_ = std::move(space);
  return out;
}

IntSet IntSet::substitute_params(const std::map<std::string, int64_t>& values) const {
  std::vector<std::string> keep;
  for (const auto& p : params_)
    if (!values.count(p)) keep.push_back(p);
  IntSet out(space_, dims_, keep);
  for (const auto& d : disjuncts_) {
    Disjunct nd;
    nd.exists = d.exists;
    for (const auto& c : d.constraints) {
      AffineExpr e = c.expr;
      for (const auto& [p, v] : values) e = e.substitute_param(p, v);
      nd.constraints.push_back(Constraint{e, c.kind});
    }
    out.add_disjunct(std::move(nd));
  }
  return out;
}

bool IntSet::contains(const std::vector<int64_t>& point,
                      const std::map<std::string, int64_t>& param_values) const {
  if (point.size() != dims_.size())
    throw Error(ErrorKind::ArityMismatch, space_ + ": point arity " + std::to_string(point.size()));
  for (const auto& d : disjuncts_) {
    std::vector<fm::Lin> sys;
    sys.reserve(d.constraints.size());
    for (const auto& c : d.constraints) sys.push_back(fm::from_constraint(c));
    for (size_t i = 0; i < dims_.size(); ++i) fm::substitute_const(sys, dims_[i], point[i]);
    for (const auto& p : params_) {
      auto it = param_values.find(p);
      if (it == param_values.end()) {
        // Only required if actually referenced.
        bool used = false;
        for (const auto& l : sys) used = used || l.mentions(p);
        if (used) throw Error(ErrorKind::UndeclaredParameter, "no value for parameter " + p);
        continue;
      }
      fm::substitute_const(sys, p, it->second);
    }
    if (d.exists.empty()) {
      bool ok = true;
      for (auto& l : sys) {
        auto t = fm::tighten(l);
        if (t == fm::TightenResult::Infeasible) {
          ok = false;
          break;
        }
        if (t == fm::TightenResult::Keep) {
          // Some name is still free: malformed usage.
          throw Error(ErrorKind::UndeclaredParameter, "unbound name in constraint");
        }
      }
      if (ok) return true;
      continue;
    }
    fm::SearchOptions so;
    so.budget = 200'000;
    fm::SearchResult r = fm::find_point(sys, d.exists, so);
    if (r.point) return true;
    if (!r.exhaustive)
      throw Error(ErrorKind::UnboundedSearch, "existential witness search not exhaustive");
  }
  return false;
}

namespace {

std::vector<std::string> union_params(const IntSet& a, const IntSet& b) {
  std::vector<std::string> ps = a.params();
  for (const auto& p : b.params())
    if (!std::binary_search(ps.begin(), ps.end(), p)) ps.push_back(p);
  std::sort(ps.begin(), ps.end());
  return ps;
}

void check_space(const IntSet& a, const IntSet& b) {
  if (a.space() != b.space())
    throw Error(ErrorKind::SpaceMismatch, a.space() + " vs " + b.space());
  if (a.arity() != b.arity())
    throw Error(ErrorKind::SpaceMismatch, a.space() + ": arity " + std::to_string(a.arity()) +
                                              " vs " + std::to_string(b.arity()));
}

// Merges two disjuncts, freshening existentials to avoid capture.
Disjunct merge_disjuncts(const Disjunct& x, const Disjunct& y) {
  Disjunct out = x;
  std::set<std::string> taken = name_set(x.exists);
  std::map<std::string, std::string> ren;
  for (const auto& e : y.exists) {
    std::string f = e;
    if (taken.count(f)) f = fresh_name(taken, "$y");
    if (f != e) ren[e] = f;
    taken.insert(f);
    out.exists.push_back(f);
  }
  for (const auto& c : y.constraints)
    out.constraints.push_back(ren.empty() ? c : rename_constraint(c, ren));
  return out;
}

// Cheap per-disjunct feasibility filter used to keep subtract/intersect small.
bool disjunct_feasible(const Disjunct& d) {
  std::vector<fm::Lin> sys;
  for (const auto& c : d.constraints) sys.push_back(fm::from_constraint(c));
  return !fm::rationally_infeasible(std::move(sys));
}

}  // namespace

IntSet intersect(const IntSet& a, const IntSet& b) {
  check_space(a, b);
  IntSet bb = b.renamed_dims(a.dims());
  IntSet out(a.space(), a.dims(), union_params(a, bb));
  for (const auto& da : a.disjuncts()) {
    for (const auto& db : bb.disjuncts()) {
      Disjunct m = merge_disjuncts(da, db);
      if (!disjunct_feasible(m)) continue;
      out.add_disjunct(std::move(m));
    }
  }
  return out;
}

IntSet union_same(const IntSet& a, const IntSet& b) {
  check_space(a, b);
  IntSet bb = b.renamed_dims(a.dims());
  IntSet out(a.space(), a.dims(), union_params(a, bb));
  for (const auto& d : a.disjuncts()) out.add_disjunct(d);
  for (const auto& d : bb.disjuncts()) out.add_disjunct(d);
  return out;
}

SetCollection set_union(const IntSet& a, const IntSet& b) {
  SetCollection c;
  c.unite(a);
  c.unite(b);
  return c;
}

IntSet subtract(const IntSet& a, const IntSet& b) {
  check_space(a, b);
  IntSet bb = b.renamed_dims(a.dims());
  for (const auto& d : bb.disjuncts()) {
    if (!d.exists.empty())
      throw Error(ErrorKind::InvalidSet, "subtract: right operand has existentials");
  }
  IntSet cur = a;
  for (const auto& db : bb.disjuncts()) {
    // cur := cur and not(db); negation of a conjunction is a disjunction of
    // complemented constraints (integer complement of e>=0 is -e-1>=0).
    IntSet next(a.space(), a.dims(), union_params(cur, bb));
    for (const auto& dc : cur.disjuncts()) {
      auto emit = [&](Constraint neg) {
        Disjunct nd = dc;
        nd.constraints.push_back(std::move(neg));
        if (!disjunct_feasible(nd)) return;
        next.add_disjunct(std::move(nd));
      };
      for (const auto& c : db.constraints) {
        AffineExpr e = c.expr;
        if (c.kind == ConstraintKind::NonNegative) {
          emit(constraint_ge0(-e - AffineExpr::constant(1)));
        } else {
          emit(constraint_ge0(e - AffineExpr::constant(1)));
          emit(constraint_ge0(-e - AffineExpr::constant(1)));
        }
      }
    }
    cur = std::move(next);
  }
  return cur;
}

IntSet project_out(const IntSet& s, const std::vector<std::string>& kill) {
  std::set<std::string> kill_set(kill.begin(), kill.end());
  for (const auto& k : kill) {
    if (std::find(s.dims().begin(), s.dims().end(), k) == s.dims().end())
      throw Error(ErrorKind::InvalidSet, "project_out: " + k + " is not a dimension");
  }
  std::vector<std::string> keep;
  for (const auto& d : s.dims())
    if (!kill_set.count(d)) keep.push_back(d);

  IntSet out(s.space(), keep, s.params());
  for (const auto& d : s.disjuncts()) {
    std::vector<fm::Lin> sys;
    for (const auto& c : d.constraints) sys.push_back(fm::from_constraint(c));
    std::vector<std::string> exists = d.exists;
    std::set<std::string> taken;
    for (const auto& n : s.dims()) taken.insert(n);
    for (const auto& n : s.params()) taken.insert(n);
    for (const auto& n : exists) taken.insert(n);

    bool dead = false;
    for (const auto& v : kill) {
      if (auto idx = fm::find_unit_equality(sys, v)) {
        std::vector<fm::Lin> copy = sys;
        if (!fm::eliminate(copy, v)) {
          dead = true;
          break;
        }
        sys = std::move(copy);
        continue;
      }
      std::vector<fm::Lin> shadow = sys;
      fm::ElimInfo info;
      if (!fm::eliminate(shadow, v, &info)) {
        dead = true;
        break;
      }
      if (info.exact) {
        sys = std::move(shadow);
        continue;
      }
      // Keep the exact rows under a fresh existential next to the shadow.
      std::string e = fresh_name(taken, "$p");
      taken.insert(e);
      for (const auto& l : sys) {
        if (!l.mentions(v)) continue;
        fm::Lin r = l;
        auto it = r.c.find(v);
        r.c[e] = it->second;
        r.c.erase(it);
        shadow.push_back(std::move(r));
      }
      exists.push_back(e);
      sys = std::move(shadow);
    }
    if (dead) continue;

    Disjunct nd;
    nd.exists = std::move(exists);
    std::set<std::string> param_names(s.params().begin(), s.params().end());
    for (const auto& l : sys) nd.constraints.push_back(fm::to_constraint(l, param_names));
    out.add_disjunct(std::move(nd));
  }
  return out;
}

// ---------------------------------------------------------------------------
// IntRel

namespace {

std::vector<std::string> disjoint_out_dims(const std::vector<std::string>& in,
                                           std::vector<std::string> out) {
  std::set<std::string> taken(in.begin(), in.end());
  for (auto& o : out) {
    while (taken.count(o)) o += "'";
    taken.insert(o);
  }
  return out;
}

std::vector<std::string> concat(const std::vector<std::string>& a,
                                const std::vector<std::string>& b) {
  std::vector<std::string> r = a;
  r.insert(r.end(), b.begin(), b.end());
  return r;
}

std::string rel_space_label(const std::string& in, const std::string& out) {
  return in + " -> " + out;
}

}  // namespace

IntRel::IntRel(std::string in_space, std::vector<std::string> in_dims, std::string out_space,
               std::vector<std::string> out_dims, std::vector<std::string> params)
    : in_space_(std::move(in_space)), out_space_(std::move(out_space)), in_arity_(in_dims.size()) {
  std::vector<std::string> od = disjoint_out_dims(in_dims, std::move(out_dims));
  set_ = IntSet(rel_space_label(in_space_, out_space_), concat(in_dims, od), std::move(params));
}

IntRel IntRel::universe(std::string in_space, std::vector<std::string> in_dims,
                        std::string out_space, std::vector<std::string> out_dims,
                        std::vector<std::string> params) {
  IntRel r(std::move(in_space), std::move(in_dims), std::move(out_space), std::move(out_dims),
           std::move(params));
  r.add_disjunct(Disjunct{});
  return r;
}

std::vector<std::string> IntRel::in_dims() const {
  return std::vector<std::string>(set_.dims().begin(), set_.dims().begin() + in_arity_);
}

std::vector<std::string> IntRel::out_dims() const {
  return std::vector<std::string>(set_.dims().begin() + in_arity_, set_.dims().end());
}

bool IntRel::contains(const std::vector<int64_t>& in_point, const std::vector<int64_t>& out_point,
                      const std::map<std::string, int64_t>& param_values) const {
  std::vector<int64_t> p = in_point;
  p.insert(p.end(), out_point.begin(), out_point.end());
  return set_.contains(p, param_values);
}

IntRel IntRel::substitute_params(const std::map<std::string, int64_t>& values) const {
  IntRel r = *this;
  r.set_ = set_.substitute_params(values);
  return r;
}

IntRel IntRel::renamed(const std::vector<std::string>& in_dims,
                       const std::vector<std::string>& out_dims) const {
  if (in_dims.size() != in_arity_ || out_dims.size() != out_arity())
    throw Error(ErrorKind::ArityMismatch, "relation rename");
  IntRel r = *this;
  std::vector<std::string> od = disjoint_out_dims(in_dims, out_dims);
  r.set_ = set_.renamed_dims(concat(in_dims, od));
  return r;
}

IntRel IntRel::from_set(IntSet s, std::string in_space, std::string out_space, size_t in_arity) {
  if (in_arity > s.arity()) throw Error(ErrorKind::ArityMismatch, "from_set");
  IntRel r;
  r.in_space_ = std::move(in_space);
  r.out_space_ = std::move(out_space);
  r.in_arity_ = in_arity;
  r.set_ = std::move(s);
  r.set_ = r.set_.with_space(rel_space_label(r.in_space_, r.out_space_));
  return r;
}

namespace {
void check_rel_spaces(const IntRel& a, const IntRel& b) {
  if (a.in_space() != b.in_space() || a.out_space() != b.out_space() ||
      a.in_arity() != b.in_arity() || a.out_arity() != b.out_arity())
    throw Error(ErrorKind::SpaceMismatch, a.as_set().space() + " vs " + b.as_set().space());
}
}  // namespace

IntRel intersect(const IntRel& a, const IntRel& b) {
  check_rel_spaces(a, b);
  IntRel bb = b.renamed(a.in_dims(), a.out_dims());
  return IntRel::from_set(intersect(a.as_set(), bb.as_set()), a.in_space(), a.out_space(),
                          a.in_arity());
}

IntRel union_same(const IntRel& a, const IntRel& b) {
  check_rel_spaces(a, b);
  IntRel bb = b.renamed(a.in_dims(), a.out_dims());
  return IntRel::from_set(union_same(a.as_set(), bb.as_set()), a.in_space(), a.out_space(),
                          a.in_arity());
}

IntRel subtract(const IntRel& a, const IntRel& b) {
  check_rel_spaces(a, b);
  IntRel bb = b.renamed(a.in_dims(), a.out_dims());
  return IntRel::from_set(subtract(a.as_set(), bb.as_set()), a.in_space(), a.out_space(),
                          a.in_arity());
}

IntRel inverse(const IntRel& r) {
  std::vector<std::string> in = r.in_dims();
  std::vector<std::string> out = r.out_dims();
  std::vector<std::string> swapped = concat(out, in);
  IntSet s(rel_space_label(r.out_space(), r.in_space()), swapped, r.as_set().params());
  for (const auto& d : r.as_set().disjuncts()) s.add_disjunct(d);
  return IntRel::from_set(std::move(s), r.out_space(), r.in_space(), out.size());
}

IntRel compose(const IntRel& r1, const IntRel& r2) {
  if (r1.out_space() != r2.in_space() || r1.out_arity() != r2.in_arity())
    throw Error(ErrorKind::SpaceMismatch,
                "compose: " + r1.out_space() + " vs " + r2.in_space());

  // Shared tuple gets internal names, then is projected out.
  std::vector<std::string> mids;
  for (size_t i = 0; i < r1.out_arity(); ++i) mids.push_back("$m" + std::to_string(i));

  IntRel a = r1.renamed(r1.in_dims(), mids);
  std::vector<std::string> out_names = disjoint_out_dims(concat(a.in_dims(), mids), r2.out_dims());
  IntRel b = r2.renamed(mids, out_names);

  std::vector<std::string> all = concat(a.in_dims(), concat(mids, out_names));
  std::vector<std::string> ps = a.as_set().params();
  for (const auto& p : b.as_set().params())
    if (!std::binary_search(ps.begin(), ps.end(), p)) ps.push_back(p);
  std::sort(ps.begin(), ps.end());

  IntSet joined(rel_space_label(r1.in_space(), r2.out_space()), all, ps);
  for (const auto& da : a.as_set().disjuncts()) {
    for (const auto& db : b.as_set().disjuncts()) {
      Disjunct m = merge_disjuncts(da, db);
      if (!disjunct_feasible(m)) continue;
      joined.add_disjunct(std::move(m));
    }
  }
  IntSet projected = project_out(joined, mids);
  return IntRel::from_set(std::move(projected), r1.in_space(), r2.out_space(), r1.in_arity());
}

IntRel lex_lt(size_t arity, const std::string& in_space, const std::string& out_space) {
  if (arity == 0) throw Error(ErrorKind::ArityMismatch, "lex_lt of zero-length vectors");
  std::vector<std::string> tin, tout;
  for (size_t i = 0; i < arity; ++i) {
    tin.push_back("t" + std::to_string(i));
    tout.push_back("u" + std::to_string(i));
  }
  IntRel r(in_space, tin, out_space, tout);
  for (size_t i = 0; i < arity; ++i) {
    Disjunct d;
    for (size_t j = 0; j < i; ++j)
      d.constraints.push_back(constraint_eq(AffineExpr::dim(tin[j]), AffineExpr::dim(tout[j])));
    d.constraints.push_back(constraint_lt(AffineExpr::dim(tin[i]), AffineExpr::dim(tout[i])));
    r.add_disjunct(std::move(d));
  }
  return r;
}

IntRel intersect_domain(const IntRel& r, const IntSet& s) {
  if (s.space() != r.in_space() || s.arity() != r.in_arity())
    throw Error(ErrorKind::SpaceMismatch, "intersect_domain: " + s.space());
  IntSet sd = s.renamed_dims(r.in_dims());
  IntSet out(r.as_set().space(), r.as_set().dims(), union_params(r.as_set(), sd));
  for (const auto& da : r.as_set().disjuncts())
    for (const auto& db : sd.disjuncts()) {
      Disjunct m = merge_disjuncts(da, db);
      if (!disjunct_feasible(m)) continue;
      out.add_disjunct(std::move(m));
    }
  return IntRel::from_set(std::move(out), r.in_space(), r.out_space(), r.in_arity());
}

IntRel intersect_range(const IntRel& r, const IntSet& s) {
  if (s.space() != r.out_space() || s.arity() != r.out_arity())
    throw Error(ErrorKind::SpaceMismatch, "intersect_range: " + s.space());
  IntSet sd = s.renamed_dims(r.out_dims());
  IntSet out(r.as_set().space(), r.as_set().dims(), union_params(r.as_set(), sd));
  for (const auto& da : r.as_set().disjuncts())
    for (const auto& db : sd.disjuncts()) {
      Disjunct m = merge_disjuncts(da, db);
      if (!disjunct_feasible(m)) continue;
      out.add_disjunct(std::move(m));
    }
  return IntRel::from_set(std::move(out), r.in_space(), r.out_space(), r.in_arity());
}

void SetCollection::unite(const IntSet& s) {
  auto it = by_space_.find(s.space());
  if (it == by_space_.end())
    by_space_.emplace(s.space(), s);
  else
    it->second = union_same(it->second, s);
}

void SetCollection::unite(const SetCollection& c) {
  for (const auto& [k, v] : c.by_space_) unite(v);
}

const IntSet* SetCollection::find(const std::string& space) const {
  auto it = by_space_.find(space);
  return it == by_space_.end() ? nullptr : &it->second;
}

}  // namespace raceset
