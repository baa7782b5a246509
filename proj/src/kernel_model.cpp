// Copyright (c) raceset contributors.
// SPDX-License-Identifier: Apache-2.0
#include "raceset/kernel_model.hpp"

#include <algorithm>
#include <set>

namespace raceset {

const char* mem_space_name(MemSpace s) {
  switch (s) {
  case MemSpace::Global: return "global";
  case MemSpace::Shared: return "shared";
  case MemSpace::Local: return "local";
  }
  return "?";
}

const char* elem_kind_name(ElemKind k) {
  switch (k) {
  case ElemKind::I32: return "i32";
  case ElemKind::I64: return "i64";
  case ElemKind::F32: return "f32";
  case ElemKind::F64: return "f64";
  }
  return "?";
}

const char* grid_role_name(GridRole r) {
  switch (r) {
  case GridRole::BlockX: return "block.x";
  case GridRole::BlockY: return "block.y";
  case GridRole::BlockZ: return "block.z";
  case GridRole::ThreadX: return "thread.x";
  case GridRole::ThreadY: return "thread.y";
  case GridRole::ThreadZ: return "thread.z";
  }
  return "?";
}

std::optional<GridRole> grid_role_from_name(const std::string& s) {
  if (s == "block.x") return GridRole::BlockX;
  if (s == "block.y") return GridRole::BlockY;
  if (s == "block.z") return GridRole::BlockZ;
  if (s == "thread.x") return GridRole::ThreadX;
  if (s == "thread.y") return GridRole::ThreadY;
  if (s == "thread.z") return GridRole::ThreadZ;
  return std::nullopt;
}

int64_t GridConfig::extent_of(GridRole r) const {
  switch (r) {
  case GridRole::BlockX: return grid[0];
  case GridRole::BlockY: return grid[1];
  case GridRole::BlockZ: return grid[2];
  case GridRole::ThreadX: return block[0];
  case GridRole::ThreadY: return block[1];
  case GridRole::ThreadZ: return block[2];
  }
  return 1;
}

std::optional<GridRole> GridConfig::role_of(const std::string& dim) const {
  for (const auto& b : bindings)
    if (b.dim == dim) return b.role;
  return std::nullopt;
}

size_t PhasedSchedule::arity() const {
  size_t m = 0;
  for (const auto& [k, v] : timestamps) m = std::max(m, v.size());
  return m;
}

const ArrayRef* KernelModel::find_array(const std::string& name) const {
  for (const auto& a : arrays)
    if (a.name == name) return &a;
  return nullptr;
}

const Statement* KernelModel::find_statement(const std::string& label) const {
  for (const auto& s : statements)
    if (s.label == label) return &s;
  return nullptr;
}

void KernelModel::validate() const {
  std::set<std::string> declared(params.begin(), params.end());
  auto check_params = [&](const IntSet& s, const std::string& where) {
    for (const auto& p : s.params())
      if (!declared.count(p))
        throw Error(ErrorKind::UndeclaredParameter, p + " in " + where);
  };

  for (int i = 0; i < 3; ++i) {
    if (grid.block[i] < 1 || grid.grid[i] < 1)
      throw Error(ErrorKind::InvalidModel, "grid extents must be >= 1");
  }
  // Extents above 1 need a bound dimension, or distinct threads collapse.
  const GridRole kRoles[] = {GridRole::BlockX,  GridRole::BlockY,  GridRole::BlockZ,
                             GridRole::ThreadX, GridRole::ThreadY, GridRole::ThreadZ};
  for (GridRole r : kRoles) {
    if (grid.extent_of(r) <= 1) continue;
    bool bound = false;
    for (const auto& b : grid.bindings) bound = bound || b.role == r;
    if (!bound)
      throw Error(ErrorKind::InvalidModel,
                  std::string(grid_role_name(r)) + " extent above 1 has no bound dimension");
  }

  std::vector<std::string> bound_dims;
  for (const auto& b : grid.bindings) bound_dims.push_back(b.dim);

  size_t ts_arity = schedule.arity();
  for (const auto& st : statements) {
    check_params(st.domain, "domain of " + st.label);
    if (st.domain.space() != st.label)
      throw Error(ErrorKind::InvalidModel, "domain space of " + st.label);
    // Bound dims lead every statement domain.
    if (st.domain.arity() < bound_dims.size())
      throw Error(ErrorKind::InvalidModel, st.label + ": missing grid-bound dims");
    for (size_t i = 0; i < bound_dims.size(); ++i)
      if (st.domain.dims()[i] != bound_dims[i])
        throw Error(ErrorKind::InvalidModel,
                    st.label + ": grid-bound dims must lead the domain tuple");

    auto check_access = [&](const Access& a, const char* kindname) {
      const ArrayRef* arr = find_array(a.array);
      if (!arr)
        throw Error(ErrorKind::InvalidModel,
                    st.label + " " + kindname + "s undeclared array " + a.array);
      if (a.rel.in_space() != st.label || a.rel.in_arity() != st.domain.arity())
        throw Error(ErrorKind::InvalidModel,
                    st.label + ": access in-tuple must match the statement domain");
      if (a.rel.out_space() != a.array || a.rel.out_arity() != arr->arity)
        throw Error(ErrorKind::InvalidModel,
                    st.label + ": access out-tuple must match array " + a.array);
      check_params(a.rel.as_set(), st.label + " access to " + a.array);
    };
    for (const auto& a : st.reads) check_access(a, "read");
    for (const auto& a : st.writes) check_access(a, "write");

    auto ts = schedule.timestamps.find(st.label);
    if (ts == schedule.timestamps.end())
      throw Error(ErrorKind::InvalidModel, "no schedule entry for " + st.label);
    if (ts->second.size() != ts_arity)
      throw Error(ErrorKind::ArityMismatch, "schedule timestamp arity for " + st.label);
    // Phase components never depend on thread dims.
    size_t phase_comps = schedule.has_warp_phase ? 2 : 1;
    for (size_t c = 0; c < std::min(phase_comps, ts->second.size()); ++c) {
      for (const auto& bd : bound_dims)
        if (ts->second[c].coeff_of_dim(bd) != 0)
          throw Error(ErrorKind::InvalidModel,
                      st.label + ": phase component depends on thread dim " + bd);
    }
    for (const auto& comp : ts->second) {
      for (const auto& [p, c] : comp.param_coeffs())
        if (!declared.count(p)) throw Error(ErrorKind::UndeclaredParameter, p + " in schedule");
      for (const auto& [n, c] : comp.coeffs()) {
        const auto& dd = st.domain.dims();
        if (std::find(dd.begin(), dd.end(), n) == dd.end())
          throw Error(ErrorKind::InvalidModel, st.label + ": schedule uses unknown dim " + n);
      }
    }
  }
  for (const auto& c : param_constraints) {
    if (!c.expr.coeffs().empty())
      throw Error(ErrorKind::InvalidModel, "param constraint mentions a dimension");
    for (const auto& [p, v] : c.expr.param_coeffs())
      if (!declared.count(p)) throw Error(ErrorKind::UndeclaredParameter, p);
  }
  if (schedule.has_warp_phase && grid.warp_width < 1)
    throw Error(ErrorKind::InvalidModel, "warp phase requires a declared warp width");
}

KernelModel KernelModel::substitute_params(const std::map<std::string, int64_t>& values) const {
  KernelModel m = *this;
  m.params.clear();
  for (const auto& p : params)
    if (!values.count(p)) m.params.push_back(p);
  for (const auto& [p, v] : values) m.param_bounds.erase(p);
  m.param_constraints.clear();
  for (const auto& c : param_constraints) {
    AffineExpr e = c.expr;
    for (const auto& [p, v] : values) e = e.substitute_param(p, v);
    GcdNormalized g = gcd_normalize(Constraint{e, c.kind});
    if (g.trivially_true) continue;
    if (g.infeasible)
      throw Error(ErrorKind::InvalidModel, "parameter values violate containment constraints");
    m.param_constraints.push_back(*g.constraint);
  }
  for (auto& a : m.arrays) {
    for (size_t i = 0; i < a.extent_params.size(); ++i) {
      if (a.extent_params[i].empty()) continue;
      auto it = values.find(a.extent_params[i]);
      if (it == values.end()) continue;
      if (a.extents.size() < a.extent_params.size()) a.extents.resize(a.extent_params.size(), 0);
      a.extents[i] = it->second;
      a.extent_params[i].clear();
    }
  }
  for (auto& st : m.statements) {
    st.domain = st.domain.substitute_params(values);
    for (auto& acc : st.reads) acc.rel = acc.rel.substitute_params(values);
    for (auto& acc : st.writes) acc.rel = acc.rel.substitute_params(values);
  }
  for (auto& [label, ts] : m.schedule.timestamps) {
    for (auto& comp : ts)
      for (const auto& [p, v] : values) comp = comp.substitute_param(p, v);
  }
  return m;
}

IntSet full_domain(const KernelModel& model, const Statement& s) {
  IntSet dom = s.domain;
  for (const auto& p : model.params) dom.declare_param(p);
  std::vector<Constraint> extra;
  for (const auto& b : model.grid.bindings) {
    extra.push_back(constraint_le(AffineExpr::constant(0), AffineExpr::dim(b.dim)));
    extra.push_back(
        constraint_lt(AffineExpr::dim(b.dim), AffineExpr::constant(model.grid.extent_of(b.role))));
  }
  extra.insert(extra.end(), model.param_constraints.begin(), model.param_constraints.end());
  if (extra.empty()) return dom;
  IntSet bounds(dom.space(), dom.dims(), dom.params());
  bounds.add_constraints(std::move(extra));
  return intersect(dom, bounds);
}

SetCollection build_domain(const KernelModel& model) {
  model.validate();
  SetCollection out;
  for (const auto& s : model.statements) out.unite(full_domain(model, s));
  return out;
}

std::map<std::pair<std::string, std::string>, IntRel> build_access(const KernelModel& model,
                                                                   AccessKind kind) {
  model.validate();
  std::map<std::pair<std::string, std::string>, IntRel> out;
  for (const auto& s : model.statements) {
    IntSet dom = full_domain(model, s);
    const auto& accesses = kind == AccessKind::Read ? s.reads : s.writes;
    for (const auto& a : accesses) {
      IntRel factored = intersect_domain(a.rel, dom);
      auto key = std::make_pair(s.label, a.array);
      auto it = out.find(key);
      if (it == out.end())
        out.emplace(key, std::move(factored));
      else
        it->second = union_same(it->second, factored);
    }
  }
  return out;
}

IntRel schedule_relation(const KernelModel& model, const Statement& s) {
  const auto& ts = model.schedule.timestamps.at(s.label);
  std::vector<std::string> tdims;
  for (size_t i = 0; i < ts.size(); ++i) tdims.push_back("$t" + std::to_string(i));
  IntRel rel(s.label, s.domain.dims(), "", tdims, model.params);
  std::vector<Constraint> cs;
  for (size_t i = 0; i < ts.size(); ++i)
    cs.push_back(constraint_eq(AffineExpr::dim(tdims[i]), ts[i]));
  rel.add_constraints(std::move(cs));
  return intersect_domain(rel, full_domain(model, s));
}

namespace {

// Timestamp expressions of b rewritten onto the renamed out-tuple dims.
std::vector<AffineExpr> renamed_timestamps(const KernelModel& model, const Statement& b,
                                           const std::vector<std::string>& out_dims) {
  std::map<std::string, std::string> ren;
  const auto& bd = b.domain.dims();
  for (size_t i = 0; i < bd.size(); ++i)
    if (bd[i] != out_dims[i]) ren[bd[i]] = out_dims[i];
  std::vector<AffineExpr> out;
  for (const auto& comp : model.schedule.timestamps.at(b.label))
    out.push_back(comp.rename_dims(ren));
  return out;
}

}  // namespace

IntRel happens_before(const KernelModel& model, const Statement& a, const Statement& b) {
  IntRel rel(a.label, a.domain.dims(), b.label, b.domain.dims(), model.params);
  std::vector<std::string> out_dims = rel.out_dims();

  const auto& ts_a = model.schedule.timestamps.at(a.label);
  std::vector<AffineExpr> ts_b = renamed_timestamps(model, b, out_dims);
  size_t m = ts_a.size();

  std::vector<std::string> bound_dims;
  for (const auto& bind : model.grid.bindings) bound_dims.push_back(bind.dim);

  auto bound_dim_out = [&](const std::string& dim) {
    const auto& ad = a.domain.dims();
    for (size_t i = 0; i < ad.size(); ++i)
      if (ad[i] == dim) return out_dims[i];
    throw Error(ErrorKind::InvalidModel, "grid dim " + dim + " missing from " + b.label);
  };

  // Same thread, lexicographically ordered timestamps.
  for (size_t pos = 0; pos < m; ++pos) {
    Disjunct d;
    for (const auto& dim : bound_dims)
      d.constraints.push_back(
          constraint_eq(AffineExpr::dim(dim), AffineExpr::dim(bound_dim_out(dim))));
    for (size_t j = 0; j < pos; ++j) d.constraints.push_back(constraint_eq(ts_a[j], ts_b[j]));
    d.constraints.push_back(constraint_lt(ts_a[pos], ts_b[pos]));
    rel.add_disjunct(std::move(d));
  }

  // Same block, strictly increasing block phase.
  if (m > 0 && !bound_dims.empty()) {
    Disjunct d;
    for (const auto& bind : model.grid.bindings) {
      if (bind.role == GridRole::BlockX || bind.role == GridRole::BlockY ||
          bind.role == GridRole::BlockZ)
        d.constraints.push_back(
            constraint_eq(AffineExpr::dim(bind.dim), AffineExpr::dim(bound_dim_out(bind.dim))));
    }
    d.constraints.push_back(constraint_lt(ts_a[0], ts_b[0]));
    rel.add_disjunct(std::move(d));
  }

  // Same warp, strictly increasing warp phase. The warp decomposition is
  // expanded over the concrete thread extent so disjuncts stay
  // existential-free (subtract needs that on the right-hand side).
  if (model.schedule.has_warp_phase && m > 1 && !bound_dims.empty()) {
    int64_t w = model.grid.warp_width;
    std::string tx;
    for (const auto& bind : model.grid.bindings)
      if (bind.role == GridRole::ThreadX) tx = bind.dim;
    if (!tx.empty()) {
      int64_t bdx = model.grid.extent_of(GridRole::ThreadX);
      for (int64_t warp = 0; warp * w < bdx; ++warp) {
        Disjunct d;
        for (const auto& bind : model.grid.bindings) {
          bool same = bind.role != GridRole::ThreadX;
          if (same)
            d.constraints.push_back(constraint_eq(AffineExpr::dim(bind.dim),
                                                  AffineExpr::dim(bound_dim_out(bind.dim))));
        }
        for (const std::string& t : {tx, bound_dim_out(tx)}) {
          d.constraints.push_back(
              constraint_le(AffineExpr::constant(warp * w), AffineExpr::dim(t)));
          d.constraints.push_back(
              constraint_lt(AffineExpr::dim(t), AffineExpr::constant((warp + 1) * w)));
        }
        d.constraints.push_back(constraint_lt(ts_a[1], ts_b[1]));
        rel.add_disjunct(std::move(d));
      }
    }
  }

  IntRel dom_restricted = intersect_domain(rel, full_domain(model, a));
  return intersect_range(dom_restricted, full_domain(model, b));
}

std::map<std::pair<std::string, std::string>, IntRel> happens_before(const KernelModel& model) {
  model.validate();
  std::map<std::pair<std::string, std::string>, IntRel> out;
  for (const auto& a : model.statements)
    for (const auto& b : model.statements)
      out.emplace(std::make_pair(a.label, b.label), happens_before(model, a, b));
  return out;
}

}  // namespace raceset
