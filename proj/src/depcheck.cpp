// Copyright (c) raceset contributors.
// SPDX-License-Identifier: Apache-2.0
#include "raceset/depcheck.hpp"

#include <algorithm>
#include <set>

namespace raceset {

const char* dependence_kind_name(DependenceKind k) {
  switch (k) {
  case DependenceKind::RaW: return "RaW";
  case DependenceKind::WaW: return "WaW";
  case DependenceKind::WaR: return "WaR";
  }
  return "?";
}

const char* race_verdict_name(RaceVerdict v) {
  switch (v) {
  case RaceVerdict::RaceFree: return "RACE-FREE";
  case RaceVerdict::RaceFound: return "RACE-FOUND";
  case RaceVerdict::Inconclusive: return "INCONCLUSIVE";
  }
  return "?";
}

namespace {

std::vector<std::string> disjoint_names(const std::set<std::string>& taken,
                                        std::vector<std::string> names) {
  std::set<std::string> used = taken;
  for (auto& n : names) {
    while (used.count(n)) n += "'";
    used.insert(n);
  }
  return names;
}

// Instance pairs of (a, b) conflicting on one cell of `array`: the set is over
// the tuple (a dims, cell dims, b dims) so witnesses carry the cell.
struct ConflictSpace {
  IntSet triple;
  std::vector<std::string> a_dims, cell_dims, b_dims;
  size_t cell_arity = 0;
};

ConflictSpace conflict_triple(const KernelModel& model, const Statement& a, const IntRel& a_acc,
                              const Statement& b, const IntRel& b_acc) {
  ConflictSpace cs;
  cs.a_dims = a.domain.dims();
  cs.cell_arity = a_acc.out_arity();
  std::set<std::string> taken(cs.a_dims.begin(), cs.a_dims.end());
  for (size_t i = 0; i < cs.cell_arity; ++i) {
    cs.cell_dims.push_back("$c" + std::to_string(i));
    taken.insert(cs.cell_dims.back());
  }
  cs.b_dims = disjoint_names(taken, b.domain.dims());

  std::vector<std::string> all = cs.a_dims;
  all.insert(all.end(), cs.cell_dims.begin(), cs.cell_dims.end());
  all.insert(all.end(), cs.b_dims.begin(), cs.b_dims.end());

  cs.triple = IntSet(a.label + "*" + b.label, all, model.params);

  IntRel a_ren = a_acc.renamed(cs.a_dims, cs.cell_dims);
  IntRel b_ren = b_acc.renamed(cs.b_dims, cs.cell_dims);
  for (const auto& da : a_ren.as_set().disjuncts()) {
    for (const auto& db : b_ren.as_set().disjuncts()) {
      Disjunct m = da;
      std::set<std::string> ex(m.exists.begin(), m.exists.end());
      std::map<std::string, std::string> ren;
      for (const auto& e : db.exists) {
        std::string f = e;
        while (ex.count(f)) f += "~";
        if (f != e) ren[e] = f;
        ex.insert(f);
        m.exists.push_back(f);
      }
      for (const auto& c : db.constraints)
        m.constraints.push_back(ren.empty() ? c : Constraint{c.expr.rename_dims(ren), c.kind});
      cs.triple.add_disjunct(std::move(m));
    }
  }
  return cs;
}

// A relation over (a dims -> b dims) lifted into the triple space (cell dims
// left unconstrained).
IntSet lift_to_triple(const ConflictSpace& cs, const IntRel& rel) {
  IntRel ren = rel.renamed(cs.a_dims, cs.b_dims);
  IntSet out(cs.triple.space(), cs.triple.dims(), rel.as_set().params());
  for (const auto& d : ren.as_set().disjuncts()) out.add_disjunct(d);
  return out;
}

// Timestamps of b rewritten onto renamed dims.
std::vector<AffineExpr> timestamps_on(const KernelModel& model, const Statement& s,
                                      const std::vector<std::string>& dims) {
  std::map<std::string, std::string> ren;
  const auto& sd = s.domain.dims();
  for (size_t i = 0; i < sd.size(); ++i)
    if (sd[i] != dims[i]) ren[sd[i]] = dims[i];
  std::vector<AffineExpr> out;
  for (const auto& comp : model.schedule.timestamps.at(s.label)) out.push_back(comp.rename_dims(ren));
  return out;
}

// Strict lexicographic schedule order of a before b, in the triple space.
IntSet schedule_before(const KernelModel& model, const ConflictSpace& cs, const Statement& a,
                       const Statement& b) {
  std::vector<AffineExpr> ta = timestamps_on(model, a, cs.a_dims);
  std::vector<AffineExpr> tb = timestamps_on(model, b, cs.b_dims);
  IntSet out(cs.triple.space(), cs.triple.dims(), model.params);
  for (size_t pos = 0; pos < ta.size(); ++pos) {
    Disjunct d;
    for (size_t j = 0; j < pos; ++j) d.constraints.push_back(constraint_eq(ta[j], tb[j]));
    d.constraints.push_back(constraint_lt(ta[pos], tb[pos]));
    out.add_disjunct(std::move(d));
  }
  return out;
}

// Distinct-thread requirement: some grid-bound dim differs. Empty set when
// the model has no grid-bound dims (a single implicit thread).
IntSet distinct_threads(const KernelModel& model, const ConflictSpace& cs) {
  IntSet out(cs.triple.space(), cs.triple.dims(), {});
  const auto& ad = cs.a_dims;
  for (const auto& bind : model.grid.bindings) {
    for (size_t i = 0; i < ad.size(); ++i) {
      if (ad[i] != bind.dim) continue;
      AffineExpr diff = AffineExpr::dim(cs.b_dims[i]) - AffineExpr::dim(ad[i]);
      Disjunct lt, gt;
      lt.constraints.push_back(constraint_ge0(diff - AffineExpr::constant(1)));
      gt.constraints.push_back(constraint_ge0(-diff - AffineExpr::constant(1)));
      out.add_disjunct(std::move(lt));
      out.add_disjunct(std::move(gt));
    }
  }
  return out;
}

// Same-block requirement for Shared arrays.
IntSet same_block(const KernelModel& model, const ConflictSpace& cs) {
  IntSet out(cs.triple.space(), cs.triple.dims(), {});
  Disjunct d;
  const auto& ad = cs.a_dims;
  for (const auto& bind : model.grid.bindings) {
    bool is_block = bind.role == GridRole::BlockX || bind.role == GridRole::BlockY ||
                    bind.role == GridRole::BlockZ;
    if (!is_block) continue;
    for (size_t i = 0; i < ad.size(); ++i)
      if (ad[i] == bind.dim)
        d.constraints.push_back(
            constraint_eq(AffineExpr::dim(ad[i]), AffineExpr::dim(cs.b_dims[i])));
  }
  out.add_disjunct(std::move(d));
  return out;
}

ConflictWitness witness_from(const ConflictSpace& cs, const Statement& a, const Statement& b,
                             const std::string& array, const WitnessPoint& w) {
  ConflictWitness cw;
  cw.source = a.label;
  cw.target = b.label;
  cw.array = array;
  for (size_t i = 0; i < cs.a_dims.size(); ++i)
    cw.source_iter[a.domain.dims()[i]] = w.dim_values.at(cs.a_dims[i]);
  for (size_t i = 0; i < cs.b_dims.size(); ++i)
    cw.target_iter[b.domain.dims()[i]] = w.dim_values.at(cs.b_dims[i]);
  for (const auto& c : cs.cell_dims) cw.cell.push_back(w.dim_values.at(c));
  cw.param_values = w.param_values;
  return cw;
}

const IntRel* find_access(const std::map<std::pair<std::string, std::string>, IntRel>& m,
                          const std::string& stmt, const std::string& array) {
  auto it = m.find({stmt, array});
  return it == m.end() ? nullptr : &it->second;
}

}  // namespace

std::vector<DependenceEntry> dependences(const KernelModel& model, DependenceKind kind,
                                         const CheckOptions& opts) {
  model.validate();
  auto reads = build_access(model, AccessKind::Read);
  auto writes = build_access(model, AccessKind::Write);
  const auto& src_map = kind == DependenceKind::WaR ? reads : writes;
  const auto& dst_map = kind == DependenceKind::RaW ? reads : writes;

  std::vector<DependenceEntry> out;
  for (const auto& a : model.statements) {
    for (const auto& b : model.statements) {
      for (const auto& arr : model.arrays) {
        const IntRel* src = find_access(src_map, a.label, arr.name);
        const IntRel* dst = find_access(dst_map, b.label, arr.name);
        if (!src || !dst) continue;
        ConflictSpace cs = conflict_triple(model, a, *src, b, *dst);
        IntSet ordered = intersect(cs.triple, schedule_before(model, cs, a, b));

        DependenceEntry e;
        e.kind = kind;
        e.source = a.label;
        e.target = b.label;
        e.array = arr.name;
        e.verdict = is_empty(ordered, opts.emptiness);
        IntSet pair_set = project_out(ordered, cs.cell_dims);
        e.relation = IntRel::from_set(std::move(pair_set), a.label, b.label, cs.a_dims.size());
        if (e.verdict.nonempty()) e.witness = witness_from(cs, a, b, arr.name, *e.verdict.witness);
        out.push_back(std::move(e));
      }
    }
  }
  return out;
}

DependenceReport races(const KernelModel& model, const CheckOptions& opts) {
  model.validate();
  DependenceReport report;
  report.notes = model.notes;

  auto reads = build_access(model, AccessKind::Read);
  auto writes = build_access(model, AccessKind::Write);
  auto hb = happens_before(model);

  struct Arm {
    DependenceKind kind;
    AccessKind a_side, b_side;
  };
  const Arm arms[] = {
      {DependenceKind::RaW, AccessKind::Write, AccessKind::Read},
      {DependenceKind::WaW, AccessKind::Write, AccessKind::Write},
      {DependenceKind::WaR, AccessKind::Read, AccessKind::Write},
  };

  bool any_race = false;
  bool any_inconclusive = false;

  for (size_t ia = 0; ia < model.statements.size(); ++ia) {
    for (size_t ib = ia; ib < model.statements.size(); ++ib) {
      const Statement& a = model.statements[ia];
      const Statement& b = model.statements[ib];
      for (const auto& arr : model.arrays) {
        for (const Arm& arm : arms) {
          const auto& amap = arm.a_side == AccessKind::Read ? reads : writes;
          const auto& bmap = arm.b_side == AccessKind::Read ? reads : writes;
          const IntRel* src = find_access(amap, a.label, arr.name);
          const IntRel* dst = find_access(bmap, b.label, arr.name);
          if (!src || !dst) continue;
          if (ia == ib && arm.kind == DependenceKind::WaR) continue;  // transpose of RaW

          ConflictSpace cs = conflict_triple(model, a, *src, b, *dst);
          IntSet conflicts = intersect(cs.triple, distinct_threads(model, cs));
          if (arr.space == MemSpace::Shared || arr.space == MemSpace::Local)
            conflicts = intersect(conflicts, same_block(model, cs));
          if (!conflicts.structurally_empty()) {
            conflicts = subtract(conflicts, lift_to_triple(cs, hb.at({a.label, b.label})));
            conflicts = subtract(conflicts, lift_to_triple(cs, inverse(hb.at({b.label, a.label}))));
          }

          DependenceEntry e;
          e.kind = arm.kind;
          e.source = a.label;
          e.target = b.label;
          e.array = arr.name;
          e.verdict = is_empty(conflicts, opts.emptiness);
          IntSet pair_set = project_out(conflicts, cs.cell_dims);
          e.relation = IntRel::from_set(std::move(pair_set), a.label, b.label, cs.a_dims.size());
          if (e.verdict.nonempty()) {
            any_race = true;
            e.witness = witness_from(cs, a, b, arr.name, *e.verdict.witness);
            report.race_witnesses.push_back(*e.witness);
          } else if (e.verdict.inconclusive()) {
            any_inconclusive = true;
            report.inconclusive_reasons.push_back(
                std::string(dependence_kind_name(arm.kind)) + " " + a.label + "->" + b.label +
                " on " + arr.name + ": " + e.verdict.reason);
          }
          report.races.push_back(std::move(e));
        }
      }
    }
  }

  if (any_race)
    report.verdict = RaceVerdict::RaceFound;
  else if (any_inconclusive)
    report.verdict = RaceVerdict::Inconclusive;
  else
    report.verdict = RaceVerdict::RaceFree;
  return report;
}

DependenceReport analyze(const KernelModel& model, const CheckOptions& opts) {
  DependenceReport report = races(model, opts);
  for (DependenceKind k : {DependenceKind::RaW, DependenceKind::WaW, DependenceKind::WaR}) {
    auto deps = dependences(model, k, opts);
    report.dependences.insert(report.dependences.end(), deps.begin(), deps.end());
  }
  return report;
}

}  // namespace raceset
