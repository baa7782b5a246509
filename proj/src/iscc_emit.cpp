// Copyright (c) raceset contributors.
// SPDX-License-Identifier: Apache-2.0
#include "raceset/iscc_emit.hpp"

#include <algorithm>

namespace raceset {

namespace {

void append_term(std::string& out, int64_t c, const std::string& name) {
  if (c == 0) return;
  if (out.empty()) {
    if (c == -1)
      out += "-";
    else if (c != 1)
      out += std::to_string(c) + "*";
  } else {
    out += c < 0 ? " - " : " + ";
    int64_t a = c < 0 ? -c : c;
    if (a != 1) out += std::to_string(a) + "*";
  }
  out += name;
}

}  // namespace

std::string render_affine(const AffineExpr& e) {
  std::string out;
  for (const auto& [n, c] : e.coeffs()) append_term(out, c, n);
  for (const auto& [n, c] : e.param_coeffs()) append_term(out, c, n);
  int64_t k = e.constant_term();
  if (out.empty())
    out = std::to_string(k);
  else if (k > 0)
    out += " + " + std::to_string(k);
  else if (k < 0)
    out += " - " + std::to_string(-k);
  return out;
}

std::string render_constraint(const Constraint& c) {
  // Positive terms stay left, negated negative terms move right.
  AffineExpr lhs, rhs;
  for (const auto& [n, v] : c.expr.coeffs()) {
    if (v > 0)
      lhs.set_dim_coeff(n, v);
    else
      rhs.set_dim_coeff(n, -v);
  }
  for (const auto& [n, v] : c.expr.param_coeffs()) {
    if (v > 0)
      lhs.set_param_coeff(n, v);
    else
      rhs.set_param_coeff(n, -v);
  }
  int64_t k = c.expr.constant_term();
  if (k > 0)
    lhs.set_constant(k);
  else
    rhs.set_constant(-k);
  const char* op = c.kind == ConstraintKind::EqualsZero ? " = " : " >= ";
  return render_affine(lhs) + op + render_affine(rhs);
}

std::string render_constraints(const std::vector<Constraint>& cs) {
  std::string out;
  for (size_t i = 0; i < cs.size(); ++i) out += (i ? " and " : "") + render_constraint(cs[i]);
  return out;
}

namespace {

std::string render_tuple(const std::vector<std::string>& dims) {
  std::string out = "[";
  for (size_t i = 0; i < dims.size(); ++i) out += (i ? ", " : "") + dims[i];
  return out + "]";
}

std::string render_disjunct(const Disjunct& d) {
  std::string body = render_constraints(d.constraints);
  if (d.exists.empty()) return body;
  std::string ex = "exists (";
  for (size_t i = 0; i < d.exists.size(); ++i) ex += (i ? ", " : "") + d.exists[i];
  return ex + " : " + body + ")";
}

std::string render_body(const std::string& head, const std::vector<Disjunct>& disjuncts) {
  if (disjuncts.empty()) return {};
  std::string out;
  for (size_t i = 0; i < disjuncts.size(); ++i) {
    if (i) out += " or ";
    std::string body = render_disjunct(disjuncts[i]);
    bool parens = disjuncts.size() > 1 && !body.empty();
    out += parens ? "(" + body + ")" : body;
  }
  if (out.empty()) return head;
  return head + " : " + out;
}

std::string params_header(const std::vector<std::string>& params) {
  if (params.empty()) return {};
  std::string out = "[";
  std::vector<std::string> sorted = params;
  std::sort(sorted.begin(), sorted.end());
  for (size_t i = 0; i < sorted.size(); ++i) out += (i ? ", " : "") + sorted[i];
  return out + "] -> ";
}

// Inline cell expressions of an access relation: each out dim pinned by a
// unit equality becomes its defining expression, everything else keeps the
// cell variable and the residual constraints.
struct InlinedAccess {
  std::string cells;                   // rendered tuple
  std::vector<Constraint> residual;    // constraints not absorbed
  std::vector<std::string> free_cells; // cell dims that stayed variables
};

InlinedAccess inline_cells(const IntRel& rel) {
  InlinedAccess out;
  std::vector<std::string> cells = rel.out_dims();
  const auto& djs = rel.as_set().disjuncts();
  std::vector<Constraint> cs;
  if (!djs.empty()) cs = djs.front().constraints;
  std::vector<bool> used(cs.size(), false);
  std::string tuple = "[";
  for (size_t i = 0; i < cells.size(); ++i) {
    if (i) tuple += ", ";
    bool found = false;
    for (size_t k = 0; k < cs.size(); ++k) {
      if (used[k] || cs[k].kind != ConstraintKind::EqualsZero) continue;
      int64_t coeff = cs[k].expr.coeff_of_dim(cells[i]);
      if (coeff != 1 && coeff != -1) continue;
      AffineExpr rest = cs[k].expr;
      rest.set_dim_coeff(cells[i], 0);
      AffineExpr val = rest.scaled(-coeff);
      bool touches = false;
      for (const auto& cn : cells)
        if (val.coeff_of_dim(cn) != 0) touches = true;
      if (touches) continue;
      tuple += render_affine(val);
      used[k] = true;
      found = true;
      break;
    }
    if (!found) {
      tuple += cells[i];
      out.free_cells.push_back(cells[i]);
    }
  }
  tuple += "]";
  out.cells = tuple;
  for (size_t k = 0; k < cs.size(); ++k)
    if (!used[k]) out.residual.push_back(cs[k]);
  return out;
}

const char* kTestTail =
    "# dependence test: join accesses through the shared cells, order by the\n"
    "# schedule, and report each dependence class\n"
    "BeforeMap := Schedule << Schedule;\n"
    "RaW := (Write . (Read^-1)) * BeforeMap;\n"
    "WaW := (Write . (Write^-1)) * BeforeMap;\n"
    "WaR := (Read . (Write^-1)) * BeforeMap;\n"
    "\"RaW dependences:\"; RaW;\n"
    "\"WaW dependences:\"; WaW;\n"
    "\"WaR dependences:\"; WaR;\n";

}  // namespace

std::string render_set(const IntSet& s) {
  std::string head = s.space().empty() ? render_tuple(s.dims())
                                       : s.space() + render_tuple(s.dims());
  if (s.disjuncts().empty()) return params_header(s.params()) + "{ }";
  return params_header(s.params()) + "{ " + render_body(head, s.disjuncts()) + " }";
}

std::string render_rel(const IntRel& r) {
  std::vector<std::string> in = r.in_dims();
  std::vector<std::string> out = r.out_dims();
  std::string head = r.in_space() + render_tuple(in) + " -> " + r.out_space() + render_tuple(out);
  if (r.as_set().disjuncts().empty()) return params_header(r.as_set().params()) + "{ }";
  return params_header(r.as_set().params()) + "{ " + render_body(head, r.as_set().disjuncts()) +
         " }";
}

IsccScript emit_iscc(const KernelModel& model) {
  model.validate();
  IsccScript script;
  std::string name = model.name.empty() ? "kernel" : model.name;
  script.prologue.push_back("# " + name + ": labeled iteration domains, access relations and");
  script.prologue.push_back("# schedule with the barrier phase as the leading time component");

  std::string header = params_header(model.params);

  // Domain: one labeled set per statement, parameter containment folded in.
  {
    std::string body;
    for (size_t i = 0; i < model.statements.size(); ++i) {
      const Statement& st = model.statements[i];
      std::vector<Constraint> cs;
      if (!st.domain.disjuncts().empty()) cs = st.domain.disjuncts().front().constraints;
      cs.insert(cs.end(), model.param_constraints.begin(), model.param_constraints.end());
      std::string entry = st.label + render_tuple(st.domain.dims());
      if (!cs.empty()) entry += " : " + render_constraints(cs);
      body += "  " + entry;
      body += i + 1 < model.statements.size() ? ";\n" : "\n";
    }
    if (model.statements.empty())
      script.domain = "Domain := " + header + "{ };\n";
    else
      script.domain = "Domain := " + header + "{\n" + body + "};\n";
  }

  // Read / Write: accesses factored with the Domain.
  auto emit_accesses = [&](AccessKind kind) {
    std::vector<std::string> lines;
    for (const auto& st : model.statements) {
      const auto& accesses = kind == AccessKind::Read ? st.reads : st.writes;
      for (const auto& acc : accesses) {
        InlinedAccess ia = inline_cells(acc.rel);
        std::string line = st.label + render_tuple(st.domain.dims()) + " -> " + acc.array +
                           ia.cells;
        if (!ia.residual.empty()) line += " : " + render_constraints(ia.residual);
        lines.push_back(line);
      }
    }
    std::string label = kind == AccessKind::Read ? "Read" : "Write";
    if (lines.empty()) return label + " := " + header + "{ };\n";
    std::string out = label + " := " + header + "{\n";
    for (size_t i = 0; i < lines.size(); ++i)
      out += "  " + lines[i] + (i + 1 < lines.size() ? ";\n" : "\n");
    out += "} * Domain;\n";
    return out;
  };
  script.read = emit_accesses(AccessKind::Read);
  script.write = emit_accesses(AccessKind::Write);

  // Schedule: label tuples map to time vectors, ordering variable first.
  {
    std::vector<std::string> lines;
    for (const auto& st : model.statements) {
      const auto& ts = model.schedule.timestamps.at(st.label);
      std::string vec = "[";
      for (size_t i = 0; i < ts.size(); ++i) vec += (i ? ", " : "") + render_affine(ts[i]);
      vec += "]";
      lines.push_back(st.label + render_tuple(st.domain.dims()) + " -> " + vec);
    }
    if (lines.empty())
      script.schedule = "Schedule := " + header + "{ };\n";
    else {
      script.schedule = "Schedule := " + header + "{\n";
      for (size_t i = 0; i < lines.size(); ++i)
        script.schedule += "  " + lines[i] + (i + 1 < lines.size() ? ";\n" : "\n");
      script.schedule += "};\n";
    }
  }

  script.test_tail = kTestTail;

  script.text.clear();
  for (const auto& line : script.prologue) script.text += line + "\n";
  script.text += script.domain;
  script.text += script.read;
  script.text += script.write;
  script.text += script.schedule;
  script.text += script.test_tail;
  return script;
}

namespace {

std::string render_iter(const std::map<std::string, int64_t>& iter) {
  std::string out = "[";
  bool first = true;
  for (const auto& [k, v] : iter) {
    if (!first) out += ", ";
    first = false;
    out += k + "=" + std::to_string(v);
  }
  return out + "]";
}

std::string render_witness(const ConflictWitness& w) {
  std::string cell = "[";
  for (size_t i = 0; i < w.cell.size(); ++i) cell += (i ? ", " : "") + std::to_string(w.cell[i]);
  cell += "]";
  std::string out = w.source + render_iter(w.source_iter) + " ~ " + w.target +
                    render_iter(w.target_iter) + " on " + w.array + cell;
  if (!w.param_values.empty()) {
    out += " with ";
    bool first = true;
    for (const auto& [k, v] : w.param_values) {
      if (!first) out += ", ";
      first = false;
      out += k + "=" + std::to_string(v);
    }
  }
  return out;
}

}  // namespace

std::string emit_report_text(const DependenceReport& report) {
  std::string out;
  out += "verdict: " + std::string(race_verdict_name(report.verdict)) + "\n";
  if (!report.race_witnesses.empty()) {
    out += "races:\n";
    for (const auto& w : report.race_witnesses) out += "  " + render_witness(w) + "\n";
  }
  if (!report.races.empty()) {
    out += "conflict sets:\n";
    for (const auto& e : report.races) {
      std::string v = e.verdict.empty()        ? "empty"
                      : e.verdict.nonempty()   ? "non-empty"
                                               : "undecided";
      out += "  " + std::string(dependence_kind_name(e.kind)) + " " + e.source + " -> " +
             e.target + " on " + e.array + ": " + v + "\n";
    }
  }
  if (!report.dependences.empty()) {
    out += "dependences:\n";
    for (const auto& e : report.dependences) {
      std::string v = e.verdict.empty()        ? "empty"
                      : e.verdict.nonempty()   ? "non-empty"
                                               : "undecided";
      out += "  " + std::string(dependence_kind_name(e.kind)) + " " + e.source + " -> " +
             e.target + " on " + e.array + ": " + v;
      if (e.witness) out += " at " + render_witness(*e.witness);
      out += "\n";
    }
  }
  if (!report.inconclusive_reasons.empty()) {
    out += "inconclusive:\n";
    for (const auto& r : report.inconclusive_reasons) out += "  " + r + "\n";
  }
  if (!report.notes.empty()) {
    out += "notes:\n";
    for (const auto& n : report.notes) out += "  " + n + "\n";
  }
  return out;
}

}  // namespace raceset
