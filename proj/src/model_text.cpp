// Copyright (c) raceset contributors.
// SPDX-License-Identifier: Apache-2.0
#include "raceset/model_text.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace raceset {

namespace {

struct Tok {
  enum class Kind { Int, Name, Punct, End } kind = Kind::End;
  std::string text;
  int64_t value = 0;
};

class Lexer {
public:
  Lexer(const std::string& s, int line) : s_(s), line_(line) { advance(); }

  const Tok& peek() const { return tok_; }
  Tok take() {
    Tok t = tok_;
    advance();
    return t;
  }
  bool at_end() const { return tok_.kind == Tok::Kind::End; }
  int line() const { return line_; }
  int col() const { return static_cast<int>(start_) + 1; }

  [[noreturn]] void fail(const std::string& expected) const {
    throw Error(ErrorKind::SyntaxError, "expected " + expected, line_, col());
  }

  bool eat_punct(const std::string& p) {
    if (tok_.kind == Tok::Kind::Punct && tok_.text == p) {
      advance();
      return true;
    }
    return false;
  }

  void expect_punct(const std::string& p) {
    if (!eat_punct(p)) fail("'" + p + "'");
  }

  std::string expect_name() {
    if (tok_.kind != Tok::Kind::Name) fail("identifier");
    return take().text;
  }

  int64_t expect_int() {
    if (tok_.kind == Tok::Kind::Int) return take().value;
    if (tok_.kind == Tok::Kind::Punct && tok_.text == "-") {
      advance();
      if (tok_.kind != Tok::Kind::Int) fail("integer");
      return -take().value;
    }
    fail("integer");
  }

private:
  void advance() {
    while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t')) ++pos_;
    start_ = pos_;
    if (pos_ >= s_.size() || s_[pos_] == '#') {
      tok_ = Tok{};
      return;
    }
    char c = s_[pos_];
    if (isdigit(static_cast<unsigned char>(c))) {
      size_t j = pos_;
      while (j < s_.size() && isdigit(static_cast<unsigned char>(s_[j]))) ++j;
      tok_ = Tok{Tok::Kind::Int, s_.substr(pos_, j - pos_),
                 static_cast<int64_t>(std::stoll(s_.substr(pos_, j - pos_)))};
      pos_ = j;
      return;
    }
    if (isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '$' || c == '%') {
      size_t j = pos_;
      while (j < s_.size() && (isalnum(static_cast<unsigned char>(s_[j])) || s_[j] == '_' ||
                               s_[j] == '$' || s_[j] == '.' || s_[j] == '%' || s_[j] == '\''))
        ++j;
      tok_ = Tok{Tok::Kind::Name, s_.substr(pos_, j - pos_), 0};
      pos_ = j;
      return;
    }
    // multi-char comparison operators
    for (const char* op : {"<=", ">=", "=="}) {
      if (s_.compare(pos_, 2, op) == 0) {
        tok_ = Tok{Tok::Kind::Punct, op, 0};
        pos_ += 2;
        return;
      }
    }
    tok_ = Tok{Tok::Kind::Punct, std::string(1, c), 0};
    ++pos_;
  }

  const std::string& s_;
  size_t pos_ = 0, start_ = 0;
  Tok tok_;
  int line_;
};

bool is_cmp(const std::string& p) {
  return p == "<" || p == "<=" || p == ">" || p == ">=" || p == "=" || p == "==";
}

AffineExpr parse_expr(Lexer& lx, const std::set<std::string>& dims,
                      const std::set<std::string>& params);

AffineExpr parse_term(Lexer& lx, const std::set<std::string>& dims,
                      const std::set<std::string>& params) {
  auto name_expr = [&](const std::string& n, int64_t coeff) {
    if (dims.count(n)) return AffineExpr::dim(n, coeff);
    if (params.count(n)) return AffineExpr::param(n, coeff);
    throw Error(ErrorKind::SyntaxError, "unknown name " + n, lx.line(), lx.col());
  };
  if (lx.peek().kind == Tok::Kind::Int) {
    int64_t v = lx.take().value;
    if (lx.eat_punct("*")) {
      std::string n = lx.expect_name();
      return name_expr(n, v);
    }
    return AffineExpr::constant(v);
  }
  if (lx.peek().kind == Tok::Kind::Name) {
    std::string n = lx.take().text;
    if (lx.eat_punct("*")) {
      if (lx.peek().kind != Tok::Kind::Int)
        throw Error(ErrorKind::SyntaxError, "affine terms multiply a name by an integer",
                    lx.line(), lx.col());
      return name_expr(n, lx.take().value);
    }
    return name_expr(n, 1);
  }
  if (lx.eat_punct("(")) {
    AffineExpr e = parse_expr(lx, dims, params);
    lx.expect_punct(")");
    return e;
  }
  if (lx.eat_punct("-")) return -parse_term(lx, dims, params);
  lx.fail("affine term");
}

AffineExpr parse_expr(Lexer& lx, const std::set<std::string>& dims,
                      const std::set<std::string>& params) {
  AffineExpr e = parse_term(lx, dims, params);
  while (true) {
    if (lx.eat_punct("+"))
      e += parse_term(lx, dims, params);
    else if (lx.eat_punct("-"))
      e = e - parse_term(lx, dims, params);
    else
      return e;
  }
}

void parse_comparison_chain(Lexer& lx, const std::set<std::string>& dims,
                            const std::set<std::string>& params, std::vector<Constraint>& out) {
  AffineExpr lhs = parse_expr(lx, dims, params);
  bool any = false;
  while (lx.peek().kind == Tok::Kind::Punct && is_cmp(lx.peek().text)) {
    std::string op = lx.take().text;
    AffineExpr rhs = parse_expr(lx, dims, params);
    if (op == "<")
      out.push_back(constraint_lt(lhs, rhs));
    else if (op == "<=")
      out.push_back(constraint_le(lhs, rhs));
    else if (op == ">")
      out.push_back(constraint_lt(rhs, lhs));
    else if (op == ">=")
      out.push_back(constraint_le(rhs, lhs));
    else
      out.push_back(constraint_eq(lhs, rhs));
    lhs = rhs;
    any = true;
  }
  if (!any) lx.fail("comparison operator");
}

}  // namespace

AffineExpr parse_affine_expr(const std::string& text, const std::set<std::string>& dims,
                             const std::set<std::string>& params) {
  Lexer lx(text, 0);
  AffineExpr e = parse_expr(lx, dims, params);
  if (!lx.at_end()) lx.fail("end of expression");
  return e;
}

std::vector<Constraint> parse_constraint_text(const std::string& text,
                                              const std::set<std::string>& dims,
                                              const std::set<std::string>& params) {
  Lexer lx(text, 0);
  std::vector<Constraint> out;
  parse_comparison_chain(lx, dims, params, out);
  while (lx.peek().kind == Tok::Kind::Name && lx.peek().text == "and") {
    lx.take();
    parse_comparison_chain(lx, dims, params, out);
  }
  if (!lx.at_end()) lx.fail("'and' or end of constraints");
  return out;
}

namespace {

ElemKind parse_elem(const std::string& s, int line) {
  if (s == "i32") return ElemKind::I32;
  if (s == "i64") return ElemKind::I64;
  if (s == "f32") return ElemKind::F32;
  if (s == "f64") return ElemKind::F64;
  throw Error(ErrorKind::SyntaxError, "element type (i32|i64|f32|f64), got " + s, line, 1);
}

MemSpace parse_space(const std::string& s, int line) {
  if (s == "global") return MemSpace::Global;
  if (s == "shared") return MemSpace::Shared;
  if (s == "local") return MemSpace::Local;
  throw Error(ErrorKind::SyntaxError, "memory space (global|shared|local), got " + s, line, 1);
}

struct PendingAccess {
  std::string stmt;
  std::string array;
  std::vector<std::string> index_texts;
  bool is_write = false;
  int line = 0;
};

}  // namespace

KernelModel parse_model_text(const std::string& text) {
  KernelModel m;
  std::set<std::string> params;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  Statement* cur = nullptr;
  std::vector<PendingAccess> accesses;
  std::map<std::string, std::vector<std::string>> stmt_dims;
  std::map<std::string, std::string> domain_texts;
  std::map<std::string, int> domain_lines;
  std::map<std::string, std::string> schedule_texts;
  std::map<std::string, int> schedule_lines;
  std::vector<std::string> stmt_order;

  while (std::getline(in, line)) {
    ++lineno;
    // strip comments
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    // trim
    size_t b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    size_t e = line.find_last_not_of(" \t\r");
    std::string body = line.substr(b, e - b + 1);
    Lexer lx(body, lineno);
    std::string kw = lx.expect_name();

    if (kw == "model") {
      m.name = lx.expect_name();
    } else if (kw == "params") {
      lx.eat_punct(":");
      while (true) {
        std::string p = lx.expect_name();
        params.insert(p);
        m.params.push_back(p);
        if (!lx.eat_punct(",")) break;
      }
    } else if (kw == "bounds") {
      std::string p = lx.expect_name();
      int64_t lo = lx.expect_int();
      int64_t hi = lx.expect_int();
      if (!params.count(p)) throw Error(ErrorKind::UndeclaredParameter, p, lineno, 1);
      m.param_bounds[p] = {lo, hi};
    } else if (kw == "constraint") {
      size_t pos = body.find("constraint");
      std::string rest = body.substr(pos + 10);
      auto cs = parse_constraint_text(rest, {}, params);
      m.param_constraints.insert(m.param_constraints.end(), cs.begin(), cs.end());
    } else if (kw == "array") {
      ArrayRef a;
      a.name = lx.expect_name();
      a.elem = parse_elem(lx.expect_name(), lineno);
      a.space = parse_space(lx.expect_name(), lineno);
      lx.expect_punct("[");
      while (true) {
        if (lx.peek().kind == Tok::Kind::Int) {
          a.extents.push_back(lx.take().value);
          a.extent_params.emplace_back();
        } else if (lx.eat_punct("*")) {
          a.extents.push_back(0);
          a.extent_params.emplace_back();
        } else {
          std::string p = lx.expect_name();
          if (!params.count(p)) throw Error(ErrorKind::UndeclaredParameter, p, lineno, 1);
          a.extents.push_back(0);
          a.extent_params.push_back(p);
        }
        if (!lx.eat_punct(",")) break;
      }
      lx.expect_punct("]");
      a.arity = a.extents.size();
      if (a.space == MemSpace::Shared) {
        for (size_t i = 0; i < a.arity; ++i)
          if (a.extents[i] < 1)
            throw Error(ErrorKind::InvalidModel,
                        "shared array " + a.name + " needs static extents", lineno, 1);
      }
      m.arrays.push_back(std::move(a));
    } else if (kw == "grid") {
      while (!lx.at_end()) {
        std::string what = lx.expect_name();
        int64_t* dst = nullptr;
        if (what == "blocks")
          dst = m.grid.grid;
        else if (what == "threads")
          dst = m.grid.block;
        else
          lx.fail("blocks or threads");
        for (int i = 0; i < 3; ++i) {
          dst[i] = lx.expect_int();
          if (i < 2) lx.expect_punct(",");
        }
      }
    } else if (kw == "bind") {
      std::string dim = lx.expect_name();
      lx.expect_punct("=");
      std::string role = lx.expect_name();
      auto r = grid_role_from_name(role);
      if (!r) lx.fail("grid role (block.x|...|thread.z)");
      m.grid.bindings.push_back({dim, *r});
    } else if (kw == "warp") {
      m.grid.warp_width = lx.expect_int();
      m.schedule.has_warp_phase = true;
    } else if (kw == "statement") {
      m.statements.emplace_back();
      cur = &m.statements.back();
      cur->label = lx.expect_name();
      stmt_order.push_back(cur->label);
    } else if (kw == "domain") {
      if (!cur) throw Error(ErrorKind::SyntaxError, "domain outside statement", lineno, 1);
      lx.eat_punct(":");
      lx.expect_punct("[");
      std::vector<std::string> dims;
      while (true) {
        dims.push_back(lx.expect_name());
        if (!lx.eat_punct(",")) break;
      }
      lx.expect_punct("]");
      stmt_dims[cur->label] = dims;
      size_t colon = body.find(']');
      colon = body.find(':', colon);
      domain_texts[cur->label] = colon == std::string::npos ? "" : body.substr(colon + 1);
      domain_lines[cur->label] = lineno;
    } else if (kw == "read" || kw == "write") {
      if (!cur) throw Error(ErrorKind::SyntaxError, kw + " outside statement", lineno, 1);
      PendingAccess pa;
      pa.stmt = cur->label;
      pa.is_write = kw == "write";
      pa.array = lx.expect_name();
      pa.line = lineno;
      size_t lb = body.find('[');
      size_t rb = body.rfind(']');
      if (lb == std::string::npos || rb == std::string::npos || rb < lb)
        throw Error(ErrorKind::SyntaxError, "expected [indices]", lineno, 1);
      std::string idx = body.substr(lb + 1, rb - lb - 1);
      // split top-level commas
      std::string curtok;
      int depth = 0;
      for (char c : idx) {
        if (c == '(') ++depth;
        if (c == ')') --depth;
        if (c == ',' && depth == 0) {
          pa.index_texts.push_back(curtok);
          curtok.clear();
        } else {
          curtok += c;
        }
      }
      if (!curtok.empty()) pa.index_texts.push_back(curtok);
      accesses.push_back(std::move(pa));
    } else if (kw == "schedule") {
      std::string label = lx.expect_name();
      lx.expect_punct("=");
      size_t lb = body.find('[');
      size_t rb = body.rfind(']');
      if (lb == std::string::npos || rb == std::string::npos)
        throw Error(ErrorKind::SyntaxError, "expected [timestamps]", lineno, 1);
      schedule_texts[label] = body.substr(lb + 1, rb - lb - 1);
      schedule_lines[label] = lineno;
    } else {
      throw Error(ErrorKind::SyntaxError, "unknown keyword " + kw, lineno, 1);
    }
  }

  // Build statement domains.
  for (auto& st : m.statements) {
    auto dit = stmt_dims.find(st.label);
    if (dit == stmt_dims.end())
      throw Error(ErrorKind::InvalidModel, "statement " + st.label + " has no domain");
    std::set<std::string> dimset(dit->second.begin(), dit->second.end());
    st.domain = IntSet(st.label, dit->second, m.params);
    std::string dtext = domain_texts[st.label];
    if (dtext.find_first_not_of(" \t") == std::string::npos) {
      st.domain.add_disjunct(Disjunct{});
    } else {
      try {
        st.domain.add_constraints(parse_constraint_text(dtext, dimset, params));
      } catch (const Error& e) {
        if (e.kind() == ErrorKind::SyntaxError || e.kind() == ErrorKind::UndeclaredParameter)
          throw Error(e.kind(), "in domain of " + st.label, domain_lines[st.label], e.col());
        throw;
      }
    }
  }

  // Accesses.
  for (const auto& pa : accesses) {
    Statement* st = nullptr;
    for (auto& s : m.statements)
      if (s.label == pa.stmt) st = &s;
    const auto& dims = stmt_dims.at(pa.stmt);
    std::set<std::string> dimset(dims.begin(), dims.end());
    const ArrayRef* arr = m.find_array(pa.array);
    if (!arr)
      throw Error(ErrorKind::InvalidModel, "access to undeclared array " + pa.array, pa.line, 1);
    if (arr->arity != pa.index_texts.size())
      throw Error(ErrorKind::ArityMismatch,
                  pa.array + " expects " + std::to_string(arr->arity) + " indices", pa.line, 1);
    std::vector<std::string> cells;
    for (size_t i = 0; i < arr->arity; ++i) cells.push_back("o" + std::to_string(i));
    IntRel rel(pa.stmt, dims, pa.array, cells, m.params);
    std::vector<Constraint> cs;
    std::vector<std::string> actual_cells = rel.out_dims();
    for (size_t i = 0; i < arr->arity; ++i) {
      AffineExpr idx;
      try {
        idx = parse_affine_expr(pa.index_texts[i], dimset, params);
      } catch (const Error& e) {
        throw Error(e.kind(), "in access to " + pa.array, pa.line, e.col());
      }
      cs.push_back(constraint_eq(AffineExpr::dim(actual_cells[i]), idx));
    }
    rel.add_constraints(std::move(cs));
    (pa.is_write ? st->writes : st->reads).push_back(Access{pa.array, std::move(rel)});
  }

  // Schedule (padded to uniform arity).
  size_t max_arity = 0;
  std::map<std::string, std::vector<AffineExpr>> ts;
  for (const auto& label : stmt_order) {
    auto it = schedule_texts.find(label);
    if (it == schedule_texts.end())
      throw Error(ErrorKind::InvalidModel, "no schedule line for " + label);
    const auto& dims = stmt_dims.at(label);
    std::set<std::string> dimset(dims.begin(), dims.end());
    std::vector<AffineExpr> comps;
    std::string curtok;
    for (char c : it->second + ",") {
      if (c == ',') {
        if (curtok.find_first_not_of(" \t") != std::string::npos) {
          try {
            comps.push_back(parse_affine_expr(curtok, dimset, params));
          } catch (const Error& e) {
            throw Error(e.kind(), "in schedule of " + label, schedule_lines[label], e.col());
          }
        }
        curtok.clear();
      } else {
        curtok += c;
      }
    }
    max_arity = std::max(max_arity, comps.size());
    ts[label] = std::move(comps);
  }
  for (auto& [label, comps] : ts)
    while (comps.size() < max_arity) comps.push_back(AffineExpr::constant(0));
  m.schedule.timestamps = std::move(ts);

  m.validate();
  return m;
}

KernelModel load_model_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_model_text(ss.str());
}

// ---------------------------------------------------------------------------
// rendering

namespace {

std::string render_expr_ordered(const AffineExpr& e) {
  std::string out;
  auto append_term = [&](int64_t c, const std::string& name) {
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
  };
  for (const auto& [n, c] : e.coeffs()) append_term(c, n);
  for (const auto& [n, c] : e.param_coeffs()) append_term(c, n);
  int64_t k = e.constant_term();
  if (out.empty())
    out = std::to_string(k);
  else if (k > 0)
    out += " + " + std::to_string(k);
  else if (k < 0)
    out += " - " + std::to_string(-k);
  return out;
}

}  // namespace

std::string render_model_text(const KernelModel& m) {
  std::string out;
  out += "model " + (m.name.empty() ? std::string("kernel") : m.name) + "\n";
  if (!m.params.empty()) {
    out += "params ";
    for (size_t i = 0; i < m.params.size(); ++i) out += (i ? ", " : "") + m.params[i];
    out += "\n";
  }
  for (const auto& [p, b] : m.param_bounds)
    out += "bounds " + p + " " + std::to_string(b.first) + " " + std::to_string(b.second) + "\n";
  for (const auto& c : m.param_constraints) {
    out += "constraint " + render_expr_ordered(c.expr) +
           (c.kind == ConstraintKind::EqualsZero ? " = 0" : " >= 0") + "\n";
  }
  for (const auto& a : m.arrays) {
    out += "array " + a.name + " " + elem_kind_name(a.elem) + " " + mem_space_name(a.space) + " [";
    for (size_t i = 0; i < a.arity; ++i) {
      if (i) out += ", ";
      if (i < a.extent_params.size() && !a.extent_params[i].empty())
        out += a.extent_params[i];
      else if (i < a.extents.size() && a.extents[i] > 0)
        out += std::to_string(a.extents[i]);
      else
        out += "*";
    }
    out += "]\n";
  }
  out += "grid blocks " + std::to_string(m.grid.grid[0]) + ", " + std::to_string(m.grid.grid[1]) +
         ", " + std::to_string(m.grid.grid[2]) + " threads " + std::to_string(m.grid.block[0]) +
         ", " + std::to_string(m.grid.block[1]) + ", " + std::to_string(m.grid.block[2]) + "\n";
  for (const auto& b : m.grid.bindings)
    out += "bind " + b.dim + " = " + grid_role_name(b.role) + "\n";
  if (m.grid.warp_width > 0) out += "warp " + std::to_string(m.grid.warp_width) + "\n";

  auto render_con = [](const Constraint& c) {
    // lhs op rhs split: positive terms left, negated negative terms right.
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
    std::string op = c.kind == ConstraintKind::EqualsZero ? " = " : " >= ";
    return render_expr_ordered(lhs) + op + render_expr_ordered(rhs);
  };

  for (const auto& st : m.statements) {
    out += "statement " + st.label + "\n";
    out += "  domain [";
    for (size_t i = 0; i < st.domain.dims().size(); ++i)
      out += (i ? ", " : "") + st.domain.dims()[i];
    out += "]";
    const auto& djs = st.domain.disjuncts();
    if (!djs.empty() && !djs.front().constraints.empty()) {
      out += " : ";
      const auto& cs = djs.front().constraints;
      for (size_t i = 0; i < cs.size(); ++i) out += (i ? " and " : "") + render_con(cs[i]);
    }
    out += "\n";
    auto render_access = [&](const Access& a, const char* kw) {
      out += std::string("  ") + kw + " " + a.array + "[";
      // Cells are pinned by equalities o_i == expr; solve each.
      std::vector<std::string> cells = a.rel.out_dims();
      const auto& ds = a.rel.as_set().disjuncts();
      for (size_t i = 0; i < cells.size(); ++i) {
        if (i) out += ", ";
        bool found = false;
        if (!ds.empty()) {
          for (const auto& c : ds.front().constraints) {
            if (c.kind != ConstraintKind::EqualsZero) continue;
            int64_t coeff = c.expr.coeff_of_dim(cells[i]);
            if (coeff != 1 && coeff != -1) continue;
            AffineExpr rest = c.expr;
            rest.set_dim_coeff(cells[i], 0);
            AffineExpr val = rest.scaled(-coeff);
            bool touches_cells = false;
            for (const auto& cn : cells)
              if (val.coeff_of_dim(cn) != 0) touches_cells = true;
            if (touches_cells) continue;
            out += render_expr_ordered(val);
            found = true;
            break;
          }
        }
        if (!found) out += "*";
      }
      out += "]\n";
    };
    for (const auto& a : st.reads) render_access(a, "read");
    for (const auto& a : st.writes) render_access(a, "write");
  }
  for (const auto& st : m.statements) {
    const auto& ts = m.schedule.timestamps.at(st.label);
    out += "schedule " + st.label + " = [";
    for (size_t i = 0; i < ts.size(); ++i) out += (i ? ", " : "") + render_expr_ordered(ts[i]);
    out += "]\n";
  }
  return out;
}

}  // namespace raceset
