// Copyright (c) raceset contributors.
// SPDX-License-Identifier: Apache-2.0
#include "raceset/oracle.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <tuple>

namespace raceset {

size_t ConcreteInstance::ArrayData::size() const {
  return elem == ElemKind::F32 || elem == ElemKind::F64 ? floats.size() : ints.size();
}

bool AccessLogEntry::same_thread(const AccessLogEntry& o) const {
  return same_block(o) && thread[0] == o.thread[0] && thread[1] == o.thread[1] &&
         thread[2] == o.thread[2];
}

bool AccessLogEntry::same_block(const AccessLogEntry& o) const {
  return block[0] == o.block[0] && block[1] == o.block[1] && block[2] == o.block[2];
}

std::pair<int64_t, int64_t> EnumBox::of(const std::string& dim) const {
  auto it = per_dim.find(dim);
  return it == per_dim.end() ? std::make_pair(lo, hi) : it->second;
}

namespace {

// Flattened disjunct for fast per-point evaluation.
struct FlatCon {
  std::vector<int64_t> dim_coeffs;  // one per set dimension
  std::vector<int64_t> ex_coeffs;   // one per disjunct existential
  int64_t k = 0;
  bool eq = false;
};

struct FlatDisjunct {
  std::vector<FlatCon> cons;
  size_t num_exists = 0;
};

// Decides whether the flattened existential residual system has an integer
// point; rows must bound each existential one at a time (true for retained
// projections, which carry their shadow). Falls back to full search.
bool exists_satisfiable(const FlatDisjunct& d, const std::vector<int64_t>& residual,
                        std::vector<int64_t>& ex, size_t level) {
  if (level == d.num_exists) {
    for (size_t i = 0; i < d.cons.size(); ++i) {
      int64_t acc = residual[i];
      for (size_t e = 0; e < d.num_exists; ++e)
        acc += d.cons[i].ex_coeffs[e] * ex[e];
      if (d.cons[i].eq ? acc != 0 : acc < 0) return false;
    }
    return true;
  }
  // Bounds for exist `level` from rows whose later existentials are absent.
  bool has_lo = false, has_hi = false;
  int64_t lo = 0, hi = 0;
  for (size_t i = 0; i < d.cons.size(); ++i) {
    const FlatCon& c = d.cons[i];
    int64_t ce = c.ex_coeffs[level];
    if (ce == 0) continue;
    bool later = false;
    for (size_t e = level + 1; e < d.num_exists; ++e) later = later || c.ex_coeffs[e] != 0;
    if (later) continue;
    int64_t rest = residual[i];
    for (size_t e = 0; e < level; ++e) rest += c.ex_coeffs[e] * ex[e];
    // ce*x + rest >= 0 (or == 0)
    if (c.eq) {
      if (rest % ce != 0) return false;
      int64_t v = -rest / ce;
      if (!has_lo || v > lo) lo = v, has_lo = true;
      if (!has_hi || v < hi) hi = v, has_hi = true;
    } else if (ce > 0) {
      int64_t v = -floor_div(rest, ce);
      if (!has_lo || v > lo) lo = v, has_lo = true;
    } else {
      int64_t v = floor_div(rest, -ce);
      if (!has_hi || v < hi) hi = v, has_hi = true;
    }
  }
  if (!has_lo || !has_hi)
    throw Error(ErrorKind::UnboundedSearch, "existential without finite bounds in enumeration");
  for (int64_t x = lo; x <= hi; ++x) {
    ex[level] = x;
    if (exists_satisfiable(d, residual, ex, level + 1)) return true;
  }
  return false;
}

}  // namespace

std::vector<std::vector<int64_t>> enumerate_set(const IntSet& s, const EnumBox& box) {
  for (const auto& p : s.params()) {
    for (const auto& d : s.disjuncts()) {
      for (const auto& c : d.constraints) {
        if (c.expr.coeff_of_param(p) != 0)
          throw Error(ErrorKind::UndeclaredParameter,
                      "enumerate_set: parameter " + p + " not substituted");
      }
    }
  }
  double total = 1;
  std::vector<std::pair<int64_t, int64_t>> ranges;
  for (const auto& d : s.dims()) {
    auto [lo, hi] = box.of(d);
    if (hi < lo) return {};
    ranges.emplace_back(lo, hi);
    total *= static_cast<double>(hi - lo + 1);
    if (total > 1e7) throw Error(ErrorKind::BoxTooLarge, "more than 10^7 candidate points");
  }

  std::vector<FlatDisjunct> flats;
  for (const auto& d : s.disjuncts()) {
    FlatDisjunct fd;
    fd.num_exists = d.exists.size();
    for (const auto& c : d.constraints) {
      FlatCon fc;
      fc.dim_coeffs.resize(s.dims().size(), 0);
      fc.ex_coeffs.resize(d.exists.size(), 0);
      for (size_t i = 0; i < s.dims().size(); ++i)
        fc.dim_coeffs[i] = c.expr.coeff_of_dim(s.dims()[i]);
      for (size_t e = 0; e < d.exists.size(); ++e)
        fc.ex_coeffs[e] = c.expr.coeff_of_dim(d.exists[e]);
      fc.k = c.expr.constant_term();
      fc.eq = c.kind == ConstraintKind::EqualsZero;
      fd.cons.push_back(std::move(fc));
    }
    flats.push_back(std::move(fd));
  }

  auto member = [&](const std::vector<int64_t>& point) {
    for (const auto& fd : flats) {
      bool ok = true;
      if (fd.num_exists == 0) {
        for (const auto& c : fd.cons) {
          int64_t acc = c.k;
          for (size_t i = 0; i < point.size(); ++i) acc += c.dim_coeffs[i] * point[i];
          if (c.eq ? acc != 0 : acc < 0) {
            ok = false;
            break;
          }
        }
      } else {
        std::vector<int64_t> residual(fd.cons.size());
        for (size_t i = 0; i < fd.cons.size(); ++i) {
          int64_t acc = fd.cons[i].k;
          for (size_t j = 0; j < point.size(); ++j) acc += fd.cons[i].dim_coeffs[j] * point[j];
          residual[i] = acc;
        }
        std::vector<int64_t> ex(fd.num_exists, 0);
        ok = exists_satisfiable(fd, residual, ex, 0);
      }
      if (ok) return true;
    }
    return false;
  };

  std::vector<std::vector<int64_t>> out;
  std::vector<int64_t> point(s.dims().size());
  if (s.dims().empty()) {
    if (member(point)) out.push_back(point);
    return out;
  }
  for (size_t i = 0; i < point.size(); ++i) point[i] = ranges[i].first;
  while (true) {
    if (member(point)) out.push_back(point);
    size_t level = 0;
    for (; level < point.size(); ++level) {
      if (++point[level] <= ranges[level].second) break;
      point[level] = ranges[level].first;
    }
    if (level == point.size()) break;
  }
  std::sort(out.begin(), out.end());
  return out;
}

bool equal_on_box(const IntSet& a, const IntSet& b, const EnumBox& box) {
  if (a.arity() != b.arity()) return false;
  // Compare over positionally matching dimensions.
  EnumBox bbox = box;
  bbox.per_dim.clear();
  for (size_t i = 0; i < a.dims().size(); ++i) {
    bbox.per_dim[b.dims()[i]] = box.of(a.dims()[i]);
  }
  return enumerate_set(a, box) == enumerate_set(b, bbox);
}

// ---------------------------------------------------------------------------
// instances

namespace {

std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ' ' || c == '\t' || c == '\r') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

ElemKind parse_elem_name(const std::string& s, int line) {
  if (s == "i32") return ElemKind::I32;
  if (s == "i64") return ElemKind::I64;
  if (s == "f32") return ElemKind::F32;
  if (s == "f64") return ElemKind::F64;
  throw Error(ErrorKind::SyntaxError, "element type, got " + s, line, 1);
}

}  // namespace

ConcreteInstance parse_instance(const std::string& text) {
  ConcreteInstance inst;
  std::istringstream in(text);
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    size_t hash = raw.find('#');
    if (hash != std::string::npos) raw = raw.substr(0, hash);
    for (char& c : raw)
      if (c == ',') c = ' ';
    std::vector<std::string> tok = split_ws(raw);
    if (tok.empty()) continue;
    const std::string& kw = tok[0];
    if (kw == "instance") {
      if (tok.size() < 2) throw Error(ErrorKind::SyntaxError, "instance name", lineno, 1);
      inst.name = tok[1];
    } else if (kw == "params") {
      for (size_t i = 1; i < tok.size(); ++i) {
        size_t eq = tok[i].find('=');
        if (eq == std::string::npos)
          throw Error(ErrorKind::SyntaxError, "name=value, got " + tok[i], lineno, 1);
        inst.params[tok[i].substr(0, eq)] = std::stoll(tok[i].substr(eq + 1));
      }
    } else if (kw == "grid" || kw == "block") {
      if (tok.size() != 4) throw Error(ErrorKind::SyntaxError, "three extents", lineno, 1);
      int64_t* dst = kw == "grid" ? inst.grid : inst.block;
      for (int i = 0; i < 3; ++i) {
        dst[i] = std::stoll(tok[i + 1]);
        if (dst[i] < 1) throw Error(ErrorKind::SyntaxError, "extents must be >= 1", lineno, 1);
      }
    } else if (kw == "array") {
      if (tok.size() < 4 || tok[3] != "=")
        throw Error(ErrorKind::SyntaxError, "array <name> <elem> = values", lineno, 1);
      ConcreteInstance::ArrayData a;
      a.elem = parse_elem_name(tok[2], lineno);
      for (size_t i = 4; i < tok.size(); ++i) {
        if (a.elem == ElemKind::F32 || a.elem == ElemKind::F64)
          a.floats.push_back(std::stod(tok[i]));
        else
          a.ints.push_back(std::stoll(tok[i]));
      }
      inst.arrays[tok[1]] = std::move(a);
    } else if (kw == "csr") {
      if (tok.size() != 5 || tok[4].rfind("cols=", 0) != 0)
        throw Error(ErrorKind::SyntaxError, "csr <rowPtr> <colInd> <val> cols=<n>", lineno, 1);
      ConcreteInstance::CsrSpec c;
      c.row_ptr = tok[1];
      c.col_ind = tok[2];
      c.val = tok[3];
      c.cols = std::stoll(tok[4].substr(5));
      inst.csr = std::move(c);
    } else {
      throw Error(ErrorKind::SyntaxError, "unknown keyword " + kw, lineno, 1);
    }
  }
  validate_instance(inst);
  return inst;
}

ConcreteInstance load_instance_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_instance(ss.str());
}

void validate_instance(const ConcreteInstance& inst) {
  if (!inst.csr) return;
  const auto& c = *inst.csr;
  auto need = [&](const std::string& n) -> const ConcreteInstance::ArrayData& {
    auto it = inst.arrays.find(n);
    if (it == inst.arrays.end()) throw Error(ErrorKind::CsrInvalid, "missing array " + n);
    return it->second;
  };
  const auto& rp = need(c.row_ptr);
  const auto& ci = need(c.col_ind);
  const auto& vl = need(c.val);
  if (rp.ints.empty() || rp.ints.front() != 0)
    throw Error(ErrorKind::CsrInvalid, c.row_ptr + "[0] must be 0");
  for (size_t i = 1; i < rp.ints.size(); ++i)
    if (rp.ints[i] < rp.ints[i - 1])
      throw Error(ErrorKind::CsrInvalid, c.row_ptr + " must be nondecreasing");
  int64_t nnz = rp.ints.back();
  if (static_cast<size_t>(nnz) != ci.size())
    throw Error(ErrorKind::CsrInvalid, c.row_ptr + " end differs from nnz of " + c.col_ind);
  if (ci.size() != vl.size())
    throw Error(ErrorKind::CsrInvalid, c.col_ind + " and " + c.val + " lengths differ");
  for (int64_t v : ci.ints)
    if (v < 0 || v >= c.cols)
      throw Error(ErrorKind::CsrInvalid, c.col_ind + " entry out of [0," +
                                             std::to_string(c.cols) + ")");
}

// ---------------------------------------------------------------------------
// mini-IR interpreter: threads advance in phase-synchronous rounds, each
// running serially until its next barrier.

namespace {

struct Value {
  bool flt = false;
  int64_t i = 0;
  double f = 0;

  static Value of_int(int64_t v) { return Value{false, v, 0}; }
  static Value of_float(double v) { return Value{true, 0, v}; }
  int64_t as_int(int line) const {
    if (flt) throw Error(ErrorKind::UnsupportedConstruct, "float used as index", line, 1);
    return i;
  }
};

struct ArrayStore {
  ElemKind elem = ElemKind::I32;
  std::vector<int64_t> ints;
  std::vector<double> floats;
  size_t size = 0;

  Value get(int64_t idx) const {
    if (elem == ElemKind::F32 || elem == ElemKind::F64) return Value::of_float(floats[idx]);
    return Value::of_int(ints[idx]);
  }
  void put(int64_t idx, const Value& v) {
    if (elem == ElemKind::F32 || elem == ElemKind::F64)
      floats[idx] = v.flt ? v.f : static_cast<double>(v.i);
    else
      ints[idx] = v.flt ? static_cast<int64_t>(v.f) : v.i;
  }
};

struct ThreadState {
  int64_t block[3] = {0, 0, 0};
  int64_t thread[3] = {0, 0, 0};
  size_t cur_block = 0;
  size_t cur_instr = 0;
  std::optional<size_t> pred_block;
  bool done = false;
  int64_t phase = 0;       // block barriers executed
  int64_t warp_phase = 0;  // all barriers executed
  int64_t serial = 0;
  int64_t steps = 0;
  std::map<std::string, Value> regs;
  std::map<size_t, int64_t> trips;  // loop header block -> trip counter
};

struct Machine {
  const Function& f;
  const ConcreteInstance& inst;
  const RunOptions& opts;
  std::map<std::string, ArrayStore> globals;
  std::vector<std::map<std::string, ArrayStore>> shared;  // per linear block id
  AccessLog log;
  std::vector<size_t> rpo_index;

  Machine(const Function& fn, const ConcreteInstance& in, const RunOptions& op)
      : f(fn), inst(in), opts(op) {
    for (const auto& p : f.params) {
      if (!p.is_pointer) continue;
      auto it = inst.arrays.find(p.name);
      if (it == inst.arrays.end())
        throw Error(ErrorKind::Io, "instance does not define array " + p.name);
      ArrayStore st;
      st.elem = p.elem;
      st.size = it->second.size();
      if (p.elem == ElemKind::F32 || p.elem == ElemKind::F64) {
        st.floats = it->second.floats;
        if (st.floats.empty() && !it->second.ints.empty())
          for (int64_t v : it->second.ints) st.floats.push_back(static_cast<double>(v));
        st.size = st.floats.size();
      } else {
        st.ints = it->second.ints;
        st.size = st.ints.size();
      }
      globals[p.name] = std::move(st);
    }
    int64_t nblocks = inst.grid[0] * inst.grid[1] * inst.grid[2];
    shared.resize(static_cast<size_t>(nblocks));
    for (int64_t b = 0; b < nblocks; ++b) {
      for (const auto& sd : f.shared_decls) {
        ArrayStore st;
        st.elem = sd.elem;
        st.size = static_cast<size_t>(sd.extent);
        if (sd.elem == ElemKind::F32 || sd.elem == ElemKind::F64)
          st.floats.assign(st.size, 0.0);  // shared memory is zero-initialized here
        else
          st.ints.assign(st.size, 0);
        shared[static_cast<size_t>(b)][sd.name] = std::move(st);
      }
    }
    // Retreating-edge detection for trip counters.
    std::vector<int> state(f.blocks.size(), 0);
    std::vector<size_t> order;
    std::vector<std::pair<size_t, size_t>> stack{{0, 0}};
    state[0] = 1;
    while (!stack.empty()) {
      auto& [b, next] = stack.back();
      if (next < f.blocks[b].succs.size()) {
        size_t s = f.blocks[b].succs[next++];
        if (state[s] == 0) {
          state[s] = 1;
          stack.emplace_back(s, 0);
        }
      } else {
        order.push_back(b);
        stack.pop_back();
      }
    }
    rpo_index.assign(f.blocks.size(), SIZE_MAX);
    for (size_t i = 0; i < order.size(); ++i) rpo_index[order[order.size() - 1 - i]] = i;
  }

  size_t linear_block(const ThreadState& t) const {
    return static_cast<size_t>((t.block[2] * inst.grid[1] + t.block[1]) * inst.grid[0] +
                               t.block[0]);
  }

  int64_t intrinsic_value(const ThreadState& t, IntrinsicId id) const {
    switch (id) {
    case IntrinsicId::TidX: return t.thread[0];
    case IntrinsicId::TidY: return t.thread[1];
    case IntrinsicId::TidZ: return t.thread[2];
    case IntrinsicId::BidX: return t.block[0];
    case IntrinsicId::BidY: return t.block[1];
    case IntrinsicId::BidZ: return t.block[2];
    case IntrinsicId::BlockDimX: return inst.block[0];
    case IntrinsicId::BlockDimY: return inst.block[1];
    case IntrinsicId::BlockDimZ: return inst.block[2];
    case IntrinsicId::GridDimX: return inst.grid[0];
    case IntrinsicId::GridDimY: return inst.grid[1];
    case IntrinsicId::GridDimZ: return inst.grid[2];
    }
    return 0;
  }

  Value operand(const ThreadState& t, const Operand& op, int line) const {
    if (!op.is_reg()) return Value::of_int(op.imm);
    auto it = t.regs.find(op.reg);
    if (it != t.regs.end()) return it->second;
    const KernelParam* p = f.find_param(op.reg);
    if (p && !p->is_pointer) {
      auto pv = inst.params.find(op.reg);
      if (pv == inst.params.end())
        throw Error(ErrorKind::Io, "instance does not set parameter " + op.reg);
      return Value::of_int(pv->second);
    }
    throw Error(ErrorKind::SsaViolation, "no runtime value for %" + op.reg, line, 1);
  }

  ArrayStore& resolve(ThreadState& t, const std::string& name, bool& is_shared, int line) {
    if (f.find_shared(name)) {
      is_shared = true;
      return shared[linear_block(t)][name];
    }
    auto it = globals.find(name);
    if (it != globals.end()) {
      is_shared = false;
      return it->second;
    }
    throw Error(ErrorKind::OutOfBounds, "unknown array " + name, line, 1);
  }

  void record(ThreadState& t, const std::string& array, int64_t cell, AccessKind kind,
              const Instruction& ins) {
    AccessLogEntry e;
    for (int i = 0; i < 3; ++i) {
      e.block[i] = t.block[i];
      e.thread[i] = t.thread[i];
    }
    e.phase = t.phase;
    e.warp_phase = t.warp_phase;
    e.serial = t.serial++;
    e.array = array;
    e.cell = {cell};
    e.kind = kind;
    e.instr_index = ins.index;
    if (opts.record_context) {
      if (opts.extraction) {
        const Extraction& ex = *opts.extraction;
        for (const auto& b : ex.model.grid.bindings) {
          int64_t v = 0;
          switch (b.role) {
          case GridRole::BlockX: v = t.block[0]; break;
          case GridRole::BlockY: v = t.block[1]; break;
          case GridRole::BlockZ: v = t.block[2]; break;
          case GridRole::ThreadX: v = t.thread[0]; break;
          case GridRole::ThreadY: v = t.thread[1]; break;
          case GridRole::ThreadZ: v = t.thread[2]; break;
          }
          e.context[b.dim] = v;
        }
        for (const auto& [header, counter] : ex.propagation.counters) {
          auto it = t.trips.find(header);
          e.context[counter] = it == t.trips.end() ? 0 : it->second;
        }
        for (const auto& [param, reg] : ex.param_origins) {
          auto it = t.regs.find(reg);
          if (it != t.regs.end() && !it->second.flt) e.context[param] = it->second.i;
        }
        for (const auto& [pn, pv] : inst.params) e.context[pn] = pv;
        auto sec = ex.instr_section.find(ins.index);
        if (sec != ex.instr_section.end()) e.statement = sec->second;
      }
      for (const auto& [reg, v] : t.regs)
        if (!v.flt) e.registers[reg] = v.i;
    }
    log.push_back(std::move(e));
  }

  // Runs one thread until it passes a barrier or finishes.
  void run_until_barrier(ThreadState& t) {
    while (!t.done) {
      if (t.cur_instr >= f.blocks[t.cur_block].instrs.size()) {
        t.done = true;  // fell off a terminatorless block
        return;
      }
      const Instruction& ins = f.blocks[t.cur_block].instrs[t.cur_instr];
      if (++t.steps > opts.step_limit)
        throw Error(ErrorKind::StepLimitExceeded,
                    "thread exceeded " + std::to_string(opts.step_limit) + " instructions");
      switch (ins.op) {
      case Opcode::Ret: t.done = true; return;
      case Opcode::Br:
      case Opcode::CondBr: {
        std::string target = ins.target;
        if (ins.op == Opcode::CondBr) {
          Value c = operand(t, ins.operands[0], ins.line);
          target = c.i != 0 ? ins.target : ins.target2;
        }
        size_t next = *f.block_index(target);
        // Phi resolution happens on entry, all at once.
        std::vector<std::pair<std::string, Value>> phi_vals;
        for (const auto& pin : f.blocks[next].instrs) {
          if (pin.op != Opcode::Phi) break;
          bool matched = false;
          for (const auto& inc : pin.incoming) {
            if (*f.block_index(inc.pred) == t.cur_block) {
              phi_vals.emplace_back(*pin.result, operand(t, inc.value, pin.line));
              matched = true;
            }
          }
          if (!matched)
            throw Error(ErrorKind::SsaViolation,
                        "phi has no incoming for " + f.blocks[t.cur_block].label, pin.line, 1);
        }
        for (auto& [r, v] : phi_vals) t.regs[r] = v;
        // Trip counters: retreating edge increments, forward entry resets.
        if (rpo_index[next] <= rpo_index[t.cur_block])
          t.trips[next] = t.trips.count(next) ? t.trips[next] + 1 : 1;
        else
          t.trips[next] = 0;
        t.pred_block = t.cur_block;
        t.cur_block = next;
        // skip the phis, they are already materialized
        size_t skip = 0;
        while (skip < f.blocks[next].instrs.size() &&
               f.blocks[next].instrs[skip].op == Opcode::Phi)
          ++skip;
        t.cur_instr = skip;
        break;
      }
      case Opcode::Barrier: {
        if (ins.scope == BarrierScope::Block) ++t.phase;
        ++t.warp_phase;
        ++t.cur_instr;
        return;  // yield to the round scheduler
      }
      case Opcode::Phi:
        throw Error(ErrorKind::SsaViolation, "phi not at block entry", ins.line, 1);
      case Opcode::Add:
      case Opcode::Sub:
      case Opcode::Mul: {
        Value a = operand(t, ins.operands[0], ins.line);
        Value b = operand(t, ins.operands[1], ins.line);
        Value r;
        if (a.flt || b.flt) {
          double x = a.flt ? a.f : static_cast<double>(a.i);
          double y = b.flt ? b.f : static_cast<double>(b.i);
          r = Value::of_float(ins.op == Opcode::Add   ? x + y
                              : ins.op == Opcode::Sub ? x - y
                                                      : x * y);
        } else {
          r = Value::of_int(ins.op == Opcode::Add   ? checked_add(a.i, b.i)
                            : ins.op == Opcode::Sub ? checked_add(a.i, -b.i)
                                                    : checked_mul(a.i, b.i));
        }
        t.regs[*ins.result] = r;
        ++t.cur_instr;
        break;
      }
      case Opcode::Shl: {
        Value a = operand(t, ins.operands[0], ins.line);
        Value b = operand(t, ins.operands[1], ins.line);
        t.regs[*ins.result] = Value::of_int(a.as_int(ins.line) << b.as_int(ins.line));
        ++t.cur_instr;
        break;
      }
      case Opcode::Icmp: {
        Value a = operand(t, ins.operands[0], ins.line);
        Value b = operand(t, ins.operands[1], ins.line);
        double x = a.flt ? a.f : static_cast<double>(a.i);
        double y = b.flt ? b.f : static_cast<double>(b.i);
        bool r = false;
        switch (ins.pred) {
        case IcmpPred::Eq: r = x == y; break;
        case IcmpPred::Ne: r = x != y; break;
        case IcmpPred::Lt: r = x < y; break;
        case IcmpPred::Le: r = x <= y; break;
        case IcmpPred::Gt: r = x > y; break;
        case IcmpPred::Ge: r = x >= y; break;
        }
        t.regs[*ins.result] = Value::of_int(r ? 1 : 0);
        ++t.cur_instr;
        break;
      }
      case Opcode::Select: {
        Value c = operand(t, ins.operands[0], ins.line);
        t.regs[*ins.result] = c.i != 0 ? operand(t, ins.operands[1], ins.line)
                                       : operand(t, ins.operands[2], ins.line);
        ++t.cur_instr;
        break;
      }
      case Opcode::AllocaShared:
        // already materialized per block
        ++t.cur_instr;
        break;
      case Opcode::GetElem:
        // handles are resolved symbolically by name at load/store
        ++t.cur_instr;
        break;
      case Opcode::Load:
      case Opcode::Store: {
        std::string array = ins.array;
        std::vector<Operand> indices = ins.indices;
        // getelem handle indirection
        for (const auto& blk : f.blocks) {
          for (const auto& g : blk.instrs) {
            if (g.op == Opcode::GetElem && g.result && *g.result == array) {
              array = g.array;
              indices = g.indices;
            }
          }
        }
        if (indices.size() != 1)
          throw Error(ErrorKind::UnsupportedConstruct,
                      "interpreter supports flat (single-index) accesses", ins.line, 1);
        int64_t idx = operand(t, indices[0], ins.line).as_int(ins.line);
        bool is_shared = false;
        ArrayStore& st = resolve(t, array, is_shared, ins.line);
        if (idx < 0 || static_cast<size_t>(idx) >= st.size)
          throw Error(ErrorKind::OutOfBounds,
                      array + "[" + std::to_string(idx) + "] outside size " +
                          std::to_string(st.size),
                      ins.line, 1);
        if (ins.op == Opcode::Load) {
          record(t, array, idx, AccessKind::Read, ins);
          t.regs[*ins.result] = st.get(idx);
        } else {
          record(t, array, idx, AccessKind::Write, ins);
          st.put(idx, operand(t, ins.operands[0], ins.line));
        }
        ++t.cur_instr;
        break;
      }
      case Opcode::IntrinsicCall:
        t.regs[*ins.result] = Value::of_int(intrinsic_value(t, ins.intrinsic));
        ++t.cur_instr;
        break;
      }
    }
  }
};

}  // namespace

AccessLog run(const ConcreteInstance& inst, const Function& f, const RunOptions& opts) {
  validate_instance(inst);
  Machine m(f, inst, opts);
  std::vector<ThreadState> threads;
  for (int64_t bz = 0; bz < inst.grid[2]; ++bz)
    for (int64_t by = 0; by < inst.grid[1]; ++by)
      for (int64_t bx = 0; bx < inst.grid[0]; ++bx)
        for (int64_t tz = 0; tz < inst.block[2]; ++tz)
          for (int64_t ty = 0; ty < inst.block[1]; ++ty)
            for (int64_t tx = 0; tx < inst.block[0]; ++tx) {
              ThreadState t;
              t.block[0] = bx;
              t.block[1] = by;
              t.block[2] = bz;
              t.thread[0] = tx;
              t.thread[1] = ty;
              t.thread[2] = tz;
              threads.push_back(std::move(t));
            }
  bool all_done = false;
  while (!all_done) {
    all_done = true;
    if (opts.reverse_thread_order) {
      for (auto it = threads.rbegin(); it != threads.rend(); ++it)
        if (!it->done) {
          m.run_until_barrier(*it);
          all_done = all_done && it->done;
        }
    } else {
      for (auto& t : threads)
        if (!t.done) {
          m.run_until_barrier(t);
          all_done = all_done && t.done;
        }
    }
  }
  return std::move(m.log);
}

// ---------------------------------------------------------------------------
// model interpreter

AccessLog run(const ConcreteInstance& inst, const KernelModel& model, const RunOptions& opts) {
  validate_instance(inst);
  KernelModel m = model.substitute_params(inst.params);
  for (const auto& p : m.params)
    throw Error(ErrorKind::UnsupportedConstruct,
                "model parameter " + p + " has no instance value; cells are undetermined");

  // Deterministic evaluation box.
  int64_t hi = 4;
  for (const auto& [k, v] : inst.params) hi = std::max(hi, v);
  for (int i = 0; i < 3; ++i) hi = std::max({hi, inst.grid[i], inst.block[i]});
  for (const auto& a : m.arrays)
    for (int64_t e : a.extents) hi = std::max(hi, e);
  EnumBox box(-1, hi + 1);

  struct Entry {
    std::vector<int64_t> ts;
    AccessLogEntry log;
  };
  std::vector<Entry> entries;

  for (const auto& st : m.statements) {
    IntSet dom = full_domain(m, st);
    const auto& ts_exprs = m.schedule.timestamps.at(st.label);
    for (const auto& point : enumerate_set(dom, box)) {
      std::map<std::string, int64_t> env;
      for (size_t i = 0; i < dom.dims().size(); ++i) {
        env[dom.dims()[i]] = point[i];
        if (point[i] <= box.lo || point[i] >= box.hi)
          throw Error(ErrorKind::BoxTooLarge, "model domain touches the evaluation box");
      }
      AccessLogEntry base;
      for (const auto& b : m.grid.bindings) {
        int64_t v = env.at(b.dim);
        switch (b.role) {
        case GridRole::BlockX: base.block[0] = v; break;
        case GridRole::BlockY: base.block[1] = v; break;
        case GridRole::BlockZ: base.block[2] = v; break;
        case GridRole::ThreadX: base.thread[0] = v; break;
        case GridRole::ThreadY: base.thread[1] = v; break;
        case GridRole::ThreadZ: base.thread[2] = v; break;
        }
      }
      std::vector<int64_t> ts;
      for (const auto& comp : ts_exprs) ts.push_back(comp.eval(env, {}));
      base.phase = ts.empty() ? 0 : ts[0];
      base.warp_phase = m.schedule.has_warp_phase && ts.size() > 1 ? ts[1] : base.phase;
      base.statement = st.label;
      if (opts.record_context) base.context = env;

      auto emit = [&](const Access& acc, AccessKind kind) {
        // cells of this instance: substitute the instance point and
        // enumerate the residual cell tuple
        IntSet cells(acc.array, acc.rel.out_dims());
        for (const auto& d : acc.rel.as_set().disjuncts()) {
          Disjunct nd;
          nd.exists = d.exists;
          for (const auto& c : d.constraints) {
            AffineExpr e = c.expr;
            for (const auto& [dim, v] : env) e = e.substitute_dim(dim, AffineExpr::constant(v));
            nd.constraints.push_back(Constraint{e, c.kind});
          }
          cells.add_disjunct(std::move(nd));
        }
        auto pts = enumerate_set(cells, box);
        if (pts.size() != 1)
          throw Error(ErrorKind::UnsupportedConstruct,
                      st.label + " access to " + acc.array + " has " +
                          std::to_string(pts.size()) + " cells at one instance");
        Entry e;
        e.ts = ts;
        e.log = base;
        e.log.array = acc.array;
        e.log.cell = pts[0];
        e.log.kind = kind;
        entries.push_back(std::move(e));
      };
      for (const auto& acc : st.reads) emit(acc, AccessKind::Read);
      for (const auto& acc : st.writes) emit(acc, AccessKind::Write);
    }
  }

  // Per-thread serialization in timestamp order.
  std::stable_sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    for (int i = 2; i >= 0; --i) {
      if (a.log.block[i] != b.log.block[i]) return a.log.block[i] < b.log.block[i];
    }
    for (int i = 2; i >= 0; --i) {
      if (a.log.thread[i] != b.log.thread[i]) return a.log.thread[i] < b.log.thread[i];
    }
    return a.ts < b.ts;
  });
  AccessLog log;
  int64_t serial = 0;
  const Entry* prev = nullptr;
  for (auto& e : entries) {
    bool same = prev && e.log.same_thread(prev->log);
    serial = same ? serial + 1 : 0;
    e.log.serial = serial;
    log.push_back(e.log);
    prev = &e;
  }
  return log;
}

// ---------------------------------------------------------------------------
// race detection from the log

OracleVerdict detect_races(const AccessLog& log, const std::map<std::string, MemSpace>& spaces,
                           int64_t warp_width) {
  AccessLog norm = log;
  std::sort(norm.begin(), norm.end(), [](const AccessLogEntry& a, const AccessLogEntry& b) {
    auto ka = std::make_tuple(a.block[2], a.block[1], a.block[0], a.thread[2], a.thread[1],
                              a.thread[0], a.serial);
    auto kb = std::make_tuple(b.block[2], b.block[1], b.block[0], b.thread[2], b.thread[1],
                              b.thread[0], b.serial);
    return ka < kb;
  });

  OracleVerdict out;
  for (size_t i = 0; i < norm.size(); ++i) {
    for (size_t j = i + 1; j < norm.size(); ++j) {
      const AccessLogEntry& a = norm[i];
      const AccessLogEntry& b = norm[j];
      if (a.array != b.array || a.cell != b.cell) continue;
      if (a.kind == AccessKind::Read && b.kind == AccessKind::Read) continue;
      if (a.same_thread(b)) continue;
      MemSpace space = MemSpace::Global;
      auto it = spaces.find(a.array);
      if (it != spaces.end()) space = it->second;
      bool race = false;
      if (!a.same_block(b)) {
        // No synchronization exists across blocks.
        race = space == MemSpace::Global;
      } else if (a.phase == b.phase) {
        if (warp_width > 0) {
          bool same_warp = a.thread[0] / warp_width == b.thread[0] / warp_width &&
                           a.thread[1] == b.thread[1] && a.thread[2] == b.thread[2];
          race = !same_warp || a.warp_phase == b.warp_phase;
        } else {
          race = true;
        }
      }
      if (race) out.pairs.push_back(OracleRacePair{a, b});
    }
  }
  out.race_found = !out.pairs.empty();
  return out;
}

}  // namespace raceset
