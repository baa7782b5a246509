// Copyright (c) raceset contributors.
// SPDX-License-Identifier: Apache-2.0
#include "raceset/miniir.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <sstream>

namespace raceset {

const char* intrinsic_name(IntrinsicId id) {
  switch (id) {
  case IntrinsicId::TidX: return "tid.x";
  case IntrinsicId::TidY: return "tid.y";
  case IntrinsicId::TidZ: return "tid.z";
  case IntrinsicId::BidX: return "bid.x";
  case IntrinsicId::BidY: return "bid.y";
  case IntrinsicId::BidZ: return "bid.z";
  case IntrinsicId::BlockDimX: return "blockdim.x";
  case IntrinsicId::BlockDimY: return "blockdim.y";
  case IntrinsicId::BlockDimZ: return "blockdim.z";
  case IntrinsicId::GridDimX: return "griddim.x";
  case IntrinsicId::GridDimY: return "griddim.y";
  case IntrinsicId::GridDimZ: return "griddim.z";
  }
  return "?";
}

std::optional<IntrinsicId> intrinsic_from_name(const std::string& s) {
  for (int i = 0; i <= static_cast<int>(IntrinsicId::GridDimZ); ++i) {
    IntrinsicId id = static_cast<IntrinsicId>(i);
    if (s == intrinsic_name(id)) return id;
  }
  return std::nullopt;
}

Operand Operand::r(std::string name) {
  Operand o;
  o.kind = Kind::Reg;
  o.reg = std::move(name);
  return o;
}

Operand Operand::i(int64_t v) {
  Operand o;
  o.kind = Kind::Imm;
  o.imm = v;
  return o;
}

std::optional<size_t> Function::block_index(const std::string& label) const {
  for (size_t i = 0; i < blocks.size(); ++i)
    if (blocks[i].label == label) return i;
  return std::nullopt;
}

const KernelParam* Function::find_param(const std::string& name) const {
  for (const auto& p : params)
    if (p.name == name) return &p;
  return nullptr;
}

const SharedDecl* Function::find_shared(const std::string& name) const {
  for (const auto& s : shared_decls)
    if (s.name == name) return &s;
  return nullptr;
}

// ---------------------------------------------------------------------------
// parsing

namespace {

struct Cursor {
  const std::string& s;
  size_t pos = 0;
  int line;

  void skip_ws() {
    while (pos < s.size() && (s[pos] == ' ' || s[pos] == '\t')) ++pos;
  }
  bool done() {
    skip_ws();
    return pos >= s.size();
  }
  [[noreturn]] void fail(const std::string& expected) {
    throw Error(ErrorKind::SyntaxError, "expected " + expected, line, static_cast<int>(pos) + 1);
  }
  bool eat(char c) {
    skip_ws();
    if (pos < s.size() && s[pos] == c) {
      ++pos;
      return true;
    }
    return false;
  }
  void expect(char c) {
    if (!eat(c)) fail(std::string("'") + c + "'");
  }
  bool eat_word(const std::string& w) {
    skip_ws();
    if (s.compare(pos, w.size(), w) == 0) {
      size_t end = pos + w.size();
      if (end < s.size() &&
          (isalnum(static_cast<unsigned char>(s[end])) || s[end] == '_' || s[end] == '.'))
        return false;
      pos = end;
      return true;
    }
    return false;
  }
  std::string ident() {
    skip_ws();
    size_t start = pos;
    while (pos < s.size() &&
           (isalnum(static_cast<unsigned char>(s[pos])) || s[pos] == '_' || s[pos] == '.'))
      ++pos;
    if (pos == start) fail("identifier");
    return s.substr(start, pos - start);
  }
  std::string reg() {
    skip_ws();
    if (pos >= s.size() || s[pos] != '%') fail("register (%name)");
    ++pos;
    return ident();
  }
  int64_t integer() {
    skip_ws();
    size_t start = pos;
    if (pos < s.size() && s[pos] == '-') ++pos;
    while (pos < s.size() && isdigit(static_cast<unsigned char>(s[pos]))) ++pos;
    if (pos == start || (s[start] == '-' && pos == start + 1)) fail("integer");
    return std::stoll(s.substr(start, pos - start));
  }
  Operand operand() {
    skip_ws();
    if (pos < s.size() && s[pos] == '%') return Operand::r(reg());
    return Operand::i(integer());
  }
  bool peek_reg() {
    skip_ws();
    return pos < s.size() && s[pos] == '%';
  }
};

ElemKind elem_from_name(const std::string& s, Cursor& c) {
  if (s == "i32") return ElemKind::I32;
  if (s == "i64") return ElemKind::I64;
  if (s == "f32") return ElemKind::F32;
  if (s == "f64") return ElemKind::F64;
  c.fail("element type (i32|i64|f32|f64)");
}

void parse_shared_shape(Cursor& c, int64_t& extent, ElemKind& elem) {
  c.expect('[');
  extent = c.integer();
  if (!c.eat_word("x")) c.fail("'x'");
  elem = elem_from_name(c.ident(), c);
  c.expect(']');
  if (extent < 1) c.fail("positive shared extent");
}

std::string strip_comment(const std::string& line) {
  size_t p = line.find(';');
  return p == std::string::npos ? line : line.substr(0, p);
}

bool blank(const std::string& s) { return s.find_first_not_of(" \t\r") == std::string::npos; }

struct Doms {
  std::vector<size_t> idom;
  std::vector<size_t> rpo_index;
  std::vector<size_t> rpo;

  bool dominates(size_t a, size_t b) const {
    while (true) {
      if (a == b) return true;
      if (b == idom[b]) return false;
      b = idom[b];
    }
  }
};

Doms compute_dominators(const Function& f) {
  size_t n = f.blocks.size();
  Doms d;
  std::vector<int> state(n, 0);
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
  d.rpo.assign(order.rbegin(), order.rend());
  d.rpo_index.assign(n, SIZE_MAX);
  for (size_t i = 0; i < d.rpo.size(); ++i) d.rpo_index[d.rpo[i]] = i;

  d.idom.assign(n, SIZE_MAX);
  d.idom[0] = 0;
  auto meet = [&](size_t a, size_t b) {
    while (a != b) {
      while (d.rpo_index[a] > d.rpo_index[b]) a = d.idom[a];
      while (d.rpo_index[b] > d.rpo_index[a]) b = d.idom[b];
    }
    return a;
  };
  bool changed = true;
  while (changed) {
    changed = false;
    for (size_t i = 1; i < d.rpo.size(); ++i) {
      size_t b = d.rpo[i];
      size_t nid = SIZE_MAX;
      for (size_t p : f.blocks[b].preds) {
        if (d.idom[p] == SIZE_MAX) continue;
        nid = nid == SIZE_MAX ? p : meet(nid, p);
      }
      if (nid != SIZE_MAX && d.idom[b] != nid) {
        d.idom[b] = nid;
        changed = true;
      }
    }
  }
  return d;
}

void verify_ssa(const Function& f, const Doms& doms) {
  std::map<std::string, std::pair<size_t, size_t>> def_site;
  for (size_t b = 0; b < f.blocks.size(); ++b) {
    for (size_t i = 0; i < f.blocks[b].instrs.size(); ++i) {
      const Instruction& ins = f.blocks[b].instrs[i];
      if (!ins.result) continue;
      if (f.find_param(*ins.result))
        throw Error(ErrorKind::SsaViolation, "%" + *ins.result + " shadows a kernel parameter",
                    ins.line, 1);
      if (!def_site.emplace(*ins.result, std::make_pair(b, i)).second)
        throw Error(ErrorKind::SsaViolation, "%" + *ins.result + " defined twice", ins.line, 1);
    }
  }
  auto check_use = [&](const Operand& op, size_t b, size_t i, const Instruction& ins,
                       std::optional<size_t> from_pred) {
    if (!op.is_reg()) return;
    if (f.find_param(op.reg)) return;
    auto it = def_site.find(op.reg);
    if (it == def_site.end())
      throw Error(ErrorKind::SsaViolation, "use of undefined %" + op.reg, ins.line, 1);
    auto [db, di] = it->second;
    if (from_pred) {
      if (!(db == *from_pred || doms.dominates(db, *from_pred)))
        throw Error(ErrorKind::SsaViolation,
                    "%" + op.reg + " does not dominate predecessor " + f.blocks[*from_pred].label,
                    ins.line, 1);
      return;
    }
    bool ok = db == b ? di < i : doms.dominates(db, b);
    if (!ok)
      throw Error(ErrorKind::SsaViolation, "use of %" + op.reg + " before its definition",
                  ins.line, 1);
  };
  for (size_t b = 0; b < f.blocks.size(); ++b) {
    if (doms.rpo_index[b] == SIZE_MAX)
      throw Error(ErrorKind::SsaViolation, "unreachable block " + f.blocks[b].label,
                  f.blocks[b].line, 1);
    for (size_t i = 0; i < f.blocks[b].instrs.size(); ++i) {
      const Instruction& ins = f.blocks[b].instrs[i];
      if (ins.op == Opcode::Phi) {
        for (const auto& inc : ins.incoming) {
          auto pb = f.block_index(inc.pred);
          if (!pb)
            throw Error(ErrorKind::SyntaxError, "phi references unknown block " + inc.pred,
                        ins.line, 1);
          check_use(inc.value, b, i, ins, *pb);
        }
        continue;
      }
      for (const auto& op : ins.operands) check_use(op, b, i, ins, std::nullopt);
      for (const auto& op : ins.indices) check_use(op, b, i, ins, std::nullopt);
      if ((ins.op == Opcode::Load || ins.op == Opcode::Store || ins.op == Opcode::GetElem) &&
          !ins.array.empty() && !f.find_param(ins.array) && !f.find_shared(ins.array)) {
        check_use(Operand::r(ins.array), b, i, ins, std::nullopt);
      }
    }
  }
}

}  // namespace

Function parse_miniir(const std::string& text) {
  std::istringstream in(text);
  std::string raw;
  int lineno = 0;
  Function f;
  bool header_done = false;
  bool body_closed = false;
  BasicBlock* cur = nullptr;

  auto ensure_block = [&](int line) -> BasicBlock& {
    if (!cur) throw Error(ErrorKind::SyntaxError, "instruction outside a labeled block", line, 1);
    if (!cur->instrs.empty()) {
      Opcode last = cur->instrs.back().op;
      if (last == Opcode::Br || last == Opcode::CondBr || last == Opcode::Ret)
        throw Error(ErrorKind::SyntaxError, "instruction after terminator", line, 1);
    }
    return *cur;
  };

  while (std::getline(in, raw)) {
    ++lineno;
    std::string line = strip_comment(raw);
    if (blank(line)) continue;
    size_t b0 = line.find_first_not_of(" \t");
    size_t e0 = line.find_last_not_of(" \t\r");
    std::string body = line.substr(b0, e0 - b0 + 1);
    Cursor c{body, 0, lineno};

    if (!header_done) {
      if (!c.eat_word("kernel")) c.fail("'kernel'");
      c.expect('@');
      f.name = c.ident();
      c.expect('(');
      if (!c.eat(')')) {
        while (true) {
          KernelParam p;
          p.name = c.reg();
          c.expect(':');
          p.elem = elem_from_name(c.ident(), c);
          if (c.eat('*')) p.is_pointer = true;
          f.params.push_back(std::move(p));
          if (c.eat(')')) break;
          c.expect(',');
        }
      }
      if (c.eat('[')) {
        if (!c.eat_word("shared")) c.fail("'shared'");
        while (true) {
          SharedDecl s;
          s.name = c.reg();
          c.expect(':');
          parse_shared_shape(c, s.extent, s.elem);
          f.shared_decls.push_back(std::move(s));
          if (c.eat(']')) break;
          c.expect(',');
        }
      }
      c.expect('{');
      header_done = true;
      continue;
    }

    if (body == "}") {
      body_closed = true;
      continue;
    }
    if (body_closed) throw Error(ErrorKind::SyntaxError, "text after '}'", lineno, 1);

    if (body.back() == ':' && body.find(' ') == std::string::npos &&
        body.find('=') == std::string::npos) {
      f.blocks.emplace_back();
      cur = &f.blocks.back();
      cur->label = body.substr(0, body.size() - 1);
      cur->line = lineno;
      continue;
    }

    Instruction ins;
    ins.line = lineno;

    if (c.peek_reg()) {
      ins.result = c.reg();
      c.expect('=');
      std::string op = c.ident();
      if (op == "add" || op == "sub" || op == "mul" || op == "shl") {
        ins.op = op == "add"   ? Opcode::Add
                 : op == "sub" ? Opcode::Sub
                 : op == "mul" ? Opcode::Mul
                               : Opcode::Shl;
        ins.operands.push_back(c.operand());
        c.expect(',');
        ins.operands.push_back(c.operand());
      } else if (op == "icmp") {
        ins.op = Opcode::Icmp;
        std::string pred = c.ident();
        if (pred == "eq")
          ins.pred = IcmpPred::Eq;
        else if (pred == "ne")
          ins.pred = IcmpPred::Ne;
        else if (pred == "lt")
          ins.pred = IcmpPred::Lt;
        else if (pred == "le")
          ins.pred = IcmpPred::Le;
        else if (pred == "gt")
          ins.pred = IcmpPred::Gt;
        else if (pred == "ge")
          ins.pred = IcmpPred::Ge;
        else
          c.fail("icmp predicate (eq|ne|lt|le|gt|ge)");
        ins.operands.push_back(c.operand());
        c.expect(',');
        ins.operands.push_back(c.operand());
      } else if (op == "select") {
        ins.op = Opcode::Select;
        for (int i = 0; i < 3; ++i) {
          if (i) c.expect(',');
          ins.operands.push_back(c.operand());
        }
      } else if (op == "load") {
        ins.op = Opcode::Load;
        if (c.peek_reg()) {
          ins.array = c.reg();  // getelem handle
          if (c.eat('[')) {
            while (true) {
              ins.indices.push_back(c.operand());
              if (c.eat(']')) break;
              c.expect(',');
            }
          }
        } else {
          ins.array = c.ident();
          c.expect('[');
          while (true) {
            ins.indices.push_back(c.operand());
            if (c.eat(']')) break;
            c.expect(',');
          }
        }
      } else if (op == "phi") {
        ins.op = Opcode::Phi;
        while (true) {
          c.expect('[');
          PhiIncoming inc;
          inc.value = c.operand();
          c.expect(',');
          inc.pred = c.ident();
          c.expect(']');
          ins.incoming.push_back(std::move(inc));
          if (!c.eat(',')) break;
        }
        if (ins.incoming.empty()) c.fail("phi incoming list");
      } else if (op == "call") {
        ins.op = Opcode::IntrinsicCall;
        std::string name = c.ident();
        auto id = intrinsic_from_name(name);
        if (!id) c.fail("intrinsic (tid.x|bid.x|blockdim.x|griddim.x|...)");
        ins.intrinsic = *id;
      } else if (op == "alloca_shared") {
        ins.op = Opcode::AllocaShared;
        parse_shared_shape(c, ins.shared_extent, ins.shared_elem);
        SharedDecl s;
        s.name = *ins.result;
        s.extent = ins.shared_extent;
        s.elem = ins.shared_elem;
        f.shared_decls.push_back(std::move(s));
      } else if (op == "getelem") {
        ins.op = Opcode::GetElem;
        ins.array = c.ident();
        while (c.eat(',')) ins.indices.push_back(c.operand());
        if (ins.indices.empty()) c.fail("getelem indices");
      } else {
        throw Error(ErrorKind::UnknownOpcode, op, lineno, 1);
      }
    } else {
      std::string op = c.ident();
      if (op == "store") {
        ins.op = Opcode::Store;
        ins.operands.push_back(c.operand());
        c.expect(',');
        if (c.peek_reg()) {
          ins.array = c.reg();
          if (c.eat('[')) {
            while (true) {
              ins.indices.push_back(c.operand());
              if (c.eat(']')) break;
              c.expect(',');
            }
          }
        } else {
          ins.array = c.ident();
          c.expect('[');
          while (true) {
            ins.indices.push_back(c.operand());
            if (c.eat(']')) break;
            c.expect(',');
          }
        }
      } else if (op == "br") {
        if (c.peek_reg()) {
          ins.op = Opcode::CondBr;
          ins.operands.push_back(Operand::r(c.reg()));
          c.expect(',');
          ins.target = c.ident();
          c.expect(',');
          ins.target2 = c.ident();
        } else {
          ins.op = Opcode::Br;
          ins.target = c.ident();
        }
      } else if (op == "barrier" || op == "barrier.block") {
        ins.op = Opcode::Barrier;
        ins.scope = BarrierScope::Block;
      } else if (op == "barrier.warp") {
        ins.op = Opcode::Barrier;
        ins.scope = BarrierScope::Warp;
        c.expect('<');
        ins.warp_width = c.integer();
        c.expect('>');
        if (ins.warp_width < 1) c.fail("positive warp width");
      } else if (op == "ret") {
        ins.op = Opcode::Ret;
      } else {
        throw Error(ErrorKind::UnknownOpcode, op, lineno, 1);
      }
    }
    if (!c.done()) c.fail("end of instruction");
    ensure_block(lineno).instrs.push_back(std::move(ins));
  }

  if (!header_done) throw Error(ErrorKind::SyntaxError, "missing kernel header", lineno, 1);
  if (!body_closed) throw Error(ErrorKind::SyntaxError, "missing closing '}'", lineno, 1);
  if (f.blocks.empty()) {
    f.blocks.emplace_back();
    f.blocks.front().label = "entry";
  }

  size_t idx = 0;
  for (auto& b : f.blocks)
    for (auto& ins : b.instrs) ins.index = idx++;
  for (size_t b = 0; b < f.blocks.size(); ++b) {
    auto& blk = f.blocks[b];
    for (size_t i = 0; i + 1 < blk.instrs.size(); ++i) {
      Opcode o = blk.instrs[i].op;
      if (o == Opcode::Br || o == Opcode::CondBr || o == Opcode::Ret)
        throw Error(ErrorKind::SyntaxError, "terminator in the middle of a block",
                    blk.instrs[i].line, 1);
    }
    if (blk.instrs.empty()) continue;
    const Instruction& last = blk.instrs.back();
    auto link = [&](const std::string& target, int line) {
      auto t = f.block_index(target);
      if (!t) throw Error(ErrorKind::SyntaxError, "branch to unknown block " + target, line, 1);
      blk.succs.push_back(*t);
      f.blocks[*t].preds.push_back(b);
    };
    if (last.op == Opcode::Br) link(last.target, last.line);
    if (last.op == Opcode::CondBr) {
      link(last.target, last.line);
      link(last.target2, last.line);
    }
  }

  Doms doms = compute_dominators(f);
  verify_ssa(f, doms);
  return f;
}

Function load_miniir_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_miniir(ss.str());
}

// ---------------------------------------------------------------------------
// loops

namespace {

// Folds a register to a compile-time constant: literals, launch extents,
// and add/sub/mul/shl chains over constants.
std::optional<int64_t> const_eval(const Function& f, const Operand& op,
                                  const std::optional<GridLaunch>& launch,
                                  int depth = 0) {
  if (!op.is_reg()) return op.imm;
  if (depth > 64) return std::nullopt;
  for (const auto& b : f.blocks) {
    for (const auto& ins : b.instrs) {
      if (!ins.result || *ins.result != op.reg) continue;
      switch (ins.op) {
      case Opcode::Add:
      case Opcode::Sub:
      case Opcode::Mul:
      case Opcode::Shl: {
        auto x = const_eval(f, ins.operands[0], launch, depth + 1);
        auto y = const_eval(f, ins.operands[1], launch, depth + 1);
        if (!x || !y) return std::nullopt;
        switch (ins.op) {
        case Opcode::Add: return checked_add(*x, *y);
        case Opcode::Sub: return checked_add(*x, -*y);
        case Opcode::Mul: return checked_mul(*x, *y);
        default: return *y >= 0 && *y < 63 ? std::optional<int64_t>(*x << *y) : std::nullopt;
        }
      }
      case Opcode::IntrinsicCall: {
        if (!launch) return std::nullopt;
        switch (ins.intrinsic) {
        case IntrinsicId::BlockDimX: return launch->block[0];
        case IntrinsicId::BlockDimY: return launch->block[1];
        case IntrinsicId::BlockDimZ: return launch->block[2];
        case IntrinsicId::GridDimX: return launch->grid[0];
        case IntrinsicId::GridDimY: return launch->grid[1];
        case IntrinsicId::GridDimZ: return launch->grid[2];
        default: return std::nullopt;
        }
      }
      default: return std::nullopt;
      }
    }
  }
  return std::nullopt;
}

}  // namespace

std::vector<LoopInfo> find_loops(const Function& f) { return find_loops(f, std::nullopt); }

std::vector<LoopInfo> find_loops(const Function& f, const std::optional<GridLaunch>& launch) {
  Doms doms = compute_dominators(f);
  std::vector<LoopInfo> loops;

  for (size_t b = 0; b < f.blocks.size(); ++b) {
    for (size_t s : f.blocks[b].succs) {
      if (doms.rpo_index[s] > doms.rpo_index[b]) continue;
      if (!doms.dominates(s, b))
        throw Error(ErrorKind::IrreducibleCfg, "retreating edge " + f.blocks[b].label + " -> " +
                                                   f.blocks[s].label + " is not a back edge");
      LoopInfo li;
      li.header = s;
      li.latch = b;
      li.blocks.insert(s);
      std::vector<size_t> work{b};
      while (!work.empty()) {
        size_t x = work.back();
        work.pop_back();
        if (li.blocks.count(x)) continue;
        li.blocks.insert(x);
        for (size_t p : f.blocks[x].preds) work.push_back(p);
      }
      loops.push_back(std::move(li));
    }
  }
  for (size_t i = 0; i < loops.size(); ++i)
    for (size_t j = i + 1; j < loops.size(); ++j)
      if (loops[i].header == loops[j].header)
        throw Error(ErrorKind::UnsupportedConstruct,
                    "multiple back edges into " + f.blocks[loops[i].header].label);

  std::sort(loops.begin(), loops.end(), [](const LoopInfo& a, const LoopInfo& b) {
    if (a.blocks.size() != b.blocks.size()) return a.blocks.size() < b.blocks.size();
    return a.header < b.header;
  });

  for (auto& li : loops) {
    const BasicBlock& header = f.blocks[li.header];
    for (const auto& ins : header.instrs) {
      if (ins.op != Opcode::Phi) continue;
      if (ins.incoming.size() != 2) {
        li.carried_phis.push_back(*ins.result);
        continue;
      }
      const PhiIncoming* from_latch = nullptr;
      const PhiIncoming* from_outside = nullptr;
      for (const auto& inc : ins.incoming) {
        auto pb = f.block_index(inc.pred);
        if (pb && li.blocks.count(*pb))
          from_latch = &inc;
        else
          from_outside = &inc;
      }
      if (!from_latch || !from_outside) {
        li.carried_phis.push_back(*ins.result);
        continue;
      }
      std::optional<int64_t> step;
      if (from_latch->value.is_reg()) {
        for (size_t blk : li.blocks) {
          for (const auto& d : f.blocks[blk].instrs) {
            if (!d.result || *d.result != from_latch->value.reg) continue;
            if ((d.op == Opcode::Add || d.op == Opcode::Sub) && d.operands.size() == 2) {
              const Operand& x = d.operands[0];
              const Operand& y = d.operands[1];
              if (x.is_reg() && x.reg == *ins.result) {
                auto sv = const_eval(f, y, launch);
                if (sv) step = d.op == Opcode::Add ? *sv : -*sv;
              } else if (d.op == Opcode::Add && y.is_reg() && y.reg == *ins.result) {
                auto sv = const_eval(f, x, launch);
                if (sv) step = *sv;
              }
            }
          }
        }
      }
      if (!step) {
        li.carried_phis.push_back(*ins.result);
        continue;
      }
      if (*step == 0)
        throw Error(ErrorKind::NonAffineBound, "zero induction step in " + header.label, ins.line,
                    1);
      if (!li.induction.empty()) {
        li.carried_phis.push_back(*ins.result);
        li.extra_inductions.push_back(*ins.result);
      } else {
        li.induction = *ins.result;
        li.init = from_outside->value;
        li.step = *step;
      }
    }
    if (li.induction.empty())
      throw Error(ErrorKind::NonAffineBound, "no constant-step induction in loop at " +
                                                 f.blocks[li.header].label);

    if (header.instrs.empty() || header.instrs.back().op != Opcode::CondBr)
      throw Error(ErrorKind::UnsupportedConstruct,
                  "loop header " + header.label + " does not end in a conditional branch");
    const Instruction& brins = header.instrs.back();
    auto t1 = f.block_index(brins.target), t2 = f.block_index(brins.target2);
    bool t1_in = t1 && li.blocks.count(*t1);
    bool t2_in = t2 && li.blocks.count(*t2);
    if (t1_in == t2_in)
      throw Error(ErrorKind::UnsupportedConstruct,
                  "loop header " + header.label + " must have one exit successor");
    li.body_on_true = t1_in;
    const Instruction* cmp = nullptr;
    for (const auto& blk : f.blocks)
      for (const auto& d : blk.instrs)
        if (d.result && brins.operands[0].is_reg() && *d.result == brins.operands[0].reg) cmp = &d;
    if (!cmp || cmp->op != Opcode::Icmp)
      throw Error(ErrorKind::NonAffineBound,
                  "loop bound of " + header.label + " is not an integer comparison");
    li.pred = cmp->pred;
    li.cmp_lhs = cmp->operands[0];
    li.cmp_rhs = cmp->operands[1];
  }

  // Counters are numbered by header position (outer loops first).
  std::vector<size_t> by_header(loops.size());
  for (size_t i = 0; i < loops.size(); ++i) by_header[i] = i;
  std::sort(by_header.begin(), by_header.end(), [&](size_t a, size_t b) {
    return doms.rpo_index[loops[a].header] < doms.rpo_index[loops[b].header];
  });
  for (size_t rank = 0; rank < by_header.size(); ++rank)
    loops[by_header[rank]].counter = "q" + std::to_string(rank);
  return loops;
}

// ---------------------------------------------------------------------------
// propagation: multivariate polynomials over tagged symbols ("d:x" dims,
// "p:n" params, "o:reg" opaque leaves).

namespace {

using Mono = std::vector<std::string>;
using Poly = std::map<Mono, int64_t>;

Poly p_const(int64_t v) {
  Poly p;
  if (v != 0) p[{}] = v;
  return p;
}

Poly p_sym(const std::string& s) {
  Poly p;
  p[{s}] = 1;
  return p;
}

void p_acc(Poly& a, const Mono& m, int64_t c) {
  auto it = a.find(m);
  int64_t nv = checked_add(it == a.end() ? 0 : it->second, c);
  if (nv == 0) {
    if (it != a.end()) a.erase(it);
  } else {
    a[m] = nv;
  }
}

Poly p_add(const Poly& a, const Poly& b) {
  Poly r = a;
  for (const auto& [m, c] : b) p_acc(r, m, c);
  return r;
}

Poly p_sub(const Poly& a, const Poly& b) {
  Poly r = a;
  for (const auto& [m, c] : b) p_acc(r, m, -c);
  return r;
}

Poly p_mul(const Poly& a, const Poly& b) {
  Poly r;
  for (const auto& [ma, ca] : a) {
    for (const auto& [mb, cb] : b) {
      Mono m = ma;
      m.insert(m.end(), mb.begin(), mb.end());
      std::sort(m.begin(), m.end());
      p_acc(r, m, checked_mul(ca, cb));
    }
  }
  return r;
}

std::string render_poly(const Poly& p) {
  if (p.empty()) return "0";
  std::string out;
  for (const auto& [m, c] : p) {
    std::string term;
    int64_t a = c < 0 ? -c : c;
    if (m.empty()) {
      term = std::to_string(a);
    } else {
      if (a != 1) term = std::to_string(a) + "*";
      for (size_t i = 0; i < m.size(); ++i) {
        if (i) term += "*";
        term += m[i].substr(2);
      }
    }
    if (out.empty())
      out = (c < 0 ? "-" : "") + term;
    else
      out += (c < 0 ? " - " : " + ") + term;
  }
  return out;
}

struct OpaqueInfo {
  std::string reg;
  std::string array;
  std::vector<Poly> index;
  std::string desc;
};

struct CondInfo {
  IcmpPred pred;
  Poly lhs, rhs;
};

struct PolyProp {
  std::map<std::string, Poly> values;
  std::map<std::string, OpaqueInfo> opaques;
  std::map<std::string, CondInfo> conds;
  std::map<std::string, std::pair<std::string, std::vector<Poly>>> handles;
  std::map<size_t, std::string> counters;
  std::map<GridRole, std::string> grid_dims;  // role -> canonical register
};

class Propagator {
public:
  Propagator(const Function& f, const std::vector<LoopInfo>& loops,
             const std::optional<GridLaunch>& launch)
      : f_(f), launch_(launch) {
    for (const auto& li : loops) {
      prop_.counters[li.header] = li.counter;
      induction_of_[li.induction] = &li;
    }
    for (const auto& b : f_.blocks)
      for (const auto& ins : b.instrs)
        if (ins.op == Opcode::IntrinsicCall && ins.result) {
          std::string key = intrinsic_name(ins.intrinsic);
          if (!canon_.count(key)) canon_[key] = *ins.result;
        }
    for (const auto& b : f_.blocks)
      for (const auto& ins : b.instrs)
        if (ins.result) def_[*ins.result] = &ins;
  }

  PolyProp run() {
    for (const auto& b : f_.blocks)
      for (const auto& ins : b.instrs)
        if (ins.result) eval(*ins.result);
    auto role_of = [](IntrinsicId id) -> std::optional<GridRole> {
      switch (id) {
      case IntrinsicId::TidX: return GridRole::ThreadX;
      case IntrinsicId::TidY: return GridRole::ThreadY;
      case IntrinsicId::TidZ: return GridRole::ThreadZ;
      case IntrinsicId::BidX: return GridRole::BlockX;
      case IntrinsicId::BidY: return GridRole::BlockY;
      case IntrinsicId::BidZ: return GridRole::BlockZ;
      default: return std::nullopt;
      }
    };
    for (const auto& [name, reg] : canon_) {
      auto id = intrinsic_from_name(name);
      if (!id) continue;
      if (auto r = role_of(*id)) prop_.grid_dims[*r] = reg;
    }
    return std::move(prop_);
  }

  Poly eval_operand(const Operand& op) {
    if (!op.is_reg()) return p_const(op.imm);
    return eval(op.reg);
  }

  Poly eval(const std::string& reg) {
    auto it = prop_.values.find(reg);
    if (it != prop_.values.end()) return it->second;
    if (in_progress_.count(reg)) return opaque(reg, "cyclic %" + reg);
    in_progress_.insert(reg);
    Poly v = compute(reg);
    in_progress_.erase(reg);
    prop_.values[reg] = v;
    return v;
  }

private:
  int64_t launch_extent(IntrinsicId id) const {
    const GridLaunch& l = *launch_;
    switch (id) {
    case IntrinsicId::BlockDimX: return l.block[0];
    case IntrinsicId::BlockDimY: return l.block[1];
    case IntrinsicId::BlockDimZ: return l.block[2];
    case IntrinsicId::GridDimX: return l.grid[0];
    case IntrinsicId::GridDimY: return l.grid[1];
    case IntrinsicId::GridDimZ: return l.grid[2];
    default: return 1;
    }
  }

  Poly opaque(const std::string& reg, std::string desc, std::string array = {},
              std::vector<Poly> index = {}) {
    std::string sym = "o:" + reg;
    if (!prop_.opaques.count(sym))
      prop_.opaques[sym] = OpaqueInfo{reg, std::move(array), std::move(index), std::move(desc)};
    return p_sym(sym);
  }

  Poly compute(const std::string& reg) {
    const Instruction* ins = def_.count(reg) ? def_.at(reg) : nullptr;
    if (!ins) {
      const KernelParam* p = f_.find_param(reg);
      if (p && !p->is_pointer) return p_sym("p:" + reg);
      return opaque(reg, "%" + reg);
    }
    switch (ins->op) {
    case Opcode::Add: return p_add(eval_operand(ins->operands[0]), eval_operand(ins->operands[1]));
    case Opcode::Sub: return p_sub(eval_operand(ins->operands[0]), eval_operand(ins->operands[1]));
    case Opcode::Mul: return p_mul(eval_operand(ins->operands[0]), eval_operand(ins->operands[1]));
    case Opcode::Shl: {
      Poly lhs = eval_operand(ins->operands[0]);
      if (!ins->operands[1].is_reg()) {
        int64_t sh = ins->operands[1].imm;
        if (sh < 0 || sh > 62) throw Error(ErrorKind::Overflow, "shl amount", ins->line, 1);
        return p_mul(lhs, p_const(int64_t(1) << sh));
      }
      return opaque(reg, "shl by non-constant");
    }
    case Opcode::Icmp: {
      prop_.conds[reg] =
          CondInfo{ins->pred, eval_operand(ins->operands[0]), eval_operand(ins->operands[1])};
      return opaque(reg, "icmp %" + reg);
    }
    case Opcode::Select: {
      Poly a = eval_operand(ins->operands[1]);
      Poly b = eval_operand(ins->operands[2]);
      if (a == b) return a;
      return opaque(reg, "select %" + reg);
    }
    case Opcode::Load: {
      std::string array = ins->array;
      std::vector<Poly> idx;
      if (auto h = prop_.handles.find(array); h != prop_.handles.end()) {
        array = h->second.first;
        idx = h->second.second;
      } else {
        for (const auto& op : ins->indices) idx.push_back(eval_operand(op));
      }
      std::string d = "load " + array + "[";
      for (size_t i = 0; i < idx.size(); ++i) d += (i ? ", " : "") + render_poly(idx[i]);
      d += "]";
      return opaque(reg, d, array, idx);
    }
    case Opcode::GetElem: {
      std::vector<Poly> idx;
      for (const auto& op : ins->indices) idx.push_back(eval_operand(op));
      prop_.handles[reg] = {ins->array, idx};
      return opaque(reg, "getelem " + ins->array);
    }
    case Opcode::IntrinsicCall: {
      switch (ins->intrinsic) {
      case IntrinsicId::TidX:
      case IntrinsicId::TidY:
      case IntrinsicId::TidZ:
      case IntrinsicId::BidX:
      case IntrinsicId::BidY:
      case IntrinsicId::BidZ:
        return p_sym("d:" + canon_.at(intrinsic_name(ins->intrinsic)));
      default:
        if (launch_) return p_const(launch_extent(ins->intrinsic));
        return p_sym(std::string("p:") + intrinsic_name(ins->intrinsic));
      }
    }
    case Opcode::Phi: {
      auto ind = induction_of_.find(reg);
      if (ind != induction_of_.end()) {
        const LoopInfo& li = *ind->second;
        Poly init = eval_operand(li.init);
        return p_add(init, p_mul(p_sym("d:" + li.counter), p_const(li.step)));
      }
      std::optional<Poly> common;
      bool same = true;
      for (const auto& inc : ins->incoming) {
        Poly v = eval_operand(inc.value);
        if (!common)
          common = v;
        else if (!(*common == v))
          same = false;
      }
      if (same && common) return *common;
      return opaque(reg, "phi %" + reg);
    }
    default: return opaque(reg, "%" + reg);
    }
  }

  const Function& f_;
  std::optional<GridLaunch> launch_;
  PolyProp prop_;
  std::map<std::string, const Instruction*> def_;
  std::map<std::string, std::string> canon_;
  std::map<std::string, const LoopInfo*> induction_of_;
  std::set<std::string> in_progress_;
};

std::optional<AffineExpr> poly_to_affine(const Poly& p) {
  AffineExpr e;
  for (const auto& [m, c] : p) {
    if (m.empty()) {
      e.set_constant(c);
      continue;
    }
    if (m.size() != 1) return std::nullopt;
    const std::string& s = m[0];
    if (s.rfind("d:", 0) == 0)
      e.set_dim_coeff(s.substr(2), c);
    else if (s.rfind("p:", 0) == 0)
      e.set_param_coeff(s.substr(2), c);
    else
      return std::nullopt;
  }
  return e;
}

PropagatedExpr public_expr(const Poly& poly, const PolyProp& pp) {
  PropagatedExpr pe;
  if (auto aff = poly_to_affine(poly)) {
    pe.affine = *aff;
    return pe;
  }
  OpaqueSource src;
  src.desc = render_poly(poly);
  for (const auto& [m, c] : poly) {
    for (const auto& s : m) {
      if (s.rfind("o:", 0) != 0) continue;
      auto it = pp.opaques.find(s);
      if (it != pp.opaques.end() && !it->second.array.empty()) {
        src.array = it->second.array;
        std::string d;
        for (size_t i = 0; i < it->second.index.size(); ++i)
          d += (i ? ", " : "") + render_poly(it->second.index[i]);
        src.index_desc = d;
      }
      if (!src.array.empty()) break;
    }
    if (!src.array.empty()) break;
  }
  pe.opaque = std::move(src);
  return pe;
}

}  // namespace

Propagation propagate(const Function& f, const std::optional<GridLaunch>& launch) {
  std::vector<LoopInfo> loops = find_loops(f, launch);
  Propagator prop(f, loops, launch);
  PolyProp pp = prop.run();
  Propagation out;
  out.counters = pp.counters;
  for (const auto& [reg, poly] : pp.values) out.values[reg] = public_expr(poly, pp);
  return out;
}

GridIterators find_grid_iterators(const Function& f) {
  GridIterators out;
  for (const auto& b : f.blocks) {
    for (const auto& ins : b.instrs) {
      if (ins.op == Opcode::IntrinsicCall && ins.result) {
        switch (ins.intrinsic) {
        case IntrinsicId::TidX: out.reg_role[*ins.result] = GridRole::ThreadX; break;
        case IntrinsicId::TidY: out.reg_role[*ins.result] = GridRole::ThreadY; break;
        case IntrinsicId::TidZ: out.reg_role[*ins.result] = GridRole::ThreadZ; break;
        case IntrinsicId::BidX: out.reg_role[*ins.result] = GridRole::BlockX; break;
        case IntrinsicId::BidY: out.reg_role[*ins.result] = GridRole::BlockY; break;
        case IntrinsicId::BidZ: out.reg_role[*ins.result] = GridRole::BlockZ; break;
        default: break;
        }
      }
      if (ins.op == Opcode::Barrier && ins.scope == BarrierScope::Warp) {
        if (out.uses_warp_sync && out.warp_width != ins.warp_width)
          throw Error(ErrorKind::UnsupportedConstruct, "mixed warp widths", ins.line, 1);
        out.uses_warp_sync = true;
        out.warp_width = ins.warp_width;
      }
    }
  }

  // A thread/block id flowing through a non-affine product into an address or
  // branch condition cannot be modeled. Loop structure is irrelevant here:
  // induction phis degrade to opaque leaves, which only tightens the check.
  std::vector<LoopInfo> no_loops;
  Propagator prop(f, no_loops, std::nullopt);
  PolyProp pp = prop.run();
  auto check_poly = [&](const Poly& p, int line) {
    for (const auto& [m, c] : p) {
      if (m.size() < 2) continue;
      int dim_count = 0;
      bool has_opaque = false;
      for (const auto& s : m) {
        if (s.rfind("d:", 0) == 0) ++dim_count;
        if (s.rfind("o:", 0) == 0) has_opaque = true;
      }
      if (dim_count > 0 && (has_opaque || dim_count > 1))
        throw Error(ErrorKind::UnsupportedIdPattern,
                    "thread/block id inside a non-affine product: " + render_poly(p), line, 1);
    }
  };
  for (const auto& b : f.blocks) {
    for (const auto& ins : b.instrs) {
      if (ins.op == Opcode::Load || ins.op == Opcode::Store) {
        for (const auto& op : ins.indices)
          if (op.is_reg()) check_poly(pp.values.at(op.reg), ins.line);
      }
      if (ins.op == Opcode::CondBr && ins.operands[0].is_reg()) {
        auto it = pp.conds.find(ins.operands[0].reg);
        if (it != pp.conds.end()) {
          check_poly(it->second.lhs, ins.line);
          check_poly(it->second.rhs, ins.line);
        }
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// extraction

namespace {

// Barriers split blocks into segments; a section never straddles a barrier.
struct Segment {
  size_t block = 0;
  std::vector<const Instruction*> instrs;  // loads/stores only
  AffineExpr phase, wphase;
  bool phase_valid = true;
  std::vector<std::pair<int64_t, std::string>> path;  // (position, counter) chain
};

struct Ctx {
  const Function& f;
  ExtractOptions opts;
  std::vector<LoopInfo> loops;
  GridIterators grid;
  PolyProp pp;
  Doms doms;

  std::vector<GridBinding> bindings;
  std::vector<std::string> grid_dim_names;
  std::map<size_t, std::vector<const LoopInfo*>> loop_chain;  // outermost first
  std::set<size_t> loop_headers;

  std::vector<std::string> model_params;
  std::set<std::string> param_set;
  std::map<std::string, std::string> shared_bound_param;  // "o:reg" -> param
  std::set<std::string> rejected_regs;  // competing induction phis
  std::map<std::string, std::string> param_origins;
  std::vector<Constraint> param_constraints;
  std::vector<std::string> notes;

  Ctx(const Function& fn, ExtractOptions o, std::vector<LoopInfo> ls, GridIterators g, PolyProp p)
      : f(fn), opts(std::move(o)), loops(std::move(ls)), grid(std::move(g)), pp(std::move(p)),
        doms(compute_dominators(fn)) {}

  std::string mint_param(const std::string& stem, const std::string& origin_reg) {
    if (!origin_reg.empty() && rejected_regs.count(origin_reg))
      throw Error(ErrorKind::MultipleInductions,
                  "%" + origin_reg + " is a second induction feeding an address or bound");
    std::string name = stem;
    int n = 1;
    while (param_set.count(name)) name = stem + "$" + std::to_string(n++);
    param_set.insert(name);
    model_params.push_back(name);
    if (!origin_reg.empty()) param_origins[name] = origin_reg;
    return name;
  }

  // Shared (per load site) parameters for bounds and guards.
  std::optional<AffineExpr> bound_affine(const Poly& p) {
    Poly renamed;
    for (const auto& [m, c] : p) {
      Mono nm;
      for (const auto& s : m) {
        if (s.rfind("o:", 0) == 0) {
          auto it = shared_bound_param.find(s);
          if (it == shared_bound_param.end()) {
            const OpaqueInfo& oi = pp.opaques.at(s);
            std::string name = mint_param(oi.reg, oi.reg);
            it = shared_bound_param.emplace(s, name).first;
          }
          nm.push_back("p:" + it->second);
        } else {
          nm.push_back(s);
        }
      }
      std::sort(nm.begin(), nm.end());
      p_acc(renamed, nm, c);
    }
    return poly_to_affine(renamed);
  }

  Poly poly_of(const Operand& op) const {
    if (!op.is_reg()) return p_const(op.imm);
    return pp.values.at(op.reg);
  }

  std::optional<GridRole> role_of_dim(const std::string& dim) const {
    for (const auto& b : bindings)
      if (b.dim == dim) return b.role;
    return std::nullopt;
  }

  bool is_thread_role(GridRole r) const {
    return r == GridRole::ThreadX || r == GridRole::ThreadY || r == GridRole::ThreadZ;
  }

  // Block-uniform: no thread-id dims; loop counters and loads are uniform
  // when their bounds/indices are.
  bool is_uniform(const Poly& p, std::set<std::string>& seen) const {
    for (const auto& [m, c] : p) {
      for (const auto& s : m) {
        if (s.rfind("d:", 0) == 0) {
          std::string dim = s.substr(2);
          auto role = role_of_dim(dim);
          if (role) {
            if (is_thread_role(*role)) return false;
            continue;
          }
          for (const auto& li : loops) {
            if (li.counter != dim) continue;
            if (!seen.insert("loop:" + dim).second) continue;
            if (!is_uniform(poly_of(li.cmp_lhs), seen)) return false;
            if (!is_uniform(poly_of(li.cmp_rhs), seen)) return false;
            if (!is_uniform(poly_of(li.init), seen)) return false;
          }
        } else if (s.rfind("o:", 0) == 0) {
          if (!seen.insert(s).second) continue;
          const OpaqueInfo& oi = pp.opaques.at(s);
          if (oi.array.empty()) return false;
          for (const auto& ix : oi.index)
            if (!is_uniform(ix, seen)) return false;
        }
      }
    }
    return true;
  }
  bool is_uniform(const Poly& p) const {
    std::set<std::string> seen;
    return is_uniform(p, seen);
  }
};

struct GuardSet {
  std::vector<Constraint> affine;
  bool dropped_nonaffine = false;
  bool uniform = true;
};

GuardSet block_guards(Ctx& cx, size_t blk) {
  GuardSet out;
  const Function& f = cx.f;
  for (size_t d = 0; d < f.blocks.size(); ++d) {
    const auto& db = f.blocks[d];
    if (db.instrs.empty() || db.instrs.back().op != Opcode::CondBr) continue;
    if (cx.loop_headers.count(d)) continue;  // loop exits become loop bounds
    const Instruction& br = db.instrs.back();
    auto t = f.block_index(br.target);
    auto e = f.block_index(br.target2);
    if (!t || !e || *t == *e) continue;
    // An arm head guards only when the branch is its sole entry; join blocks
    // (reached through both arms) contribute nothing.
    auto exclusive = [&](size_t head) {
      return f.blocks[head].preds.size() == 1 && f.blocks[head].preds[0] == d;
    };
    bool via_true = exclusive(*t) && cx.doms.dominates(*t, blk);
    bool via_false = exclusive(*e) && cx.doms.dominates(*e, blk);
    if (via_true == via_false) continue;
    if (!br.operands[0].is_reg()) continue;
    auto ci = cx.pp.conds.find(br.operands[0].reg);
    if (ci == cx.pp.conds.end()) {
      out.dropped_nonaffine = true;
      out.uniform = false;
      continue;
    }
    bool cond_uniform = cx.is_uniform(ci->second.lhs) && cx.is_uniform(ci->second.rhs);
    out.uniform = out.uniform && cond_uniform;
    std::optional<AffineExpr> lhs = cx.bound_affine(ci->second.lhs);
    std::optional<AffineExpr> rhs = cx.bound_affine(ci->second.rhs);
    if (!lhs || !rhs) {
      out.dropped_nonaffine = true;
      continue;
    }
    bool positive = via_true;
    switch (ci->second.pred) {
    case IcmpPred::Lt:
      out.affine.push_back(positive ? constraint_lt(*lhs, *rhs) : constraint_le(*rhs, *lhs));
      break;
    case IcmpPred::Le:
      out.affine.push_back(positive ? constraint_le(*lhs, *rhs) : constraint_lt(*rhs, *lhs));
      break;
    case IcmpPred::Gt:
      out.affine.push_back(positive ? constraint_lt(*rhs, *lhs) : constraint_le(*lhs, *rhs));
      break;
    case IcmpPred::Ge:
      out.affine.push_back(positive ? constraint_le(*rhs, *lhs) : constraint_lt(*lhs, *rhs));
      break;
    case IcmpPred::Eq:
      if (positive)
        out.affine.push_back(constraint_eq(*lhs, *rhs));
      else
        out.dropped_nonaffine = true;  // disequality would need a disjunction
      break;
    case IcmpPred::Ne:
      if (!positive)
        out.affine.push_back(constraint_eq(*lhs, *rhs));
      else
        out.dropped_nonaffine = true;
      break;
    }
  }
  return out;
}

// Phase walk: assigns a phase expression and a (position, counter) path to
// each block segment, counting barriers per loop iteration.
struct PhaseWalk {
  Ctx& cx;
  std::vector<Segment> segments;

  std::pair<int64_t, int64_t> barriers_in(const std::set<size_t>& blocks) const {
    int64_t blk = 0, all = 0;
    for (size_t b : blocks)
      for (const auto& ins : cx.f.blocks[b].instrs)
        if (ins.op == Opcode::Barrier) {
          ++all;
          if (ins.scope == BarrierScope::Block) ++blk;
        }
    return {blk, all};
  }

  const LoopInfo* region_of(size_t block) const {
    auto it = cx.loop_chain.find(block);
    if (it == cx.loop_chain.end() || it->second.empty()) return nullptr;
    return it->second.back();  // innermost
  }

  const LoopInfo* parent_of(const LoopInfo* li) const {
    const LoopInfo* parent = nullptr;
    for (const auto& other : cx.loops) {
      if (&other == li) continue;
      if (!other.blocks.count(li->header)) continue;
      if (!parent || other.blocks.size() < parent->blocks.size()) parent = &other;
    }
    return parent;
  }

  void walk(const LoopInfo* region, AffineExpr phase, AffineExpr wphase, bool valid,
            std::vector<std::pair<int64_t, std::string>> prefix) {
    // Items of this region in RPO: blocks whose innermost loop is `region`,
    // plus immediate sub-loops at their header position.
    int64_t pos = 0;
    std::set<const LoopInfo*> entered;
    for (size_t b : cx.doms.rpo) {
      const LoopInfo* reg_b = region_of(b);
      if (reg_b == region) {
        if (region && !region->blocks.count(b)) continue;
        // Split the block at barriers.
        Segment seg;
        seg.block = b;
        seg.phase = phase;
        seg.wphase = wphase;
        seg.phase_valid = valid;
        auto flush = [&]() {
          if (seg.instrs.empty()) return;
          seg.path = prefix;
          seg.path.emplace_back(pos, "");
          ++pos;
          segments.push_back(seg);
          seg.instrs.clear();
        };
        for (const auto& ins : cx.f.blocks[b].instrs) {
          if (ins.op == Opcode::Load || ins.op == Opcode::Store) {
            if (!valid)
              throw Error(ErrorKind::UnsupportedConstruct,
                          "access after a data-dependent barrier loop", ins.line, 1);
            seg.instrs.push_back(&ins);
          } else if (ins.op == Opcode::Barrier) {
            if (!valid)
              throw Error(ErrorKind::UnsupportedConstruct,
                          "barrier after a data-dependent barrier loop", ins.line, 1);
            GuardSet g = block_guards(cx, b);
            if (!g.uniform)
              throw Error(ErrorKind::UnsupportedConstruct,
                          "barrier under a thread-divergent condition", ins.line, 1);
            flush();
            if (ins.scope == BarrierScope::Block) phase += AffineExpr::constant(1);
            wphase += AffineExpr::constant(1);
            seg.phase = phase;
            seg.wphase = wphase;
          }
        }
        flush();
      } else if (reg_b && reg_b->header == b) {
        // A loop header: enter the outermost not-yet-entered loop rooted
        // below this region.
        const LoopInfo* sub = reg_b;
        while (const LoopInfo* p = parent_of(sub)) {
          if (p == region) break;
          sub = p;
        }
        if (parent_of(sub) != region) continue;
        if (entered.count(sub)) continue;
        entered.insert(sub);
        auto [cb, ca] = barriers_in(sub->blocks);
        if ((cb > 0 || ca > 0)) {
          // Barrier phases inside the loop advance with the trip counter;
          // the bounds must be block-uniform.
          std::set<std::string> seen;
          Poly counter = p_sym("d:" + sub->counter);
          if (!cx.is_uniform(counter, seen))
            throw Error(ErrorKind::UnsupportedConstruct,
                        "barrier inside a loop with thread-divergent bounds");
        }
        AffineExpr q = AffineExpr::dim(sub->counter);
        auto sub_prefix = prefix;
        sub_prefix.emplace_back(pos, sub->counter);
        ++pos;
        walk(sub, phase + q.scaled(cb), wphase + q.scaled(ca), valid, sub_prefix);
        if (cb > 0 || ca > 0) valid = false;  // trip count is data-dependent
      }
    }
  }
};

struct RawAccess {
  std::string section;
  std::string array;
  bool is_write = false;
  std::vector<Poly> index;
  size_t instr_index = 0;
  int line = 0;
};

// One cell description after paramization/delinearization.
struct CellPlan {
  std::vector<AffineExpr> components;
  std::vector<std::string> divisors;  // delinearization pitch params, outermost first
  bool fallback = false;              // unconstrained superset cell
};

}  // namespace

Extraction extract_model(const Function& f, const ExtractOptions& opts) {
  std::vector<LoopInfo> loops = find_loops(f, opts.launch);
  GridIterators grid = find_grid_iterators(f);
  PolyProp pp = [&] {
    Propagator prop(f, loops, opts.launch);
    return prop.run();
  }();

  Ctx cx(f, opts, std::move(loops), grid, std::move(pp));
  for (const auto& li : cx.loops)
    for (const auto& r : li.extra_inductions) cx.rejected_regs.insert(r);
  for (const auto& li : cx.loops) {
    cx.loop_headers.insert(li.header);
    for (size_t b : li.blocks) cx.loop_chain[b].push_back(&li);
  }
  for (auto& [b, chain] : cx.loop_chain)
    std::sort(chain.begin(), chain.end(),
              [](const LoopInfo* a, const LoopInfo* b2) { return a->blocks.size() > b2->blocks.size(); });

  Extraction result;
  KernelModel& model = result.model;
  model.name = f.name;

  // Kernel surface: scalar params and arrays.
  for (const auto& p : f.params)
    if (!p.is_pointer) {
      cx.model_params.push_back(p.name);
      cx.param_set.insert(p.name);
    }
  for (const auto& p : f.params) {
    if (!p.is_pointer) continue;
    ArrayRef a;
    a.name = p.name;
    a.space = MemSpace::Global;
    a.elem = p.elem;
    a.arity = 1;
    a.extents = {0};
    a.extent_params = {""};
    model.arrays.push_back(std::move(a));
  }
  for (const auto& s : f.shared_decls) {
    ArrayRef a;
    a.name = s.name;
    a.space = MemSpace::Shared;
    a.elem = s.elem;
    a.arity = 1;
    a.extents = {s.extent};
    a.extent_params = {""};
    model.arrays.push_back(std::move(a));
  }

  // Grid dims in canonical role order.
  const GridRole role_order[] = {GridRole::BlockX,  GridRole::BlockY,  GridRole::BlockZ,
                                 GridRole::ThreadX, GridRole::ThreadY, GridRole::ThreadZ};
  for (GridRole r : role_order) {
    auto it = cx.pp.grid_dims.find(r);
    if (it != cx.pp.grid_dims.end()) {
      cx.bindings.push_back({it->second, r});
      cx.grid_dim_names.push_back(it->second);
      result.dim_origins[it->second] = "intr:" + it->second;
      continue;
    }
    // A launch extent above 1 needs a dimension even when the kernel never
    // reads the id: otherwise identical threads would collapse into one and
    // same-cell writes could not race.
    if (opts.launch) {
      int64_t extent = 1;
      switch (r) {
      case GridRole::BlockX: extent = opts.launch->grid[0]; break;
      case GridRole::BlockY: extent = opts.launch->grid[1]; break;
      case GridRole::BlockZ: extent = opts.launch->grid[2]; break;
      case GridRole::ThreadX: extent = opts.launch->block[0]; break;
      case GridRole::ThreadY: extent = opts.launch->block[1]; break;
      case GridRole::ThreadZ: extent = opts.launch->block[2]; break;
      }
      if (extent > 1) {
        std::string name = std::string("$") + (r == GridRole::BlockX   ? "bx"
                                               : r == GridRole::BlockY ? "by"
                                               : r == GridRole::BlockZ ? "bz"
                                               : r == GridRole::ThreadX ? "tx"
                                               : r == GridRole::ThreadY ? "ty"
                                                                        : "tz");
        cx.bindings.push_back({name, r});
        cx.grid_dim_names.push_back(name);
        result.dim_origins[name] = "intr:" + name;
      }
    }
  }
  if (opts.launch) {
    for (int i = 0; i < 3; ++i) {
      model.grid.grid[i] = opts.launch->grid[i];
      model.grid.block[i] = opts.launch->block[i];
    }
  } else {
    // Symbolic launch extents become parameters when the kernel reads them.
    for (const auto& [reg, poly] : cx.pp.values)
      for (const auto& [m, c] : poly)
        for (const auto& s : m)
          if (s.rfind("p:", 0) == 0 && s.find("dim.") != std::string::npos &&
              !cx.param_set.count(s.substr(2))) {
            cx.param_set.insert(s.substr(2));
            cx.model_params.push_back(s.substr(2));
          }
  }
  model.grid.bindings = cx.bindings;
  if (cx.grid.uses_warp_sync) {
    model.grid.warp_width = cx.grid.warp_width;
    model.schedule.has_warp_phase = true;
  }

  for (const auto& li : cx.loops)
    result.dim_origins[li.counter] = "loop:" + f.blocks[li.header].label;

  // Loop body constraints (counter >= 0 and the bound comparison).
  std::map<const LoopInfo*, std::vector<Constraint>> loop_cons;
  for (const auto& li : cx.loops) {
    std::vector<Constraint> cs;
    cs.push_back(constraint_le(AffineExpr::constant(0), AffineExpr::dim(li.counter)));
    std::optional<AffineExpr> lhs = cx.bound_affine(cx.poly_of(li.cmp_lhs));
    std::optional<AffineExpr> rhs = cx.bound_affine(cx.poly_of(li.cmp_rhs));
    if (!lhs || !rhs)
      throw Error(ErrorKind::NonAffineBound, "loop bound at " + f.blocks[li.header].label);
    bool stay = li.body_on_true;
    switch (li.pred) {
    case IcmpPred::Lt: cs.push_back(stay ? constraint_lt(*lhs, *rhs) : constraint_le(*rhs, *lhs)); break;
    case IcmpPred::Le: cs.push_back(stay ? constraint_le(*lhs, *rhs) : constraint_lt(*rhs, *lhs)); break;
    case IcmpPred::Gt: cs.push_back(stay ? constraint_lt(*rhs, *lhs) : constraint_le(*lhs, *rhs)); break;
    case IcmpPred::Ge: cs.push_back(stay ? constraint_le(*rhs, *lhs) : constraint_lt(*lhs, *rhs)); break;
    case IcmpPred::Eq:
    case IcmpPred::Ne:
      throw Error(ErrorKind::NonAffineBound,
                  "equality loop bound at " + f.blocks[li.header].label);
    }
    loop_cons[&li] = std::move(cs);
  }

  // Walk phases and carve sections out of block segments.
  PhaseWalk walker{cx, {}};
  walker.walk(nullptr, AffineExpr::constant(0), AffineExpr::constant(0), true, {});

  size_t max_depth = 0;
  for (const auto& li : cx.loops) {
    size_t depth = 0;
    for (const auto& other : cx.loops)
      if (other.blocks.count(li.header)) ++depth;
    max_depth = std::max(max_depth, depth);
  }
  size_t ts_arity = (model.schedule.has_warp_phase ? 2 : 1) + 2 * max_depth + 1;

  std::vector<RawAccess> raw;
  int section_no = 0;

  for (const auto& seg : walker.segments) {
    const BasicBlock& blk = f.blocks[seg.block];
    std::vector<const Instruction*> stores, loads;
    for (const Instruction* ins : seg.instrs)
      (ins->op == Opcode::Store ? stores : loads).push_back(ins);

    // Loads feeding a store (through the value or the address, continuing
    // through load addresses) merge into the store section.
    std::set<const Instruction*> fed;
    if (!stores.empty()) {
      std::vector<std::string> work;
      std::set<std::string> seen;
      auto push_ops = [&](const Instruction* ins) {
        for (const auto& op : ins->operands)
          if (op.is_reg()) work.push_back(op.reg);
        for (const auto& op : ins->indices)
          if (op.is_reg()) work.push_back(op.reg);
        if (!ins->array.empty() && !f.find_param(ins->array) && !f.find_shared(ins->array))
          work.push_back(ins->array);
      };
      for (const Instruction* st : stores) push_ops(st);
      while (!work.empty()) {
        std::string r = work.back();
        work.pop_back();
        if (!seen.insert(r).second) continue;
        for (const Instruction* ld : loads) {
          if (ld->result && *ld->result == r) {
            fed.insert(ld);
            push_ops(ld);
          }
        }
        for (const auto& ins : blk.instrs) {
          if (!ins.result || *ins.result != r) continue;
          if (ins.op == Opcode::Load || ins.op == Opcode::Phi) continue;
          for (const auto& op : ins.operands)
            if (op.is_reg()) work.push_back(op.reg);
          for (const auto& op : ins.indices)
            if (op.is_reg()) work.push_back(op.reg);
        }
      }
    }

    struct Draft {
      std::vector<const Instruction*> instrs;
      bool has_store;
    };
    std::vector<Draft> drafts;
    {
      Draft reads_only{{}, false};
      Draft with_store{{}, true};
      for (const Instruction* ld : loads)
        (fed.count(ld) ? with_store : reads_only).instrs.push_back(ld);
      for (const Instruction* st : stores) with_store.instrs.push_back(st);
      if (!reads_only.instrs.empty()) drafts.push_back(std::move(reads_only));
      if (!with_store.instrs.empty()) drafts.push_back(std::move(with_store));
    }

    for (const Draft& d : drafts) {
      std::string label;
      auto hint = opts.section_hints.find(blk.label);
      if (hint != opts.section_hints.end())
        label = hint->second;
      else
        label = "S" + std::to_string(section_no);
      while (model.find_statement(label)) label += "r";
      ++section_no;

      std::vector<std::string> dims = cx.grid_dim_names;
      std::vector<const LoopInfo*> chain;
      if (cx.loop_chain.count(seg.block)) chain = cx.loop_chain.at(seg.block);
      for (const LoopInfo* li : chain) dims.push_back(li->counter);

      std::vector<Constraint> cs;
      for (const LoopInfo* li : chain) {
        const auto& lc = loop_cons.at(li);
        cs.insert(cs.end(), lc.begin(), lc.end());
      }
      GuardSet guards = block_guards(cx, seg.block);
      cs.insert(cs.end(), guards.affine.begin(), guards.affine.end());
      if (guards.dropped_nonaffine)
        cx.notes.push_back("section " + label +
                           ": non-affine guard dropped, domain over-approximated");

      Statement st;
      st.label = label;
      IntSet dom(label, dims, cx.model_params);
      dom.add_constraints(std::move(cs));
      st.domain = dom;

      for (const Instruction* ins : d.instrs) {
        std::string array = ins->array;
        std::vector<Poly> idx;
        if (auto h = cx.pp.handles.find(array); h != cx.pp.handles.end()) {
          array = h->second.first;
          idx = h->second.second;
        } else {
          for (const auto& op : ins->indices) idx.push_back(cx.poly_of(op));
        }
        raw.push_back(RawAccess{label, array, ins->op == Opcode::Store, std::move(idx),
                                ins->index, ins->line});
        result.instr_section[ins->index] = label;
      }

      std::vector<AffineExpr> ts;
      ts.push_back(seg.phase);
      if (model.schedule.has_warp_phase) ts.push_back(seg.wphase);
      for (const auto& [pos, counter] : seg.path) {
        ts.push_back(AffineExpr::constant(pos));
        if (!counter.empty()) ts.push_back(AffineExpr::dim(counter));
      }
      while (ts.size() < ts_arity) ts.push_back(AffineExpr::constant(0));
      if (ts.size() > ts_arity) ts.resize(ts_arity);
      model.schedule.timestamps[label] = std::move(ts);
      model.statements.push_back(std::move(st));
    }
  }

  // Cell planning: paramize per access, delinearize by parameter pitches.
  struct PlannedAccess {
    RawAccess raw;
    CellPlan plan;
  };
  std::vector<PlannedAccess> planned;

  auto domain_allows = [&](const std::string& stmt, const Constraint& negated) {
    // Used to prove 0 <= lo < P: the domain with the negation must be empty.
    const Statement* st = model.find_statement(stmt);
    IntSet dom = st->domain;
    for (const auto& p : cx.model_params) dom.declare_param(p);
    std::vector<Constraint> extra;
    for (const auto& b : cx.bindings) {
      extra.push_back(constraint_le(AffineExpr::constant(0), AffineExpr::dim(b.dim)));
      extra.push_back(constraint_lt(AffineExpr::dim(b.dim),
                                    AffineExpr::constant(model.grid.extent_of(b.role))));
    }
    extra.push_back(negated);
    IntSet q(dom.space(), dom.dims(), dom.params());
    q.add_constraints(extra);
    return !is_empty(intersect(dom, q)).empty();
  };

  // paramize: replace opaque leaves by fresh per-access parameters.
  auto paramize = [&](const Poly& p, std::map<std::string, std::string>& local) {
    Poly renamed;
    for (const auto& [m, c] : p) {
      Mono nm;
      for (const auto& s : m) {
        if (s.rfind("o:", 0) == 0) {
          auto it = local.find(s);
          if (it == local.end()) {
            const OpaqueInfo& oi = cx.pp.opaques.at(s);
            std::string name = cx.mint_param(oi.reg, oi.reg);
            it = local.emplace(s, name).first;
          }
          nm.push_back("p:" + it->second);
        } else {
          nm.push_back(s);
        }
      }
      std::sort(nm.begin(), nm.end());
      p_acc(renamed, nm, c);
    }
    return renamed;
  };

  // Delinearization of a paramized poly into affine components.
  std::function<bool(const std::string&, const Poly&, CellPlan&)> split =
      [&](const std::string& stmt, const Poly& p, CellPlan& plan) -> bool {
    if (auto aff = poly_to_affine(p)) {
      plan.components.push_back(*aff);
      return true;
    }
    // candidate pitches: params in non-affine monomials
    std::set<std::string> cands;
    for (const auto& [m, c] : p)
      if (m.size() >= 2)
        for (const auto& s : m)
          if (s.rfind("p:", 0) == 0) cands.insert(s);
    for (const auto& pitch : cands) {
      Poly hi, lo;
      bool ok = true;
      for (const auto& [m, c] : p) {
        int count = 0;
        for (const auto& s : m) count += s == pitch ? 1 : 0;
        if (count == 0) {
          p_acc(lo, m, c);
        } else if (count == 1) {
          Mono hm;
          bool dropped = false;
          for (const auto& s : m) {
            if (s == pitch && !dropped) {
              dropped = true;
              continue;
            }
            hm.push_back(s);
          }
          p_acc(hi, hm, c);
        } else {
          ok = false;
          break;
        }
      }
      if (!ok) continue;
      auto lo_aff = poly_to_affine(lo);
      if (!lo_aff) continue;
      std::string pitch_name = pitch.substr(2);
      // prove 0 <= lo < pitch under the statement domain
      AffineExpr pe = AffineExpr::param(pitch_name);
      bool low_ok = !domain_allows(stmt, constraint_lt(*lo_aff, AffineExpr::constant(0)));
      bool high_ok = !domain_allows(stmt, constraint_le(pe, *lo_aff));
      if (!low_ok || !high_ok) continue;
      CellPlan sub;
      if (!split(stmt, hi, sub)) continue;
      plan.components = sub.components;
      plan.components.push_back(*lo_aff);
      plan.divisors = sub.divisors;
      plan.divisors.push_back(pitch_name);
      return true;
    }
    return false;
  };

  for (auto& ra : raw) {
    PlannedAccess pa;
    pa.raw = ra;
    std::map<std::string, std::string> local;
    if (ra.index.size() > 1) {
      // Native multi-index access: every component must be affine after
      // per-access paramization.
      for (const auto& ix : ra.index) {
        Poly q = paramize(ix, local);
        auto aff = poly_to_affine(q);
        if (!aff)
          throw Error(ErrorKind::UnsupportedConstruct,
                      "non-affine component in a multi-index access", ra.line, 1);
        pa.plan.components.push_back(*aff);
      }
      pa.plan.divisors.assign(ra.index.size() > 0 ? ra.index.size() - 1 : 0, "<native>");
    } else {
      Poly q = paramize(ra.index.empty() ? p_const(0) : ra.index[0], local);
      CellPlan plan;
      if (split(ra.section, q, plan)) {
        pa.plan = plan;
      } else {
        pa.plan.fallback = true;
        std::string name = cx.mint_param("cell", "");
        cx.notes.push_back("access to " + ra.array +
                           ": data-dependent index over-approximated by parameter " + name);
        pa.plan.components.push_back(AffineExpr::param(name));
      }
    }
    planned.push_back(std::move(pa));
  }

  // Per-array view agreement: mismatching views flatten to superset cells.
  std::map<std::string, std::vector<std::string>> view_of;
  std::map<std::string, bool> flattened;
  for (const auto& pa : planned) {
    auto it = view_of.find(pa.raw.array);
    if (it == view_of.end()) {
      view_of[pa.raw.array] = pa.plan.divisors;
    } else if (it->second != pa.plan.divisors) {
      flattened[pa.raw.array] = true;
    }
  }
  for (auto& pa : planned) {
    if (!flattened.count(pa.raw.array)) continue;
    if (pa.plan.divisors.size() == 1 && pa.plan.divisors[0] == "<native>")
      throw Error(ErrorKind::UnsupportedConstruct,
                  "array " + pa.raw.array + " mixes native multi-index and flat accesses");
    if (pa.plan.divisors.empty() && !pa.plan.fallback) continue;  // already flat
    // Rebuild as a flat superset cell.
    CellPlan flat;
    flat.fallback = true;
    std::string name = cx.mint_param("cell", "");
    flat.components.push_back(AffineExpr::param(name));
    cx.notes.push_back("array " + pa.raw.array +
                       ": inconsistent views; access over-approximated by parameter " + name);
    pa.plan = flat;
  }
  for (auto& [arr, view] : view_of)
    if (flattened.count(arr)) view.clear();

  // Fix array arities and shared-cell containment.
  for (auto& a : model.arrays) {
    auto it = view_of.find(a.name);
    size_t arity = 1;
    if (it != view_of.end()) arity = it->second.size() + 1;
    if (arity > 1) {
      a.arity = arity;
      a.extents.assign(arity, 0);
      a.extent_params.assign(arity, "");
      for (size_t i = 0; i + 1 < arity; ++i) {
        const std::string& dv = it->second[i + (it->second.size() + 1 - arity)];
        if (dv != "<native>") a.extent_params[i + 1] = dv;
      }
      result.array_views[a.name] = it->second;
    }
  }

  // Attach access relations.
  for (const auto& pa : planned) {
    Statement* st = nullptr;
    for (auto& s : model.statements)
      if (s.label == pa.raw.section) st = &s;
    const ArrayRef* arr = model.find_array(pa.raw.array);
    if (!arr)
      throw Error(ErrorKind::UnsupportedConstruct, "access to unknown array " + pa.raw.array,
                  pa.raw.line, 1);
    size_t want = arr->arity;
    std::vector<AffineExpr> comps = pa.plan.components;
    if (comps.size() != want) {
      if (pa.plan.fallback && want >= 1) {
        // pad the superset cell across all components
        while (comps.size() < want) {
          std::string name = cx.mint_param("cell", "");
          comps.push_back(AffineExpr::param(name));
        }
      } else {
        throw Error(ErrorKind::UnsupportedConstruct,
                    "access arity mismatch on " + pa.raw.array, pa.raw.line, 1);
      }
    }
    // Shared arrays bound fallback cells by their static extent.
    if (arr->space == MemSpace::Shared && pa.plan.fallback) {
      for (size_t i = 0; i < comps.size(); ++i) {
        for (const auto& [pname, coeff] : comps[i].param_coeffs()) {
          if (cx.param_origins.count(pname) || pname.rfind("cell", 0) == 0) {
            cx.param_constraints.push_back(
                constraint_le(AffineExpr::constant(0), AffineExpr::param(pname)));
            cx.param_constraints.push_back(constraint_lt(
                AffineExpr::param(pname), AffineExpr::constant(arr->extents[i] ? arr->extents[i]
                                                                               : 1)));
          }
        }
      }
    }
    std::vector<std::string> cells;
    for (size_t i = 0; i < want; ++i) cells.push_back("o" + std::to_string(i));
    IntRel rel(st->label, st->domain.dims(), arr->name, cells, cx.model_params);
    std::vector<std::string> actual = rel.out_dims();
    std::vector<Constraint> cs;
    for (size_t i = 0; i < want; ++i)
      cs.push_back(constraint_eq(AffineExpr::dim(actual[i]), comps[i]));
    rel.add_constraints(std::move(cs));
    (pa.raw.is_write ? st->writes : st->reads).push_back(Access{arr->name, std::move(rel)});
  }

  model.params = cx.model_params;
  model.param_constraints = cx.param_constraints;
  model.notes = cx.notes;
  result.param_origins = cx.param_origins;

  result.propagation.counters = cx.pp.counters;
  for (const auto& [reg, poly] : cx.pp.values)
    result.propagation.values[reg] = public_expr(poly, cx.pp);

  // Declare any late-minted params on the statement domains.
  for (auto& st : model.statements) {
    IntSet dom(st.label, st.domain.dims(), model.params);
    for (const auto& d : st.domain.disjuncts()) dom.add_disjunct(d);
    st.domain = dom;
  }

  model.validate();
  return result;
}

}  // namespace raceset
