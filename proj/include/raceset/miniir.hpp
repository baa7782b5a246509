// Copyright (c) raceset contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "raceset/kernel_model.hpp"

namespace raceset {

// Reduced SSA kernel IR. Line-oriented grammar:
//   kernel @name(%p: <type>, ...) [shared %s: [<N> x <ty>], ...] {
//   <label>:
//     %r = <op> <operand>(, <operand>)*
//     %r = load <array>[<idx>(, <idx>)*]
//     store <val>, <array>[<idx>(, <idx>)*]
//     %r = phi [<v>, <label>], ...
//     %r = call <tid.x|bid.x|blockdim.x|griddim.x|...>
//     barrier | barrier.block | barrier.warp<W>
//     br <label>  |  br <cond>, <l1>, <l2>
//   }
// Comments run from ';' to end of line.

enum class Opcode {
  Add,
  Sub,
  Mul,
  Shl,
  Icmp,
  Select,
  Load,
  Store,
  Br,
  CondBr,
  Phi,
  Barrier,
  IntrinsicCall,
  AllocaShared,
  GetElem,
  Ret,
};

enum class IcmpPred { Eq, Ne, Lt, Le, Gt, Ge };

enum class IntrinsicId {
  TidX, TidY, TidZ,
  BidX, BidY, BidZ,
  BlockDimX, BlockDimY, BlockDimZ,
  GridDimX, GridDimY, GridDimZ,
};

const char* intrinsic_name(IntrinsicId id);
std::optional<IntrinsicId> intrinsic_from_name(const std::string& s);

struct Operand {
  enum class Kind { Reg, Imm } kind = Kind::Imm;
  std::string reg;   // without '%'
  int64_t imm = 0;

  static Operand r(std::string name);
  static Operand i(int64_t v);
  bool is_reg() const { return kind == Kind::Reg; }
};

struct PhiIncoming {
  Operand value;
  std::string pred;  // predecessor block label
};

enum class BarrierScope { Block, Warp };

struct Instruction {
  Opcode op;
  std::optional<std::string> result;  // SSA name without '%'
  std::vector<Operand> operands;      // add/sub/mul/shl/select: value operands
  IcmpPred pred = IcmpPred::Eq;
  IntrinsicId intrinsic = IntrinsicId::TidX;
  std::string array;                  // load/store/getelem array name (or handle reg)
  std::vector<Operand> indices;       // load/store/getelem indices
  std::vector<PhiIncoming> incoming;  // phi
  std::string target, target2;        // br / cond_br labels
  BarrierScope scope = BarrierScope::Block;
  int64_t warp_width = 0;             // barrier.warp<W>
  int64_t shared_extent = 0;          // alloca_shared
  ElemKind shared_elem = ElemKind::I32;
  int line = 0;
  size_t index = 0;  // global instruction index, filled by the parser
};

struct BasicBlock {
  std::string label;
  std::vector<Instruction> instrs;
  std::vector<size_t> succs, preds;  // filled by the parser
  int line = 0;
};

struct KernelParam {
  std::string name;
  bool is_pointer = false;
  ElemKind elem = ElemKind::I32;
};

struct SharedDecl {
  std::string name;
  int64_t extent = 0;
  ElemKind elem = ElemKind::I32;
};

struct Function {
  std::string name;
  std::vector<KernelParam> params;
  std::vector<SharedDecl> shared_decls;
  std::vector<BasicBlock> blocks;

  const BasicBlock& entry() const { return blocks.front(); }
  std::optional<size_t> block_index(const std::string& label) const;
  const KernelParam* find_param(const std::string& name) const;
  const SharedDecl* find_shared(const std::string& name) const;
};

// Parses and verifies SSA (unique defs, uses dominated by defs) and CFG
// shape (terminators close every block, branch targets exist).
Function parse_miniir(const std::string& text);
Function load_miniir_file(const std::string& path);

// -- analyses ---------------------------------------------------------------

struct GridIterators {
  // intrinsic-result register -> hardware role (the model dim bindings)
  std::map<std::string, GridRole> reg_role;
  bool uses_warp_sync = false;
  int64_t warp_width = 0;
};

// Maps intrinsic uses to model dimensions; composite ids like
// bid.x*blockdim.x + tid.x stay affine and need no binding of their own.
// Throws UnsupportedIdPattern when a thread/block id flows through a
// non-affine operation that feeds an address or bound.
GridIterators find_grid_iterators(const Function& f);

struct LoopInfo {
  size_t header = 0;
  size_t latch = 0;               // back-edge source
  std::set<size_t> blocks;
  std::string induction;          // phi result
  Operand init;
  int64_t step = 0;
  // Header exit comparison: `icmp pred lhs, rhs`; body is taken on
  // `body_on_true`.
  IcmpPred pred = IcmpPred::Lt;
  Operand cmp_lhs, cmp_rhs;
  bool body_on_true = true;
  std::string counter;            // normalized trip-count dim (q0, q1, ...)
  std::vector<std::string> carried_phis;  // non-induction phis in the header
  // further constant-step phis: using one in an address or bound is an error
  std::vector<std::string> extra_inductions;
};

struct GridLaunch {
  int64_t grid[3] = {1, 1, 1};
  int64_t block[3] = {1, 1, 1};
};

// Natural loops via dominator analysis; induction recognized as
// phi(init, self +- step) where the step constant-folds (launch extents fold
// only when a launch is given). Throws IrreducibleCfg, NonAffineBound,
// MultipleInductions.
std::vector<LoopInfo> find_loops(const Function& f);
std::vector<LoopInfo> find_loops(const Function& f, const std::optional<GridLaunch>& launch);

struct OpaqueSource {
  std::string array;       // empty for non-load opaques (icmp/select chains)
  std::string index_desc;  // rendered index expression
  std::string desc;        // e.g. "load colInd[4q0 + rs + tx]"
};

// Fixed point of substituting SSA definitions. Affine results range over
// grid dims, normalized loop counters and kernel scalar params; everything
// data-dependent is Opaque with its load source.
struct PropagatedExpr {
  std::optional<AffineExpr> affine;
  std::optional<OpaqueSource> opaque;

  bool is_affine() const { return affine.has_value(); }
};

struct Propagation {
  std::map<std::string, PropagatedExpr> values;
  // loop header block index -> counter dim name
  std::map<size_t, std::string> counters;
};

// With a launch configuration, blockdim/griddim intrinsics become concrete;
// without one they stay symbolic.
Propagation propagate(const Function& f, const std::optional<GridLaunch>& launch = {});

// -- extraction -------------------------------------------------------------

struct ExtractOptions {
  // IR block label -> section name (e.g. init -> I)
  std::map<std::string, std::string> section_hints;
  std::optional<GridLaunch> launch;
};

struct Extraction {
  KernelModel model;
  // fresh parameter -> defining register (opaque load sites)
  std::map<std::string, std::string> param_origins;
  // model dim -> origin: "intr:<reg>" or "loop:<header label>"
  std::map<std::string, std::string> dim_origins;
  // instruction global index -> statement label (loads/stores only)
  std::map<size_t, std::string> instr_section;
  // array -> delinearization pitch per split (rendered), outermost first
  std::map<std::string, std::vector<std::string>> array_views;
  Propagation propagation;
};

// The 5-step model recovery: kernel surface, grid iterators, loops,
// branches/fences, then sections from bounds plus expression propagation.
Extraction extract_model(const Function& f, const ExtractOptions& opts = {});

}  // namespace raceset
