// Copyright (c) raceset contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "raceset/intset.hpp"

namespace raceset {

enum class MemSpace { Global, Shared, Local };
enum class ElemKind { I32, I64, F32, F64 };

const char* mem_space_name(MemSpace s);
const char* elem_kind_name(ElemKind k);

// A declared array. Shared arrays carry concrete per-dimension extents;
// global arrays may carry symbolic extents (parameter names) or none.
struct ArrayRef {
  std::string name;
  MemSpace space = MemSpace::Global;
  ElemKind elem = ElemKind::I32;
  size_t arity = 1;
  std::vector<int64_t> extents;              // concrete extents (Shared), may be empty
  std::vector<std::string> extent_params;    // symbolic extents per dim ("" when unknown)
};

// One access of a statement: instance tuple -> array cells.
struct Access {
  std::string array;
  IntRel rel;  // in_space = statement label, out_space = array name
};

struct Statement {
  std::string label;
  IntSet domain;  // dims: grid-bound dims first, then loop dims
  std::vector<Access> reads;
  std::vector<Access> writes;
};

// Hardware coordinate a model dimension is bound to.
enum class GridRole { BlockX, BlockY, BlockZ, ThreadX, ThreadY, ThreadZ };

const char* grid_role_name(GridRole r);
std::optional<GridRole> grid_role_from_name(const std::string& s);

struct GridBinding {
  std::string dim;
  GridRole role;
};

struct GridConfig {
  int64_t block[3] = {1, 1, 1};  // threads per block (x, y, z)
  int64_t grid[3] = {1, 1, 1};   // blocks (x, y, z)
  std::vector<GridBinding> bindings;
  // Warp width for warp-scoped barriers; 0 when the model has none.
  int64_t warp_width = 0;

  int64_t extent_of(GridRole r) const;
  std::optional<GridRole> role_of(const std::string& dim) const;
  bool has_bindings() const { return !bindings.empty(); }
};

// Per-statement affine timestamps. Component 0 is the block-barrier phase;
// models using warp sync carry the warp phase at component 1. Timestamps are
// padded with zeros to a uniform arity.
struct PhasedSchedule {
  std::map<std::string, std::vector<AffineExpr>> timestamps;
  bool has_warp_phase = false;

  size_t arity() const;
};

struct KernelModel {
  std::string name;
  std::vector<std::string> params;
  std::map<std::string, std::pair<int64_t, int64_t>> param_bounds;
  std::vector<Constraint> param_constraints;  // e.g. 0 <= rs <= re <= A_S
  std::vector<ArrayRef> arrays;
  std::vector<Statement> statements;
  GridConfig grid;
  PhasedSchedule schedule;
  std::vector<std::string> notes;  // superset-approximation notes, etc.

  const ArrayRef* find_array(const std::string& name) const;
  const Statement* find_statement(const std::string& label) const;
  // Throws InvalidModel / UndeclaredParameter on malformed models.
  void validate() const;
  KernelModel substitute_params(const std::map<std::string, int64_t>& values) const;
};

enum class AccessKind { Read, Write };

// Union of all statement domains (grid bounds and parameter containment
// constraints folded in), keyed by statement label.
SetCollection build_domain(const KernelModel& model);

// Keyed access relations, one per (statement, array) with the given kind,
// each factored with the statement domain. Statements without accesses of the
// kind contribute no key.
std::map<std::pair<std::string, std::string>, IntRel> build_access(const KernelModel& model,
                                                                   AccessKind kind);

// Happens-before between instances of statements a and b: same thread and
// lexicographically ordered timestamps, or same block and strictly increasing
// block phase, or (with warp sync) same warp and strictly increasing warp
// phase. Distinct blocks are never ordered.
IntRel happens_before(const KernelModel& model, const Statement& a, const Statement& b);

// All statement pairs, keyed (a.label, b.label).
std::map<std::pair<std::string, std::string>, IntRel> happens_before(const KernelModel& model);

// The full timestamp map of a statement as a relation {S[dims] -> [t...]}.
IntRel schedule_relation(const KernelModel& model, const Statement& s);

// The statement domain with grid bounds and param containment applied.
IntSet full_domain(const KernelModel& model, const Statement& s);

}  // namespace raceset
