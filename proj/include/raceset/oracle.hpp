// Copyright (c) raceset contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "raceset/kernel_model.hpp"
#include "raceset/miniir.hpp"

namespace raceset {

// Concrete execution input: parameter values, array contents, launch extents.
struct ConcreteInstance {
  std::string name;
  std::map<std::string, int64_t> params;
  struct ArrayData {
    ElemKind elem = ElemKind::I32;
    std::vector<int64_t> ints;     // integral elements
    std::vector<double> floats;    // floating elements
    size_t size() const;
  };
  std::map<std::string, ArrayData> arrays;
  int64_t grid[3] = {1, 1, 1};
  int64_t block[3] = {1, 1, 1};
  // CSR triple to validate: rowPtr nondecreasing from 0 to nnz, colInd < cols.
  struct CsrSpec {
    std::string row_ptr, col_ind, val;
    int64_t cols = 0;
  };
  std::optional<CsrSpec> csr;
};

ConcreteInstance parse_instance(const std::string& text);
ConcreteInstance load_instance_file(const std::string& path);
// Throws CsrInvalid when the declared CSR triple is malformed.
void validate_instance(const ConcreteInstance& inst);

struct AccessLogEntry {
  int64_t block[3] = {0, 0, 0};
  int64_t thread[3] = {0, 0, 0};
  int64_t phase = 0;       // block barriers executed by this thread before the access
  int64_t warp_phase = 0;  // all barriers (block or warp scope) executed
  int64_t serial = 0;      // per-thread sequence number
  std::string array;
  std::vector<int64_t> cell;
  AccessKind kind = AccessKind::Read;
  size_t instr_index = 0;  // mini-IR origin; unused for model runs
  std::string statement;   // model statement label when known
  // dim/param valuation at the access (fidelity mode)
  std::map<std::string, int64_t> context;
  // register snapshot (fidelity mode, mini-IR runs)
  std::map<std::string, int64_t> registers;

  bool same_thread(const AccessLogEntry& o) const;
  bool same_block(const AccessLogEntry& o) const;
};

using AccessLog = std::vector<AccessLogEntry>;

struct RunOptions {
  bool reverse_thread_order = false;  // permuted round order for invariance checks
  bool record_context = false;
  const Extraction* extraction = nullptr;  // labels contexts/sections when given
  int64_t step_limit = 1'000'000;          // instructions per thread
};

// Interprets a mini-IR kernel over the instance. Threads advance in
// phase-synchronous rounds (each runs to its next barrier), serially within a
// round; the log is deterministic. Throws StepLimitExceeded / OutOfBounds.
AccessLog run(const ConcreteInstance& inst, const Function& f, const RunOptions& opts = {});

// Interprets a hand-written model: enumerates statement instances in schedule
// order per thread and logs each access. Requires access cells to be fully
// determined by the instance (no fresh-parameter cells).
AccessLog run(const ConcreteInstance& inst, const KernelModel& model,
              const RunOptions& opts = {});

struct OracleRacePair {
  AccessLogEntry first, second;
};

struct OracleVerdict {
  bool race_found = false;
  std::vector<OracleRacePair> pairs;
};

// Conflicting pair: same array and cell, at least one write, different
// threads, and either different blocks on a Global array, or same block with
// equal phase (no separating barrier; warp barriers only order same-warp
// pairs). The log is order-normalized first, so the verdict is invariant
// under permutation of thread execution order.
OracleVerdict detect_races(const AccessLog& log, const std::map<std::string, MemSpace>& spaces,
                           int64_t warp_width = 0);

// -- lattice enumeration (backs the isetcore property tests) ----------------

struct EnumBox {
  int64_t lo = -10, hi = 10;
  std::map<std::string, std::pair<int64_t, int64_t>> per_dim;

  EnumBox() = default;
  EnumBox(int64_t l, int64_t h) : lo(l), hi(h) {}
  std::pair<int64_t, int64_t> of(const std::string& dim) const;
};

// Exact lattice points of the set within the box (parameters must be
// substituted away first). Throws BoxTooLarge above 10^7 candidate points.
std::vector<std::vector<int64_t>> enumerate_set(const IntSet& s, const EnumBox& box);

// Pointwise equality of two same-arity sets on the box.
bool equal_on_box(const IntSet& a, const IntSet& b, const EnumBox& box);

}  // namespace raceset
