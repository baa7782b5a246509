// Copyright (c) raceset contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <set>
#include <string>

#include "raceset/kernel_model.hpp"

namespace raceset {

// Hand-written kernel model format. Line-oriented sections:
//
//   model <name>
//   params: M, N, K [0 <= rs, rs <= re, re <= A_S as extra lines]
//   param M >= 1            (optional declared bounds / containment)
//   array A f32 global [n]
//   array sm_k i32 shared [4]
//   grid blocks 2,1,1 threads 4,1,1
//   bind i = block.x
//   warp 2
//   statement S
//     domain [k] : 0 <= k < n
//     read A[k]
//     write C[k, k]
//   schedule S = [0, 0, k, 0]
//
// Affine expressions: ints, names, products int*name; comparisons <=, <, >=,
// >, =, == and chains (0 <= k < n); conjunction with `and`.
KernelModel parse_model_text(const std::string& text);
KernelModel load_model_file(const std::string& path);

std::string render_model_text(const KernelModel& model);

// Expression / constraint parsing, shared with round-trip tests.
AffineExpr parse_affine_expr(const std::string& text, const std::set<std::string>& dims,
                             const std::set<std::string>& params);
std::vector<Constraint> parse_constraint_text(const std::string& text,
                                              const std::set<std::string>& dims,
                                              const std::set<std::string>& params);

}  // namespace raceset
