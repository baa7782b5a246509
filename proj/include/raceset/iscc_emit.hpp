// Copyright (c) raceset contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "raceset/depcheck.hpp"
#include "raceset/kernel_model.hpp"

namespace raceset {

// Rendered ISCC script in the listing order: prologue comments, Domain, Read,
// Write, Schedule, dependency-test tail. Identical models render to
// byte-identical text (LF line endings).
struct IsccScript {
  std::vector<std::string> prologue;
  std::string domain;
  std::string read;
  std::string write;
  std::string schedule;
  std::string test_tail;
  std::string text;
};

IsccScript emit_iscc(const KernelModel& model);

// Human-readable report rendering; the verdict token appears exactly once.
std::string emit_report_text(const DependenceReport& report);

// Canonical textual forms (shared by emission, reports and model dumps).
std::string render_affine(const AffineExpr& e);
std::string render_constraint(const Constraint& c);
std::string render_constraints(const std::vector<Constraint>& cs);
std::string render_set(const IntSet& s);
std::string render_rel(const IntRel& r);

}  // namespace raceset
