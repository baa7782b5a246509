// Copyright (c) raceset contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "raceset/kernel_model.hpp"

namespace raceset {

enum class DependenceKind { RaW, WaW, WaR };

const char* dependence_kind_name(DependenceKind k);

// A witnessed conflict between two statement instances on one array cell.
struct ConflictWitness {
  std::string source;  // writer-side label for RaW/WaW, reader for WaR
  std::string target;
  std::string array;
  std::map<std::string, int64_t> source_iter;
  std::map<std::string, int64_t> target_iter;
  std::vector<int64_t> cell;
  std::map<std::string, int64_t> param_values;
};

struct DependenceEntry {
  DependenceKind kind;
  std::string source, target, array;
  IntRel relation;
  EmptinessVerdict verdict;
  std::optional<ConflictWitness> witness;
};

enum class RaceVerdict { RaceFree, RaceFound, Inconclusive };

const char* race_verdict_name(RaceVerdict v);

struct DependenceReport {
  std::vector<DependenceEntry> dependences;  // per kind/pair/array
  std::vector<DependenceEntry> races;        // unordered conflicting pairs
  std::vector<ConflictWitness> race_witnesses;
  RaceVerdict verdict = RaceVerdict::RaceFree;
  std::vector<std::string> inconclusive_reasons;
  std::vector<std::string> notes;
};

struct CheckOptions {
  EmptinessOptions emptiness;
};

// Schedule-ordered dependences of one kind: instance pairs touching a common
// cell (writer on the appropriate side) with lexicographically increasing
// timestamps.
std::vector<DependenceEntry> dependences(const KernelModel& model, DependenceKind kind,
                                         const CheckOptions& opts = {});

// Race check: conflicting cross-thread instance pairs minus happens-before in
// both directions. Shared arrays only conflict within a block.
DependenceReport races(const KernelModel& model, const CheckOptions& opts = {});

// Full report: the three dependence kinds plus the race analysis.
DependenceReport analyze(const KernelModel& model, const CheckOptions& opts = {});

}  // namespace raceset
