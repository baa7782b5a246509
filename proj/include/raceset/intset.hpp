// Copyright (c) raceset contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "raceset/affine.hpp"

namespace raceset {

// One conjunction of affine constraints, optionally with existentially
// quantified helper dimensions. A set is the union of its disjuncts; the
// empty disjunct list is the canonical empty set.
struct Disjunct {
  std::vector<std::string> exists;
  std::vector<Constraint> constraints;
};

inline constexpr size_t kDisjunctLimit = 4096;

// Parameterized integer set over an ordered tuple of named dimensions.
// Dimensions keep tuple order; parameters are kept sorted by name. All values
// are immutable in practice: operations return new sets.
class IntSet {
public:
  IntSet() = default;
  IntSet(std::string space, std::vector<std::string> dims, std::vector<std::string> params = {});

  static IntSet universe(std::string space, std::vector<std::string> dims,
                         std::vector<std::string> params = {});

  const std::string& space() const { return space_; }
  const std::vector<std::string>& dims() const { return dims_; }
  const std::vector<std::string>& params() const { return params_; }
  const std::vector<Disjunct>& disjuncts() const { return disjuncts_; }
  size_t arity() const { return dims_.size(); }
  bool has_existentials() const;

  void declare_param(const std::string& name);
  bool is_param(const std::string& name) const;

  // Validates that the disjunct only references declared dims, params and its
  // own existentials, gcd-normalizes, and drops statically infeasible
  // disjuncts. Throws InvalidSet / DisjunctLimit.
  void add_disjunct(Disjunct d);
  void add_constraints(std::vector<Constraint> cs);  // single-disjunct convenience

  // Positional dim rename; also renames inside constraints.
  IntSet renamed_dims(const std::vector<std::string>& new_dims) const;
  IntSet with_space(std::string space) const;
  // Substitutes concrete values for a subset of parameters.
  IntSet substitute_params(const std::map<std::string, int64_t>& values) const;

  // Exact membership. Existential dimensions are decided by a bounded search
  // over their Fourier-Motzkin bounds; throws UnboundedSearch if no finite
  // bounds exist for an existential.
  bool contains(const std::vector<int64_t>& point,
                const std::map<std::string, int64_t>& param_values = {}) const;

  bool structurally_empty() const { return disjuncts_.empty(); }

private:
  std::string space_;
  std::vector<std::string> dims_;
  std::vector<std::string> params_;
  std::vector<Disjunct> disjuncts_;
};

// Set algebra. Binary ops require equal space labels and arity (the right
// operand is positionally renamed onto the left's dimensions); parameters are
// unioned by name.
IntSet intersect(const IntSet& a, const IntSet& b);
IntSet union_same(const IntSet& a, const IntSet& b);
// a minus b. The right operand must be existential-free (its negation would
// need a universal quantifier otherwise).
IntSet subtract(const IntSet& a, const IntSet& b);
// Existentially projects the named dims out of the set. Exact: eliminations
// with unit coefficients use Gauss/Fourier-Motzkin directly, other dims are
// retained as existentials alongside their rational shadow constraints.
IntSet project_out(const IntSet& s, const std::vector<std::string>& kill);

// Integer relation between two labeled tuples.
class IntRel {
public:
  IntRel() = default;
  IntRel(std::string in_space, std::vector<std::string> in_dims, std::string out_space,
         std::vector<std::string> out_dims, std::vector<std::string> params = {});

  static IntRel universe(std::string in_space, std::vector<std::string> in_dims,
                         std::string out_space, std::vector<std::string> out_dims,
                         std::vector<std::string> params = {});

  const std::string& in_space() const { return in_space_; }
  const std::string& out_space() const { return out_space_; }
  std::vector<std::string> in_dims() const;
  std::vector<std::string> out_dims() const;
  size_t in_arity() const { return in_arity_; }
  size_t out_arity() const { return set_.arity() - in_arity_; }

  // The relation as a set over the concatenated (in, out) tuple.
  const IntSet& as_set() const { return set_; }
  IntSet& mutable_set() { return set_; }

  void add_disjunct(Disjunct d) { set_.add_disjunct(std::move(d)); }
  void add_constraints(std::vector<Constraint> cs) { set_.add_constraints(std::move(cs)); }
  void declare_param(const std::string& name) { set_.declare_param(name); }

  bool contains(const std::vector<int64_t>& in_point, const std::vector<int64_t>& out_point,
                const std::map<std::string, int64_t>& param_values = {}) const;

  IntRel substitute_params(const std::map<std::string, int64_t>& values) const;
  IntRel renamed(const std::vector<std::string>& in_dims,
                 const std::vector<std::string>& out_dims) const;

  static IntRel from_set(IntSet s, std::string in_space, std::string out_space, size_t in_arity);

private:
  IntSet set_;
  std::string in_space_, out_space_;
  size_t in_arity_ = 0;
};

IntRel intersect(const IntRel& a, const IntRel& b);
IntRel union_same(const IntRel& a, const IntRel& b);
IntRel subtract(const IntRel& a, const IntRel& b);
IntRel inverse(const IntRel& r);
// Relational composition: pairs (x, z) with r1(x, y) and r2(y, z) for some y.
// compose(identity, r) == r.
IntRel compose(const IntRel& r1, const IntRel& r2);
// Strict lexicographic order {t -> u : t lex< u} on time vectors of the given
// arity, expanded into one disjunct per position.
IntRel lex_lt(size_t arity, const std::string& in_space = "", const std::string& out_space = "");
// Constrains the input (resp. output) tuple to a set of matching arity.
IntRel intersect_domain(const IntRel& r, const IntSet& s);
IntRel intersect_range(const IntRel& r, const IntSet& s);

// Integer point of a set: per-dimension and per-parameter values.
struct WitnessPoint {
  std::string space;
  std::map<std::string, int64_t> dim_values;
  std::map<std::string, int64_t> param_values;
};

struct EmptinessVerdict {
  enum class Kind { Empty, NonEmpty, Inconclusive };
  Kind kind = Kind::Inconclusive;
  std::optional<WitnessPoint> witness;  // set iff NonEmpty
  std::string reason;                   // set iff Inconclusive
  std::map<std::string, std::pair<int64_t, int64_t>> box_used;

  bool empty() const { return kind == Kind::Empty; }
  bool nonempty() const { return kind == Kind::NonEmpty; }
  bool inconclusive() const { return kind == Kind::Inconclusive; }
};

struct EmptinessOptions {
  // Declared parameter ranges; sample values are clipped to these.
  std::map<std::string, std::pair<int64_t, int64_t>> param_bounds;
  std::vector<int64_t> param_samples = {0, 1, 2, 4, 8};
  // Half-width of the fallback search box for dimensions without finite
  // Fourier-Motzkin bounds. Searching a fallback box never proves emptiness.
  int64_t fallback_halfwidth = 10;
  // Cap on visited search nodes per disjunct.
  int64_t search_budget = 4'000'000;
};

// Three-tier emptiness decision per disjunct: gcd infeasibility, rational
// Fourier-Motzkin infeasibility, then bounded integer witness search with
// parameters instantiated from samples. Empty is only returned on a sound
// proof (tiers 1-2, or exhaustion of a complete finite box on a
// parameter-free disjunct); NonEmpty always carries a substitution-checked
// witness; everything else is Inconclusive with the box recorded.
EmptinessVerdict is_empty(const IntSet& s, const EmptinessOptions& opts = {});
EmptinessVerdict is_empty(const IntRel& r, const EmptinessOptions& opts = {});

// Keyed family of sets, one per space label; union is label-wise.
class SetCollection {
public:
  void unite(const IntSet& s);
  void unite(const SetCollection& c);
  const IntSet* find(const std::string& space) const;
  const std::map<std::string, IntSet>& by_space() const { return by_space_; }
  bool empty() const { return by_space_.empty(); }

private:
  std::map<std::string, IntSet> by_space_;
};

SetCollection set_union(const IntSet& a, const IntSet& b);

}  // namespace raceset
