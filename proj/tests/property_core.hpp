// Copyright (c) raceset contributors.
// SPDX-License-Identifier: Apache-2.0
//
// Shared randomized agreement core: generates bounded sets/relations
// (coefficients in [-3,3], per-dim bounds within [-10,10], up to 3 dims) and
// compares every algebra operation pointwise against lattice enumeration.
#pragma once

#include <algorithm>
#include <cstdlib>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "raceset/intset.hpp"
#include "raceset/oracle.hpp"

namespace raceset::proptest {

inline uint64_t seed_from_env(uint64_t fallback = 20260808ull) {
  if (const char* s = std::getenv("RACESET_SEED")) return std::strtoull(s, nullptr, 10);
  return fallback;
}

struct Gen {
  std::mt19937_64 rng;
  explicit Gen(uint64_t seed) : rng(seed) {}

  int64_t uniform(int64_t lo, int64_t hi) {
    return std::uniform_int_distribution<int64_t>(lo, hi)(rng);
  }

  IntSet set(const std::string& space, const std::vector<std::string>& dims) {
    IntSet s(space, dims);
    int disjuncts = static_cast<int>(uniform(1, 2));
    for (int dj = 0; dj < disjuncts; ++dj) {
      std::vector<Constraint> cs;
      for (const auto& d : dims) {
        int64_t lo = uniform(-10, 6);
        int64_t hi = uniform(lo, 10);
        cs.push_back(constraint_le(AffineExpr::constant(lo), AffineExpr::dim(d)));
        cs.push_back(constraint_le(AffineExpr::dim(d), AffineExpr::constant(hi)));
      }
      int extra = static_cast<int>(uniform(0, 3));
      for (int e = 0; e < extra; ++e) {
        AffineExpr expr = AffineExpr::constant(uniform(-8, 8));
        for (const auto& d : dims) expr += AffineExpr::dim(d, uniform(-3, 3));
        if (uniform(0, 3) == 0)
          cs.push_back(constraint_eq0(expr));
        else
          cs.push_back(constraint_ge0(expr));
      }
      s.add_disjunct(Disjunct{{}, std::move(cs)});
    }
    return s;
  }
};

struct Outcome {
  int cases = 0;
  int mismatches = 0;
  int unsound_empty = 0;
  int bounded_inconclusive = 0;
  int bad_witness = 0;
};

using Points = std::vector<std::vector<int64_t>>;

inline Points sorted_unique(Points v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

inline void check_emptiness(const IntSet& s, const Points& pts, Outcome& out) {
  EmptinessVerdict v = is_empty(s);
  if (v.empty() && !pts.empty()) ++out.unsound_empty;
  if (v.nonempty()) {
    std::vector<int64_t> w;
    for (const auto& d : s.dims()) w.push_back(v.witness->dim_values.at(d));
    if (std::find(pts.begin(), pts.end(), w) == pts.end()) ++out.bad_witness;
  }
  if (v.inconclusive()) ++out.bounded_inconclusive;
}

// Runs `cases` seeded rounds; every third round covers relations
// (inverse/compose), the rest cover intersect/union/subtract.
inline Outcome run_agreement(uint64_t seed, int cases) {
  Gen gen(seed);
  EnumBox box;
  Outcome out;
  for (int iter = 0; iter < cases; ++iter) {
    ++out.cases;
    int nd = static_cast<int>(gen.uniform(1, 3));
    std::vector<std::string> dims;
    for (int i = 0; i < nd; ++i) dims.push_back("x" + std::to_string(i));

    if (iter % 3 != 2) {
      IntSet a = gen.set("S", dims);
      IntSet b = gen.set("S", dims);
      Points pa = enumerate_set(a, box);
      Points pb = enumerate_set(b, box);

      std::set<std::vector<int64_t>> sb(pb.begin(), pb.end());
      Points want_i, want_u = pa, want_s;
      for (const auto& p : pa) (sb.count(p) ? want_i : want_s).push_back(p);
      want_u.insert(want_u.end(), pb.begin(), pb.end());
      want_u = sorted_unique(std::move(want_u));

      if (enumerate_set(intersect(a, b), box) != want_i) ++out.mismatches;
      if (enumerate_set(union_same(a, b), box) != want_u) ++out.mismatches;
      if (enumerate_set(subtract(a, b), box) != want_s) ++out.mismatches;

      check_emptiness(a, pa, out);
      check_emptiness(intersect(a, b), want_i, out);
      check_emptiness(subtract(a, b), want_s, out);
    } else {
      IntRel r1 = IntRel::from_set(gen.set("S -> M", {"x", "m"}), "S", "M", 1);
      IntRel r2 = IntRel::from_set(gen.set("M -> T", {"m", "z"}), "M", "T", 1);
      Points p1 = enumerate_set(r1.as_set(), box);
      Points p2 = enumerate_set(r2.as_set(), box);

      Points swapped;
      for (const auto& p : p1) swapped.push_back({p[1], p[0]});
      if (enumerate_set(inverse(r1).as_set(), box) != sorted_unique(std::move(swapped)))
        ++out.mismatches;

      Points joined;
      for (const auto& p : p1)
        for (const auto& q : p2)
          if (p[1] == q[0]) joined.push_back({p[0], q[1]});
      Points expect = sorted_unique(std::move(joined));
      IntRel comp = compose(r1, r2);
      if (enumerate_set(comp.as_set(), box) != expect) ++out.mismatches;

      check_emptiness(r1.as_set(), p1, out);
      check_emptiness(comp.as_set(), expect, out);
    }
  }
  return out;
}

}  // namespace raceset::proptest
