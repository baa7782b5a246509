// Copyright (c) raceset contributors.
// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <set>

#include "fm.hpp"
#include "raceset/intset.hpp"

namespace raceset {

namespace {

struct DisjunctDecision {
  enum class Kind { Empty, Witness, Undecided } kind = Kind::Undecided;
  std::map<std::string, int64_t> point;  // dims + exists
  std::map<std::string, int64_t> params;
  std::string note;
  std::map<std::string, std::pair<int64_t, int64_t>> box;
};

// Candidate values for one parameter: samples plus declared bound endpoints,
// clipped to the declared bounds.
std::vector<int64_t> param_candidates(const std::string& p, const EmptinessOptions& opts) {
  std::vector<int64_t> vals = opts.param_samples;
  auto it = opts.param_bounds.find(p);
  if (it != opts.param_bounds.end()) {
    auto [lo, hi] = it->second;
    vals.push_back(lo);
    vals.push_back(hi);
    std::vector<int64_t> clipped;
    for (int64_t v : vals)
      if (v >= lo && v <= hi) clipped.push_back(v);
    vals = std::move(clipped);
  }
  std::sort(vals.begin(), vals.end());
  vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
  return vals;
}

DisjunctDecision decide_disjunct(const IntSet& s, const Disjunct& d,
                                 const EmptinessOptions& opts) {
  DisjunctDecision out;

  std::vector<fm::Lin> sys;
  for (const auto& c : d.constraints) sys.push_back(fm::from_constraint(c));

  // Tier 1: gcd infeasibility (normalize_system tightens every row).
  {
    std::vector<fm::Lin> copy = sys;
    if (!fm::normalize_system(copy)) {
      out.kind = DisjunctDecision::Kind::Empty;
      return out;
    }
  }
  // Tier 2: rational Fourier-Motzkin with parameters as variables.
  if (fm::rationally_infeasible(sys)) {
    out.kind = DisjunctDecision::Kind::Empty;
    return out;
  }

  // Tier 3: bounded witness search, parameters instantiated from samples.
  std::set<std::string> used;
  for (const auto& l : sys)
    for (const auto& [n, v] : l.c) used.insert(n);
  std::vector<std::string> params_used;
  for (const auto& p : s.params())
    if (used.count(p)) params_used.push_back(p);

  std::vector<std::string> vars;
  for (const auto& dim : s.dims()) vars.push_back(dim);
  for (const auto& e : d.exists) vars.push_back(e);

  fm::SearchOptions so;
  so.fallback_halfwidth = opts.fallback_halfwidth;
  so.budget = opts.search_budget;

  bool all_exhaustive = true;
  std::vector<std::vector<int64_t>> cands;
  for (const auto& p : params_used) {
    cands.push_back(param_candidates(p, opts));
    if (cands.back().empty()) {
      out.kind = DisjunctDecision::Kind::Undecided;
      out.note = "no candidate values for parameter " + p;
      return out;
    }
  }

  std::vector<size_t> idx(params_used.size(), 0);
  while (true) {
    std::map<std::string, int64_t> pv;
    std::vector<fm::Lin> inst = sys;
    for (size_t i = 0; i < params_used.size(); ++i) {
      pv[params_used[i]] = cands[i][idx[i]];
      fm::substitute_const(inst, params_used[i], cands[i][idx[i]]);
    }
    fm::SearchResult r = fm::find_point(inst, vars, so);
    for (const auto& [n, b] : r.box_used) {
      auto it = out.box.find(n);
      if (it == out.box.end())
        out.box.emplace(n, b);
      else {
        it->second.first = std::min(it->second.first, b.first);
        it->second.second = std::max(it->second.second, b.second);
      }
    }
    if (r.point) {
      out.kind = DisjunctDecision::Kind::Witness;
      out.point = *r.point;
      // Unreferenced parameters still get a value so the witness is total.
      for (const auto& p : s.params()) {
        if (pv.count(p)) continue;
        auto c = param_candidates(p, opts);
        pv[p] = c.empty() ? 0 : c.front();
      }
      out.params = std::move(pv);
      return out;
    }
    if (!r.exhaustive) all_exhaustive = false;

    // Next sample combination.
    size_t level = 0;
    for (; level < idx.size(); ++level) {
      if (++idx[level] < cands[level].size()) break;
      idx[level] = 0;
    }
    if (idx.empty() || level == idx.size()) break;
  }

  if (params_used.empty() && all_exhaustive) {
    // Complete finite box searched with no parameters left free: sound proof.
    out.kind = DisjunctDecision::Kind::Empty;
    return out;
  }
  out.kind = DisjunctDecision::Kind::Undecided;
  if (!params_used.empty()) {
    out.note = "no witness under sampled parameters (";
    for (size_t i = 0; i < params_used.size(); ++i)
      out.note += (i ? ", " : "") + params_used[i];
    out.note += ")";
  } else {
    out.note = "witness search box not exhaustive";
  }
  return out;
}

}  // namespace

EmptinessVerdict is_empty(const IntSet& s, const EmptinessOptions& opts) {
  EmptinessVerdict v;
  bool any_undecided = false;
  std::string reasons;
  for (const auto& d : s.disjuncts()) {
    DisjunctDecision dec = decide_disjunct(s, d, opts);
    switch (dec.kind) {
    case DisjunctDecision::Kind::Empty: continue;
    case DisjunctDecision::Kind::Witness: {
      WitnessPoint w;
      w.space = s.space();
      for (const auto& dim : s.dims()) w.dim_values[dim] = dec.point.at(dim);
      w.param_values = dec.params;
      // Re-validate by substitution through the public membership test.
      std::vector<int64_t> pt;
      for (const auto& dim : s.dims()) pt.push_back(w.dim_values[dim]);
      if (!s.contains(pt, w.param_values))
        throw Error(ErrorKind::InvalidSet, "witness failed validation in " + s.space());
      v.kind = EmptinessVerdict::Kind::NonEmpty;
      v.witness = std::move(w);
      return v;
    }
    case DisjunctDecision::Kind::Undecided:
      any_undecided = true;
      if (!reasons.empty()) reasons += "; ";
      reasons += dec.note;
      for (const auto& [n, b] : dec.box) {
        auto it = v.box_used.find(n);
        if (it == v.box_used.end())
          v.box_used.emplace(n, b);
        else {
          it->second.first = std::min(it->second.first, b.first);
          it->second.second = std::max(it->second.second, b.second);
        }
      }
      break;
    }
  }
  if (!any_undecided) {
    v.kind = EmptinessVerdict::Kind::Empty;
    return v;
  }
  v.kind = EmptinessVerdict::Kind::Inconclusive;
  v.reason = reasons;
  return v;
}

EmptinessVerdict is_empty(const IntRel& r, const EmptinessOptions& opts) {
  return is_empty(r.as_set(), opts);
}

}  // namespace raceset
