// Copyright (c) raceset contributors.
// SPDX-License-Identifier: Apache-2.0
#include "raceset/cli.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "raceset/depcheck.hpp"
#include "raceset/iscc_emit.hpp"
#include "raceset/miniir.hpp"
#include "raceset/model_text.hpp"
#include "raceset/oracle.hpp"

namespace raceset {

namespace {

using nlohmann::json;

struct CommonArgs {
  std::string input;
  std::string params;
  std::string grid;
  std::string sections;
  std::string out;
  std::string format = "text";
  int64_t box = 10;
  std::string mode = "race";
};

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::map<std::string, int64_t> parse_params_flag(const std::string& s) {
  std::map<std::string, int64_t> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    size_t eq = item.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorKind::Io, "--params expects name=value, got " + item);
    out[item.substr(0, eq)] = std::stoll(item.substr(eq + 1));
  }
  return out;
}

std::optional<GridLaunch> parse_grid_flag(const std::string& s) {
  if (s.empty()) return std::nullopt;
  GridLaunch l;
  size_t slash = s.find('/');
  if (slash == std::string::npos)
    throw Error(ErrorKind::Io, "--grid expects bx,by,bz/tx,ty,tz");
  auto triple = [&](const std::string& part, int64_t* dst) {
    std::stringstream ss(part);
    std::string tok;
    int i = 0;
    while (std::getline(ss, tok, ',') && i < 3) dst[i++] = std::stoll(tok);
    if (i != 3) throw Error(ErrorKind::Io, "--grid expects three extents per side");
  };
  triple(s.substr(0, slash), l.grid);
  triple(s.substr(slash + 1), l.block);
  return l;
}

std::map<std::string, std::string> parse_sections_flag(const std::string& s) {
  std::map<std::string, std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    size_t colon = item.find(':');
    if (colon == std::string::npos)
      throw Error(ErrorKind::Io, "--sections expects block:Label, got " + item);
    out[item.substr(0, colon)] = item.substr(colon + 1);
  }
  return out;
}

// Loads either front door: a hand-written model or a mini-IR kernel.
KernelModel load_input(const CommonArgs& args) {
  if (ends_with(args.input, ".mir")) {
    Function f = load_miniir_file(args.input);
    ExtractOptions opts;
    opts.launch = parse_grid_flag(args.grid);
    opts.section_hints = parse_sections_flag(args.sections);
    KernelModel m = extract_model(f, opts).model;
    auto vals = parse_params_flag(args.params);
    return vals.empty() ? m : m.substitute_params(vals);
  }
  KernelModel m = load_model_file(args.input);
  auto vals = parse_params_flag(args.params);
  return vals.empty() ? m : m.substitute_params(vals);
}

CheckOptions check_options(const CommonArgs& args, const KernelModel& m) {
  CheckOptions opts;
  opts.emptiness.param_samples = {1, 2, 4, 8};
  opts.emptiness.fallback_halfwidth = args.box;
  opts.emptiness.param_bounds = m.param_bounds;
  return opts;
}

void write_output(const CommonArgs& args, std::ostream& out, const std::string& text) {
  if (args.out.empty()) {
    out << text;
    return;
  }
  std::ofstream f(args.out, std::ios::binary);
  if (!f) throw Error(ErrorKind::Io, "cannot write " + args.out);
  f << text;
}

json witness_json(const ConflictWitness& w) {
  json j;
  j["source"] = w.source;
  j["target"] = w.target;
  j["array"] = w.array;
  j["cell"] = w.cell;
  j["source_iter"] = w.source_iter;
  j["target_iter"] = w.target_iter;
  j["params"] = w.param_values;
  return j;
}

json entry_json(const DependenceEntry& e) {
  json j;
  j["kind"] = dependence_kind_name(e.kind);
  j["source"] = e.source;
  j["target"] = e.target;
  j["array"] = e.array;
  j["cell"] = e.witness ? json(e.witness->cell) : json(nullptr);
  j["verdict"] = e.verdict.empty()      ? "empty"
                 : e.verdict.nonempty() ? "non-empty"
                                        : "inconclusive";
  j["witness"] = e.witness ? witness_json(*e.witness) : json(nullptr);
  return j;
}

std::string report_json(const DependenceReport& r, bool with_deps) {
  json j;
  j["verdict"] = race_verdict_name(r.verdict);
  j["races"] = json::array();
  for (const auto& e : r.races) j["races"].push_back(entry_json(e));
  if (with_deps) {
    j["dependences"] = json::array();
    for (const auto& e : r.dependences) j["dependences"].push_back(entry_json(e));
  }
  j["witnesses"] = json::array();
  for (const auto& w : r.race_witnesses) j["witnesses"].push_back(witness_json(w));
  j["inconclusive"] = r.inconclusive_reasons;
  j["notes"] = r.notes;
  return j.dump(2) + "\n";
}

int verdict_exit(RaceVerdict v) {
  switch (v) {
  case RaceVerdict::RaceFree: return 0;
  case RaceVerdict::RaceFound: return 1;
  case RaceVerdict::Inconclusive: return 2;
  }
  return 4;
}

int cmd_check(const CommonArgs& args, std::ostream& out) {
  KernelModel m = load_input(args);
  CheckOptions opts = check_options(args, m);
  if (args.mode == "dep") {
    DependenceReport r = analyze(m, opts);
    write_output(args, out,
                 args.format == "structured" ? report_json(r, true) : emit_report_text(r));
    return 0;
  }
  DependenceReport r = races(m, opts);
  write_output(args, out,
               args.format == "structured" ? report_json(r, false) : emit_report_text(r));
  return verdict_exit(r.verdict);
}

int cmd_emit(const CommonArgs& args, std::ostream& out) {
  KernelModel m = load_input(args);
  IsccScript script = emit_iscc(m);
  write_output(args, out, script.text);
  return 0;
}

int cmd_oracle(const CommonArgs& args, const std::string& instance_path, std::ostream& out) {
  ConcreteInstance inst = load_instance_file(instance_path);
  AccessLog log;
  std::map<std::string, MemSpace> spaces;
  int64_t warp_width = 0;
  if (ends_with(args.input, ".mir")) {
    Function f = load_miniir_file(args.input);
    log = run(inst, f);
    for (const auto& p : f.params)
      if (p.is_pointer) spaces[p.name] = MemSpace::Global;
    for (const auto& d : f.shared_decls) spaces[d.name] = MemSpace::Shared;
    GridIterators gi = find_grid_iterators(f);
    if (gi.uses_warp_sync) warp_width = gi.warp_width;
  } else {
    KernelModel m = load_model_file(args.input);
    log = run(inst, m);
    for (const auto& a : m.arrays) spaces[a.name] = a.space;
    warp_width = m.grid.warp_width;
  }
  OracleVerdict v = detect_races(log, spaces, warp_width);

  std::string text;
  if (args.format == "structured") {
    json j;
    j["verdict"] = v.race_found ? "RACE-FOUND" : "RACE-FREE";
    j["accesses"] = log.size();
    j["pairs"] = json::array();
    for (const auto& p : v.pairs) {
      json pj;
      auto one = [](const AccessLogEntry& e) {
        json a;
        a["array"] = e.array;
        a["cell"] = e.cell;
        a["kind"] = e.kind == AccessKind::Write ? "write" : "read";
        a["block"] = {e.block[0], e.block[1], e.block[2]};
        a["thread"] = {e.thread[0], e.thread[1], e.thread[2]};
        a["phase"] = e.phase;
        return a;
      };
      pj["first"] = one(p.first);
      pj["second"] = one(p.second);
      j["pairs"].push_back(pj);
    }
    text = j.dump(2) + "\n";
  } else {
    text = "oracle verdict: " + std::string(v.race_found ? "RACE-FOUND" : "RACE-FREE") + "\n";
    text += "accesses logged: " + std::to_string(log.size()) + "\n";
    for (const auto& p : v.pairs) {
      auto one = [](const AccessLogEntry& e) {
        std::string s = e.array + "[";
        for (size_t i = 0; i < e.cell.size(); ++i)
          s += (i ? ", " : "") + std::to_string(e.cell[i]);
        s += e.kind == AccessKind::Write ? "] write by " : "] read by ";
        s += "block(" + std::to_string(e.block[0]) + "," + std::to_string(e.block[1]) + "," +
             std::to_string(e.block[2]) + ") thread(" + std::to_string(e.thread[0]) + "," +
             std::to_string(e.thread[1]) + "," + std::to_string(e.thread[2]) + ") phase " +
             std::to_string(e.phase);
        return s;
      };
      text += "  " + one(p.first) + "  ~  " + one(p.second) + "\n";
    }
  }
  write_output(args, out, text);
  return v.race_found ? 1 : 0;
}

int cmd_dump(const CommonArgs& args, std::ostream& out) {
  KernelModel m = load_input(args);
  write_output(args, out, render_model_text(m));
  return 0;
}

int error_exit(const Error& e, std::ostream& err) {
  err << "error: " << e.what() << "\n";
  switch (e.kind()) {
  case ErrorKind::Io:
  case ErrorKind::SyntaxError:
  case ErrorKind::UnknownOpcode:
  case ErrorKind::SsaViolation:
  case ErrorKind::CsrInvalid:
  case ErrorKind::InvalidModel:
  case ErrorKind::UndeclaredParameter: return 3;
  default: return 4;
  }
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"raceset: static data-race and dependence checker for SIMT kernels"};
  app.require_subcommand(1);

  CommonArgs args;
  std::string instance_path;

  auto add_common = [&](CLI::App* sub, bool with_mode) {
    sub->add_option("input", args.input, "kernel model (.model) or mini-IR (.mir)")->required();
    sub->add_option("--params", args.params, "parameter values, name=value[,name=value...]");
    sub->add_option("--grid", args.grid, "launch extents bx,by,bz/tx,ty,tz");
    sub->add_option("--sections", args.sections,
                    "section labels for extraction, block:Label[,block:Label...]");
    sub->add_option("--out", args.out, "write the report to this path");
    sub->add_option("--format", args.format, "text|structured")
        ->check(CLI::IsMember({"text", "structured"}));
    sub->add_option("--box", args.box, "witness-search box half-width")
        ->check(CLI::PositiveNumber);
    if (with_mode)
      sub->add_option("--mode", args.mode, "race|dep")->check(CLI::IsMember({"race", "dep"}));
  };

  CLI::App* check = app.add_subcommand("check", "run the data-race / dependence analysis");
  add_common(check, true);
  CLI::App* emit = app.add_subcommand("emit-iscc", "emit the model as an ISCC script");
  add_common(emit, false);
  CLI::App* oracle = app.add_subcommand("oracle", "interpret a concrete instance and enumerate races");
  add_common(oracle, false);
  oracle->add_option("instance", instance_path, "concrete instance file")->required();
  CLI::App* dump = app.add_subcommand("dump-model", "print the recovered kernel model");
  add_common(dump, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (check->parsed()) return cmd_check(args, out);
    if (emit->parsed()) return cmd_emit(args, out);
    if (oracle->parsed()) return cmd_oracle(args, instance_path, out);
    if (dump->parsed()) return cmd_dump(args, out);
  } catch (const Error& e) {
    return error_exit(e, err);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 4;
  }
  return 4;
}

}  // namespace raceset
