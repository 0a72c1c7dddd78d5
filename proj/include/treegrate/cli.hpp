#pragma once

// Command-line front end: compile, predict, verify, inspect.
//
// Exit codes: 0 success, 1 verification failure, 2 input/model error, 3 I/O or
// environment error. Payloads go to `out`, diagnostics to `err`.

#include <unistd.h>

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "treegrate/codegen.hpp"
#include "treegrate/errors.hpp"
#include "treegrate/interp.hpp"
#include "treegrate/model_ir.hpp"
#include "treegrate/quantize.hpp"
#include "treegrate/verify.hpp"

namespace treegrate::cli {

enum ExitCode : int { kOk = 0, kVerifyFailed = 1, kInputError = 2, kIoError = 3 };

// Missing or unreadable file.
class IoError : public Error {
 public:
  using Error::Error;
};

namespace detail {

inline std::string read_file(std::string const& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read \"" + path + "\"");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("error reading \"" + path + "\"");
  return ss.str();
}

// Writes via a temporary file in the destination directory and renames it into place.
inline void write_atomic(std::string const& path, std::string const& text) {
  namespace fs = std::filesystem;
  fs::path const target(path);
  auto const dir = target.has_parent_path() ? target.parent_path() : fs::path(".");
  auto pattern = (dir / ("." + target.filename().string() + ".XXXXXX")).string();
  int const fd = ::mkstemp(pattern.data());
  if (fd < 0) throw IoError("cannot create a temporary file next to \"" + path + "\"");
  ::close(fd);
  {
    std::ofstream out(pattern, std::ios::binary | std::ios::trunc);
    out << text;
    out.flush();
    if (!out) {
      std::error_code ec;
      fs::remove(pattern, ec);
      throw IoError("cannot write \"" + path + "\"");
    }
  }
  std::error_code ec;
  fs::rename(pattern, target, ec);
  if (ec) {
    fs::remove(pattern, ec);
    throw IoError("cannot write \"" + path + "\"");
  }
}

inline Ensemble load_model_file(std::string const& path) {
  auto const bytes = read_file(path);
  try {
    return load_model(bytes);
  } catch (Error const& e) {
    throw ModelError(path + ": " + e.what());
  }
}

inline std::string shortest(double v) {
  char buf[32];
  auto const res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline void print_precision_warnings(PrecisionReport const& report, std::ostream& err) {
  if (report.warn_tree_count) {
    err << fmt::format(
        "warning: {} trees exceeds the {}-tree precision crossover: the fixed-point resolution "
        "n/2^32 = {} is coarser than binary32's 2^-24\n",
        report.n, kMaxTreesForFloatParity, shortest(report.bound.to_double()));
  }
  if (report.low_prob_leaves > 0) {
    err << fmt::format(
        "warning: {} leaf probabilities are below 2^-10; binary32 would represent them more "
        "precisely than the fixed-point resolution\n",
        report.low_prob_leaves);
  }
}

struct EmitOptions {
  std::string mode = "integer";
  bool nonneg_fast = false;
  std::optional<float> feature_min;
  std::string function_name = "predict";
  bool argmax_helper = false;
};

inline void add_emit_options(CLI::App& cmd, EmitOptions& o) {
  cmd.add_option("--mode", o.mode, "Code-generation mode")
      ->check(CLI::IsMember({"float", "flint", "integer"}));
  cmd.add_flag("--nonneg-fast", o.nonneg_fast,
               "Compare raw feature words (needs non-negative thresholds and --feature-min)");
  cmd.add_option("--feature-min", o.feature_min, "Declared lower bound of every feature value");
  cmd.add_option("--function-name", o.function_name, "Name of the emitted entry point");
  cmd.add_flag("--argmax-helper", o.argmax_helper, "Also emit <name>_argmax()");
}

inline EmitConfig make_emit_config(Ensemble const& e, EmitOptions const& o) {
  EmitConfig cfg;
  cfg.mode = *parse_emit_mode(o.mode);
  cfg.nonneg_fast = o.nonneg_fast;
  if (o.feature_min) cfg.feature_min = std::vector<float>(e.num_features, *o.feature_min);
  cfg.function_name = o.function_name;
  cfg.emit_argmax_helper = o.argmax_helper;
  return cfg;
}

}  // namespace detail

struct CompileArgs {
  std::string model;
  std::string output;
  detail::EmitOptions emit;
  std::optional<std::string> harness_vectors;
  std::uint64_t replications = 1;
};

inline int cmd_compile(CompileArgs const& a, std::ostream& out, std::ostream& err) {
  (void)out;
  auto const e = detail::load_model_file(a.model);
  auto cfg = detail::make_emit_config(e, a.emit);
  cfg.emit_test_harness = a.harness_vectors.has_value();
  detail::print_precision_warnings(precision_report(e), err);

  auto const unit = emit(e, cfg);
  std::optional<std::string> harness;
  if (cfg.emit_test_harness) {
    auto const xs = read_vectors_file(*a.harness_vectors);
    harness = emit_harness(e, cfg, xs, a.replications);
  }
  detail::write_atomic(a.output, unit.source);
  if (harness) {
    std::filesystem::path p(a.output);
    auto const harness_path = (p.parent_path() / (p.stem().string() + "_harness.c")).string();
    detail::write_atomic(harness_path, *harness);
    err << "wrote " << harness_path << "\n";
  }
  err << fmt::format("wrote {} ({} mode, {} trees, digest {})\n", a.output, to_string(cfg.mode),
                     unit.manifest.num_trees, unit.manifest.digest);
  return kOk;
}

struct PredictArgs {
  std::string model;
  std::string vectors;
  std::string mode = "integer";
};

// One line per vector: class probabilities, a tab, and the argmax class.
inline int cmd_predict(PredictArgs const& a, std::ostream& out, std::ostream& err) {
  (void)err;
  auto const e = detail::load_model_file(a.model);
  std::ifstream in(a.vectors);
  if (!in) throw IoError("cannot read \"" + a.vectors + "\"");
  auto const xs = read_vectors(in);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (xs[i].size() != e.num_features) {
      throw InputError(fmt::format("vector {} has {} values, model expects {}", i + 1,
                                   xs[i].size(), e.num_features));
    }
  }

  std::optional<QuantizedEnsemble> q;
  if (a.mode == "integer") q = quantize_ensemble(e).model;
  for (auto const& x : xs) {
    std::vector<double> probs;
    std::size_t best;
    if (q) {
      auto const p = predict_int(*q, x);
      probs = probabilities_from_int(p.acc);
      best = p.argmax;
    } else {
      auto const p = predict_float(e, x);
      probs = p.probabilities(e.num_trees());
      best = p.argmax;
    }
    std::string line;
    for (std::size_t c = 0; c < probs.size(); ++c) line += (c ? " " : "") + detail::shortest(probs[c]);
    out << line << '\t' << best << '\n';
  }
  return kOk;
}

struct VerifyArgs {
  std::string model;
  std::uint64_t samples = 10000;
  std::uint64_t seed = 0;
  std::optional<std::string> cc;
  unsigned jobs = 1;
  std::optional<std::string> input;
  std::optional<float> lo;
  std::optional<float> hi;
  double nan_rate = 0.01;
  detail::EmitOptions emit;
};

inline int cmd_verify(VerifyArgs const& a, std::ostream& out, std::ostream& err) {
  auto const e = detail::load_model_file(a.model);
  DifferentialOptions opt;
  opt.samples = a.samples;
  opt.seed = a.seed;
  opt.jobs = a.jobs;
  if (a.input) {
    opt.input = FromFile{*a.input};
  } else {
    UniformRange range;
    range.lo = a.lo;
    range.hi = a.hi;
    range.nan_rate = a.nan_rate;
    opt.input = range;
  }

  VerifyReport report;
  if (a.cc) {
    auto const cfg = detail::make_emit_config(e, a.emit);
    try {
      report = run_compiled_differential(e, cfg, *a.cc, opt);
    } catch (ToolchainError const& ex) {
      err << "error: " << ex.what() << "\n" << ex.diagnostics();
      return kIoError;
    }
    if (report.compiled->status == "skipped") {
      err << "warning: compiled check skipped: " << report.compiled->message << "\n";
    }
  } else {
    report = run_differential(e, opt);
  }
  out << to_json(report).dump(2) << "\n";

  bool ok = report.passed();
  if (report.compiled && report.compiled->compiled_diff && *report.compiled->compiled_diff != 0) {
    ok = false;
  }
  if (!ok) err << "verification failed\n";
  return ok ? kOk : kVerifyFailed;
}

struct InspectArgs {
  std::string model;
};

inline int cmd_inspect(InspectArgs const& a, std::ostream& out, std::ostream& err) {
  (void)err;
  auto const e = detail::load_model_file(a.model);
  nlohmann::ordered_json j;
  j["model_id"] = e.model_id;
  j["num_trees"] = e.num_trees();
  j["num_features"] = e.num_features;
  j["num_classes"] = e.num_classes;
  j["used_features"] = used_features(e).size();

  std::size_t nodes = 0, leaves = 0, min_depth = SIZE_MAX, max_depth = 0;
  std::map<std::size_t, std::size_t> histogram;
  std::optional<float> tmin, tmax;
  for (auto const& tree : e.trees) {
    auto const d = tree_depth(tree);
    ++histogram[d];
    min_depth = std::min(min_depth, d);
    max_depth = std::max(max_depth, d);
    nodes += tree.nodes.size();
    for (auto const& node : tree.nodes) {
      if (auto const* b = std::get_if<Branch>(&node)) {
        float const t = b->threshold.value();
        tmin = tmin ? std::min(*tmin, t) : t;
        tmax = tmax ? std::max(*tmax, t) : t;
      } else {
        ++leaves;
      }
    }
  }
  nlohmann::ordered_json depth;
  depth["min"] = min_depth;
  depth["max"] = max_depth;
  auto hist = nlohmann::ordered_json::object();
  for (auto const& [d, count] : histogram) hist[std::to_string(d)] = count;
  depth["histogram"] = std::move(hist);
  j["depth"] = std::move(depth);
  j["nodes"] = nodes;
  j["leaves"] = leaves;
  if (tmin) {
    j["threshold_range"] = {{"min", *tmin}, {"max", *tmax}};
  } else {
    j["threshold_range"] = nullptr;
  }

  std::vector<float> zeros(e.num_features, 0.0f);
  bool const eligible = check_nonneg(e, std::span<float const>(zeros));
  j["nonneg_fast_eligible"] = eligible;
  j["nonneg_fast_note"] = eligible
                              ? "thresholds are non-negative; usable with --nonneg-fast when every "
                                "feature is declared non-negative via --feature-min"
                              : "ineligible: negative thresholds present";

  auto const report = precision_report(e);
  nlohmann::ordered_json precision;
  precision["n"] = report.n;
  precision["bound"] = report.bound.to_double();
  precision["bound_rational"] = fmt::format("{}/{}", report.bound.num, report.bound.den);
  precision["warn_tree_count"] = report.warn_tree_count;
  precision["low_prob_leaves"] = report.low_prob_leaves;
  j["precision"] = std::move(precision);
  out << j.dump(2) << "\n";
  return kOk;
}

// Parses argv and dispatches to a subcommand.
inline int run(int argc, char const* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"treegrate: compile tree-ensemble classifiers into integer-only C", "treegrate"};
  app.require_subcommand(1);

  CompileArgs compile;
  auto* c = app.add_subcommand("compile", "Emit a standalone C99 predictor");
  c->add_option("model", compile.model, "Canonical model JSON")->required();
  c->add_option("-o,--output", compile.output, "Output C file")->required();
  detail::add_emit_options(*c, compile.emit);
  c->add_option("--harness", compile.harness_vectors,
                "Also write <output>_harness.c running these input vectors");
  c->add_option("--replications", compile.replications, "Harness calls per vector")
      ->check(CLI::PositiveNumber);

  PredictArgs predict;
  auto* p = app.add_subcommand("predict", "Evaluate a model on input vectors");
  p->add_option("model", predict.model, "Canonical model JSON")->required();
  p->add_option("vectors", predict.vectors, "Input vectors, one per line")->required();
  p->add_option("--mode", predict.mode, "Evaluation semantics")
      ->check(CLI::IsMember({"float", "flint", "integer"}));

  VerifyArgs verify;
  auto* v = app.add_subcommand("verify", "Differential check of the integer path");
  v->add_option("model", verify.model, "Canonical model JSON")->required();
  v->add_option("--samples", verify.samples, "Random input vectors")->check(CLI::PositiveNumber);
  v->add_option("--seed", verify.seed, "Seed for input generation");
  v->add_option("--cc", verify.cc, "C compiler command for the compiled check");
  v->add_option("--jobs", verify.jobs, "Worker threads")->check(CLI::PositiveNumber);
  v->add_option("--input", verify.input, "Read input vectors from a file instead");
  v->add_option("--lo", verify.lo, "Lower bound of generated feature values");
  v->add_option("--hi", verify.hi, "Upper bound of generated feature values");
  v->add_option("--nan-rate", verify.nan_rate, "Share of missing feature values")
      ->check(CLI::Range(0.0, 1.0));
  detail::add_emit_options(*v, verify.emit);

  InspectArgs inspect;
  auto* i = app.add_subcommand("inspect", "Summarize a model");
  i->add_option("model", inspect.model, "Canonical model JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (CLI::CallForHelp const&) {
    out << app.help();
    return kOk;
  } catch (CLI::ParseError const& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  }

  try {
    if (c->parsed()) return cmd_compile(compile, out, err);
    if (p->parsed()) return cmd_predict(predict, out, err);
    if (v->parsed()) return cmd_verify(verify, out, err);
    if (i->parsed()) return cmd_inspect(inspect, out, err);
  } catch (IoError const& e) {
    err << "error: " << e.what() << "\n";
    return kIoError;
  } catch (HarnessError const& e) {
    err << "error: " << e.what() << "\n";
    return kIoError;
  } catch (Error const& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  }
  return kInputError;
}

}  // namespace treegrate::cli
