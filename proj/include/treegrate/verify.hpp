#pragma once

// Differential verification of the integer path against the exact ensemble mean, the
// binary32 float path, and (optionally) the compiled emitted code.

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <limits>
#include <filesystem>
#include <fstream>
#include <istream>
#include <mutex>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "treegrate/codegen.hpp"
#include "treegrate/errors.hpp"
#include "treegrate/flint.hpp"
#include "treegrate/interp.hpp"
#include "treegrate/model_ir.hpp"
#include "treegrate/quantize.hpp"

namespace treegrate {

inline constexpr std::uint32_t kMissingBits = 0x7FC00000u;

// ---------------------------------------------------------------------------------------
// Deterministic randomness. Only the engine comes from the standard library; the
// distributions are spelled out so that sequences match across standard libraries.

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Stream `index` of `seed`, independent of how work is split across threads.
  static Rng substream(std::uint64_t seed, std::uint64_t index) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
    Rng rng(0);
    rng.engine_.seed(seq);
    return rng;
  }

  std::uint64_t next() { return engine_(); }

  // Uniform in [0, 1).
  double unit() { return static_cast<double>(next() >> 11) * 0x1p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }

  // Uniform in [0, bound).
  std::uint64_t below(std::uint64_t bound) { return next() % bound; }

  bool chance(double p) { return unit() < p; }

 private:
  std::mt19937_64 engine_;
};

// ---------------------------------------------------------------------------------------
// Synthetic ensembles

struct RandomEnsembleSpec {
  std::uint32_t num_features = 4;
  std::uint32_t num_classes = 2;
  std::uint32_t num_trees = 10;
  std::uint32_t max_depth = 4;
  float threshold_lo = -100.0f;
  float threshold_hi = 100.0f;
  double split_probability = 0.85;  // below the root; the root always splits
};

namespace detail {

inline std::vector<double> random_probs(Rng& rng, std::uint32_t classes) {
  std::vector<double> w(classes);
  double sum = 0.0;
  for (auto& x : w) {
    x = 1.0 - rng.unit();  // (0, 1]
    sum += x;
  }
  for (auto& x : w) x /= sum;
  return w;
}

inline std::uint32_t grow(Tree& tree, Rng& rng, RandomEnsembleSpec const& spec, std::uint32_t depth) {
  auto const index = static_cast<std::uint32_t>(tree.nodes.size());
  bool const split = depth < spec.max_depth && (depth == 0 || rng.chance(spec.split_probability));
  if (!split) {
    tree.nodes.emplace_back(Leaf{random_probs(rng, spec.num_classes)});
    return index;
  }
  Branch b;
  b.feature = static_cast<std::uint32_t>(rng.below(spec.num_features));
  b.threshold = Threshold::from_float(
      static_cast<float>(rng.uniform(spec.threshold_lo, spec.threshold_hi)));
  b.op = rng.chance(0.5) ? CompareOp::kLE : CompareOp::kLT;
  b.default_left = rng.chance(0.5);
  tree.nodes.emplace_back(b);
  b.left = grow(tree, rng, spec, depth + 1);
  b.right = grow(tree, rng, spec, depth + 1);
  tree.nodes[index] = b;
  return index;
}

}  // namespace detail

inline Ensemble random_ensemble(RandomEnsembleSpec const& spec, std::uint64_t seed) {
  if (spec.num_features == 0 || spec.num_classes == 0 || spec.num_trees == 0) {
    throw DomainError("random_ensemble: feature, class and tree counts must be at least 1");
  }
  Rng rng(seed);
  Ensemble e;
  e.model_id = fmt::format("random-f{}-c{}-t{}-d{}-s{}", spec.num_features, spec.num_classes,
                           spec.num_trees, spec.max_depth, seed);
  e.num_features = spec.num_features;
  e.num_classes = spec.num_classes;
  e.trees.resize(spec.num_trees);
  for (auto& tree : e.trees) tree.root = detail::grow(tree, rng, spec, 0);
  return e;
}

// ---------------------------------------------------------------------------------------
// Input vectors

// Uniform feature values over [lo, hi]; when the range is absent it is derived from the
// model's thresholds. A `boundary_rate` share of slots take an exact threshold of that
// feature and a `nan_rate` share are missing.
struct UniformRange {
  std::optional<float> lo;
  std::optional<float> hi;
  double nan_rate = 0.01;
  double boundary_rate = 0.05;
};

struct FromFile {
  std::string path;
};

using InputSource = std::variant<UniformRange, FromFile>;

// One vector per line: whitespace-separated decimal floats, `nan` for missing.
// Blank lines are skipped.
inline std::vector<FeatureVector> read_vectors(std::istream& in) {
  std::vector<FeatureVector> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream tokens(line);
    FeatureVector x;
    std::string tok;
    while (tokens >> tok) {
      if (tok == "nan" || tok == "NaN" || tok == "NAN") {
        x.push_back(kMissingBits);
        continue;
      }
      float v = 0.0f;
      auto const* first = tok.data() + (tok[0] == '+' ? 1 : 0);
      auto const res = std::from_chars(first, tok.data() + tok.size(), v);
      if (res.ec == std::errc::result_out_of_range) {
        // from_chars leaves v untouched on overflow/underflow; strtof rounds correctly.
        v = std::strtof(tok.c_str(), nullptr);
      } else if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size()) {
        throw InputError(fmt::format("line {}: \"{}\" is not a number", line_no, tok));
      }
      x.push_back(is_nan_bits(float_bits(v)) ? kMissingBits : float_bits(v));
    }
    if (!x.empty()) out.push_back(std::move(x));
  }
  return out;
}

inline std::vector<FeatureVector> read_vectors_file(std::string const& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open input vectors \"" + path + "\"");
  return read_vectors(in);
}

class InputGenerator {
 public:
  InputGenerator(Ensemble const& e, UniformRange range) : range_(std::move(range)), width_(e.num_features) {
    thresholds_.resize(e.num_features);
    float tmin = 0.0f, tmax = 0.0f;
    bool any = false;
    for (auto const& tree : e.trees) {
      for (auto const& node : tree.nodes) {
        if (auto const* b = std::get_if<Branch>(&node)) {
          float const t = b->threshold.value();
          thresholds_[b->feature].push_back(b->threshold.bits());
          tmin = any ? std::min(tmin, t) : t;
          tmax = any ? std::max(tmax, t) : t;
          any = true;
        }
      }
    }
    double const pad = 0.25 * (double{tmax} - double{tmin}) + 1.0;
    double const limit = std::numeric_limits<float>::max();
    lo_ = range_.lo.value_or(static_cast<float>(std::max(double{tmin} - pad, -limit)));
    hi_ = range_.hi.value_or(static_cast<float>(std::min(double{tmax} + pad, limit)));
    if (!(lo_ <= hi_)) throw InputError("input range is empty");
  }

  float lo() const { return lo_; }
  float hi() const { return hi_; }

  FeatureVector sample(std::uint64_t seed, std::uint64_t index) const {
    auto rng = Rng::substream(seed, index);
    FeatureVector x(width_);
    for (std::uint32_t f = 0; f < width_; ++f) {
      if (rng.chance(range_.nan_rate)) {
        x[f] = kMissingBits;
      } else if (!thresholds_[f].empty() && rng.chance(range_.boundary_rate)) {
        x[f] = thresholds_[f][rng.below(thresholds_[f].size())];
      } else {
        auto v = static_cast<float>(rng.uniform(lo_, hi_));
        v = std::clamp(v, lo_, hi_);
        x[f] = float_bits(v == 0.0f ? 0.0f : v);
      }
    }
    return x;
  }

 private:
  UniformRange range_;
  std::uint32_t width_;
  float lo_ = 0.0f;
  float hi_ = 0.0f;
  std::vector<std::vector<std::uint32_t>> thresholds_;
};

// ---------------------------------------------------------------------------------------
// Reports

struct CompiledReport {
  std::string status;  // "ok", "skipped"
  std::optional<std::uint64_t> compiled_diff;  // mismatching accumulators
  std::uint64_t samples = 0;
  std::string mode;
  std::string message;
};

struct VerifyReport {
  std::uint64_t samples = 0;
  std::uint32_t num_trees = 0;
  std::uint32_t num_classes = 0;
  // max / mean over (sample, class) of |integer-path probability - exact mean|
  double max_abs_prob_diff = 0.0;
  double mean_abs_prob_diff = 0.0;
  double bound = 0.0;  // n / 2^32
  Rational bound_exact;
  // Exact checks of 0 <= exact_mean - int_mean <= n / 2^32 (non-strict: the clamp for p = 1
  // at power-of-two n loses exactly one unit) and of the strict form.
  std::uint64_t bound_violations = 0;
  bool strict_bound_holds = true;
  // Integer argmax vs exact-mean argmax.
  std::uint64_t argmax_mismatches = 0;
  std::uint64_t near_tie_mismatches = 0;  // exact top-2 margin < 2n / 2^32
  std::uint64_t hard_mismatches = 0;
  // Informational: integer argmax vs binary32 float argmax.
  std::uint64_t float_int_argmax_mismatches = 0;
  std::optional<CompiledReport> compiled;

  bool passed() const { return bound_violations == 0 && hard_mismatches == 0; }
};

inline nlohmann::ordered_json to_json(VerifyReport const& r) {
  nlohmann::ordered_json j;
  j["samples"] = r.samples;
  j["num_trees"] = r.num_trees;
  j["num_classes"] = r.num_classes;
  j["max_abs_prob_diff"] = r.max_abs_prob_diff;
  j["mean_abs_prob_diff"] = r.mean_abs_prob_diff;
  j["bound"] = r.bound;
  j["bound_rational"] = fmt::format("{}/{}", r.bound_exact.num, r.bound_exact.den);
  j["bound_violations"] = r.bound_violations;
  j["strict_bound_holds"] = r.strict_bound_holds;
  j["argmax_mismatches"] = r.argmax_mismatches;
  j["near_tie_mismatches"] = r.near_tie_mismatches;
  j["hard_mismatches"] = r.hard_mismatches;
  j["float_int_argmax_mismatches"] = r.float_int_argmax_mismatches;
  if (r.compiled) {
    nlohmann::ordered_json c;
    c["status"] = r.compiled->status;
    c["mode"] = r.compiled->mode;
    c["samples"] = r.compiled->samples;
    if (r.compiled->compiled_diff) c["compiled_diff"] = *r.compiled->compiled_diff;
    else c["compiled_diff"] = nullptr;
    if (!r.compiled->message.empty()) c["message"] = r.compiled->message;
    j["compiled"] = std::move(c);
  }
  j["passed"] = r.passed();
  return j;
}

// ---------------------------------------------------------------------------------------
// Interpreter-level differential

namespace detail {

// |num| / (den * 2^pow2) as a double, keeping the top 64 bits of num.
inline double scaled_ratio(BigInt num, std::uint64_t den, int pow2) {
  if (num < 0) num = -num;
  if (num == 0) return 0.0;
  auto const msb = static_cast<int>(boost::multiprecision::msb(num));
  int const drop = std::max(0, msb - 62);
  num >>= drop;
  return std::ldexp(num.convert_to<double>() / static_cast<double>(den), drop - pow2);
}

struct SampleOutcome {
  double max_diff = 0.0;
  double sum_diff = 0.0;
  bool bound_violation = false;
  bool strict_violation = false;
  bool argmax_mismatch = false;
  bool near_tie = false;
  bool float_int_mismatch = false;
};

class Checker {
 public:
  Checker(Ensemble const& e, QuantizedEnsemble const& q) : e_(e), q_(q) {
    n_ = static_cast<std::uint32_t>(e.num_trees());
    acc_scale_ = BigInt(n_) << ExactSum::kFracBits;                  // acc * n * 2^F
    strict_limit_ = BigInt(n_) * BigInt(n_) << ExactSum::kFracBits;  // n^2 * 2^F
    near_tie_limit_ = strict_limit_ * 2;
  }

  SampleOutcome check(FeatureVector const& x) const {
    auto const fp = predict_float(e_, x);
    auto const ip = predict_int(q_, x);
    SampleOutcome out;

    // exact_mean_c - acc_c / 2^32 == (S_c * 2^32 - acc_c * n * 2^F) / (n * 2^(F + 32))
    for (std::size_t c = 0; c < e_.num_classes; ++c) {
      BigInt const d = (fp.acc.exact[c].scaled() << 32) - BigInt(ip.acc[c]) * acc_scale_;
      if (d < 0 || d > strict_limit_) out.bound_violation = true;
      if (d < 0 || d >= strict_limit_) out.strict_violation = true;
      double const diff = scaled_ratio(d, n_, ExactSum::kFracBits + 32);
      out.max_diff = std::max(out.max_diff, diff);
      out.sum_diff += diff;
    }

    std::size_t top = 0;
    for (std::size_t c = 1; c < e_.num_classes; ++c) {
      if (fp.acc.exact[top] < fp.acc.exact[c]) top = c;
    }
    if (ip.argmax != top) {
      out.argmax_mismatch = true;
      std::size_t second = top == 0 ? 1 : 0;
      for (std::size_t c = 0; c < e_.num_classes; ++c) {
        if (c != top && fp.acc.exact[second] < fp.acc.exact[c]) second = c;
      }
      BigInt const margin = (fp.acc.exact[top].scaled() - fp.acc.exact[second].scaled()) << 32;
      out.near_tie = margin < near_tie_limit_;
    }
    out.float_int_mismatch = fp.argmax != ip.argmax;
    return out;
  }

 private:
  Ensemble const& e_;
  QuantizedEnsemble const& q_;
  std::uint32_t n_ = 0;
  BigInt acc_scale_;
  BigInt strict_limit_;
  BigInt near_tie_limit_;
};

template <typename Fn>
void parallel_for(std::size_t count, unsigned jobs, Fn&& fn) {
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
  if (jobs == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  for (unsigned j = 0; j < jobs; ++j) {
    pool.emplace_back([&] {
      try {
        for (std::size_t i; (i = next.fetch_add(1)) < count;) fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next = count;
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace detail

struct DifferentialOptions {
  std::uint64_t samples = 10000;
  std::uint64_t seed = 0;
  InputSource input = UniformRange{};
  unsigned jobs = 1;
};

// The vectors a differential run evaluates: from the file, or `samples` generated ones.
inline std::vector<FeatureVector> differential_inputs(Ensemble const& e, DifferentialOptions const& opt) {
  std::vector<FeatureVector> xs;
  if (auto const* file = std::get_if<FromFile>(&opt.input)) {
    xs = read_vectors_file(file->path);
    for (std::size_t i = 0; i < xs.size(); ++i) {
      if (xs[i].size() != e.num_features) {
        throw InputError(fmt::format("vector {} has {} values, model expects {}", i + 1,
                                     xs[i].size(), e.num_features));
      }
    }
  } else {
    if (opt.samples == 0) throw InputError("sample count must be at least 1");
    InputGenerator gen(e, std::get<UniformRange>(opt.input));
    xs.reserve(opt.samples);
    for (std::uint64_t i = 0; i < opt.samples; ++i) xs.push_back(gen.sample(opt.seed, i));
  }
  return xs;
}

inline VerifyReport run_differential_on(Ensemble const& e, std::vector<FeatureVector> const& xs,
                                        unsigned jobs = 1) {
  check_valid(e);
  auto const q = quantize_ensemble(e).model;
  detail::Checker const checker(e, q);

  std::vector<detail::SampleOutcome> outcomes(xs.size());
  detail::parallel_for(xs.size(), jobs, [&](std::size_t i) { outcomes[i] = checker.check(xs[i]); });

  VerifyReport r;
  r.samples = xs.size();
  r.num_trees = static_cast<std::uint32_t>(e.num_trees());
  r.num_classes = e.num_classes;
  r.bound_exact = error_bound(r.num_trees);
  r.bound = r.bound_exact.to_double();
  double total = 0.0;
  for (auto const& o : outcomes) {
    r.max_abs_prob_diff = std::max(r.max_abs_prob_diff, o.max_diff);
    total += o.sum_diff;
    r.bound_violations += o.bound_violation;
    if (o.strict_violation) r.strict_bound_holds = false;
    r.argmax_mismatches += o.argmax_mismatch;
    r.near_tie_mismatches += o.argmax_mismatch && o.near_tie;
    r.hard_mismatches += o.argmax_mismatch && !o.near_tie;
    r.float_int_argmax_mismatches += o.float_int_mismatch;
  }
  if (!xs.empty()) r.mean_abs_prob_diff = total / static_cast<double>(xs.size() * e.num_classes);
  return r;
}

inline VerifyReport run_differential(Ensemble const& e, DifferentialOptions const& opt) {
  return run_differential_on(e, differential_inputs(e, opt), opt.jobs);
}

// ---------------------------------------------------------------------------------------
// Compiled differential

namespace detail {

inline std::string shell_quote(std::string const& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') out += "'\\''";
    else out += c;
  }
  return out + "'";
}

inline std::vector<std::string> split_command(std::string const& cmd) {
  std::istringstream in(cmd);
  std::vector<std::string> out;
  for (std::string tok; in >> tok;) out.push_back(tok);
  return out;
}

// Whether the first word of `command` names an executable file.
inline bool toolchain_available(std::string const& command) {
  auto const words = split_command(command);
  if (words.empty()) return false;
  auto const& exe = words.front();
  if (exe.find('/') != std::string::npos) return ::access(exe.c_str(), X_OK) == 0;
  char const* path = std::getenv("PATH");
  if (!path) return false;
  std::istringstream dirs(path);
  for (std::string dir; std::getline(dirs, dir, ':');) {
    auto const candidate = (dir.empty() ? std::string(".") : dir) + "/" + exe;
    if (::access(candidate.c_str(), X_OK) == 0 && !std::filesystem::is_directory(candidate)) {
      return true;
    }
  }
  return false;
}

class TempDir {
 public:
  TempDir() {
    auto pattern = (std::filesystem::temp_directory_path() / "treegrate-XXXXXX").string();
    if (!::mkdtemp(pattern.data())) throw Error("cannot create temporary directory");
    path_ = pattern;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(TempDir const&) = delete;
  TempDir& operator=(TempDir const&) = delete;

  std::filesystem::path const& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(std::filesystem::path const& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(std::filesystem::path const& p, std::string const& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
  if (!out) throw Error("cannot write " + p.string());
}

}  // namespace detail

// Parses harness output: one line per vector, `classes` base-10 values each.
inline std::vector<std::vector<std::string>> parse_harness_output(std::string const& text,
                                                                 std::size_t vectors,
                                                                 std::size_t classes) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    std::istringstream tokens(line);
    std::vector<std::string> row;
    for (std::string tok; tokens >> tok;) row.push_back(tok);
    if (row.size() != classes) {
      throw HarnessError(fmt::format("harness line {} has {} values, expected {}", rows.size() + 1,
                                     row.size(), classes));
    }
    rows.push_back(std::move(row));
  }
  if (rows.size() != vectors) {
    throw HarnessError(fmt::format("harness printed {} lines, expected {}", rows.size(), vectors));
  }
  return rows;
}

// Compiles the emitted unit plus a harness over `xs` with `toolchain`, runs it, and counts
// accumulators that differ bitwise from the interpreter. Returns a "skipped" report when
// the toolchain cannot be found.
inline CompiledReport compile_and_compare(Ensemble const& e, EmitConfig const& cfg,
                                          std::string const& toolchain,
                                          std::vector<FeatureVector> const& xs) {
  CompiledReport report;
  report.mode = std::string(to_string(cfg.mode));
  report.samples = xs.size();
  if (!detail::toolchain_available(toolchain)) {
    report.status = "skipped";
    report.message = "toolchain \"" + toolchain + "\" not found";
    return report;
  }

  auto const unit = emit(e, cfg);
  auto const harness = emit_harness(e, cfg, xs);
  detail::TempDir dir;
  auto const model_c = dir.path() / "model.c";
  auto const harness_c = dir.path() / "harness.c";
  auto const exe = dir.path() / "harness";
  auto const log = dir.path() / "cc.log";
  auto const out = dir.path() / "out.txt";
  detail::write_file(model_c, unit.source);
  detail::write_file(harness_c, harness);

  auto const compile = fmt::format("{} -std=c99 -O2 -o {} {} {} > {} 2>&1", toolchain,
                                   detail::shell_quote(exe.string()), detail::shell_quote(model_c.string()),
                                   detail::shell_quote(harness_c.string()), detail::shell_quote(log.string()));
  if (std::system(compile.c_str()) != 0) {
    throw ToolchainError("compiling the emitted unit failed", detail::slurp(log));
  }
  auto const run = fmt::format("{} > {}", detail::shell_quote(exe.string()), detail::shell_quote(out.string()));
  if (std::system(run.c_str()) != 0) throw HarnessError("harness exited with an error");

  auto const rows = parse_harness_output(detail::slurp(out), xs.size(), e.num_classes);
  std::uint64_t diff = 0;
  if (cfg.mode == EmitMode::kInteger) {
    auto const q = quantize_ensemble(e).model;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      auto const ip = predict_int(q, xs[i]);
      for (std::size_t c = 0; c < e.num_classes; ++c) {
        std::uint64_t v = 0;
        auto const& tok = rows[i][c];
        auto const res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size() || v > 0xFFFFFFFFull) {
          throw HarnessError("harness printed \"" + tok + "\", expected a 32-bit unsigned value");
        }
        diff += v != ip.acc[c];
      }
    }
  } else {
    for (std::size_t i = 0; i < xs.size(); ++i) {
      auto const fp = predict_float(e, xs[i]);
      for (std::size_t c = 0; c < e.num_classes; ++c) {
        auto const& tok = rows[i][c];
        char* end = nullptr;
        float const v = std::strtof(tok.c_str(), &end);
        if (end != tok.c_str() + tok.size()) {
          throw HarnessError("harness printed \"" + tok + "\", expected a float");
        }
        diff += float_bits(v) != float_bits(fp.acc.sums[c]);
      }
    }
  }
  report.status = "ok";
  report.compiled_diff = diff;
  return report;
}

inline VerifyReport run_compiled_differential(Ensemble const& e, EmitConfig const& cfg,
                                              std::string const& toolchain,
                                              DifferentialOptions opt) {
  // Raw-bits comparisons are only meaningful on the declared non-negative domain.
  if (cfg.nonneg_fast) {
    if (auto* range = std::get_if<UniformRange>(&opt.input)) {
      range->lo = std::max(range->lo.value_or(0.0f), 0.0f);
    }
  }
  auto const xs = differential_inputs(e, opt);
  auto report = run_differential_on(e, xs, opt.jobs);
  report.compiled = compile_and_compare(e, cfg, toolchain, xs);
  return report;
}

}  // namespace treegrate
