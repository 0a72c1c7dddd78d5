#pragma once

// C99 code generation: one nested if-else block per tree inside a single function.
//
//   float    void f(const float features[F], float result[C])      float compares, float leaves
//   flint    void f(const float features[F], float result[C])      integer compares, float leaves
//   integer  void f(const uint32_t features[F], uint32_t result[C]) integer compares, integer leaves
//
// Feature words are binary32 bit patterns and NaN marks a missing value. `result` is
// accumulated into and must be zeroed by the caller. The emitted unit includes only
// <stdint.h>, has no globals or static state, and in integer mode contains no
// floating-point type or literal.

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>

#include "treegrate/errors.hpp"
#include "treegrate/flint.hpp"
#include "treegrate/model_ir.hpp"
#include "treegrate/quantize.hpp"

namespace treegrate {

inline constexpr std::string_view kEmitFormatVersion = "treegrate-c/1";

enum class EmitMode : std::uint8_t { kFloat, kFlint, kInteger };

inline std::string_view to_string(EmitMode mode) {
  switch (mode) {
    case EmitMode::kFloat: return "float";
    case EmitMode::kFlint: return "flint";
    case EmitMode::kInteger: return "integer";
  }
  return "?";
}

inline std::optional<EmitMode> parse_emit_mode(std::string_view s) {
  if (s == "float") return EmitMode::kFloat;
  if (s == "flint") return EmitMode::kFlint;
  if (s == "integer") return EmitMode::kInteger;
  return std::nullopt;
}

struct EmitConfig {
  EmitMode mode = EmitMode::kInteger;
  // Compare raw feature words against raw threshold bits. Only order-correct when every
  // threshold and every feature value is non-negative, so it requires `feature_min`.
  bool nonneg_fast = false;
  // Declared per-feature lower bounds, one per model feature.
  std::optional<std::vector<float>> feature_min;
  std::string function_name = "predict";
  bool emit_argmax_helper = false;
  // Consumed by callers that also write the emit_harness companion file.
  bool emit_test_harness = false;
};

struct EmitManifest {
  EmitMode mode = EmitMode::kInteger;
  std::uint32_t num_trees = 0;
  std::uint32_t num_features = 0;
  std::uint32_t num_classes = 0;
  std::string digest;
};

struct EmittedUnit {
  std::string source;
  EmitManifest manifest;
};

// True iff the raw-bits comparison form is provably order-correct: every threshold is
// non-negative and every feature has a declared minimum >= +0.0. -0.0 is rejected as a
// minimum because its bit pattern sorts above every positive value.
inline bool check_nonneg(Ensemble const& e, std::optional<std::span<float const>> feature_min) {
  if (!feature_min || feature_min->size() != e.num_features) return false;
  for (float m : *feature_min) {
    if (float_bits(m) & kSignBit || is_nan_bits(float_bits(m))) return false;
  }
  for (auto const& tree : e.trees) {
    for (auto const& node : tree.nodes) {
      if (auto const* b = std::get_if<Branch>(&node)) {
        if (b->threshold.bits() & kSignBit) return false;
      }
    }
  }
  return true;
}

namespace detail {

inline std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline bool is_c_identifier(std::string_view name) {
  static constexpr std::array<std::string_view, 37> kKeywords = {
      "auto",     "break",    "case",     "char",   "const",    "continue", "default",  "do",
      "double",   "else",     "enum",     "extern", "float",    "for",      "goto",     "if",
      "inline",   "int",      "long",     "register", "restrict", "return", "short",    "signed",
      "sizeof",   "static",   "struct",   "switch", "typedef",  "union",    "unsigned", "void",
      "volatile", "while",    "_Bool",    "_Complex", "_Imaginary"};
  if (name.empty() || std::isdigit(static_cast<unsigned char>(name[0]))) return false;
  for (char c : name) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_')) return false;
  }
  return std::find(kKeywords.begin(), kKeywords.end(), name) == kKeywords.end();
}

// Shortest round-tripping decimal, made into a valid C floating literal.
template <typename T>
std::string c_float_literal(T value) {
  char buf[64];
  auto const res = std::to_chars(buf, buf + sizeof buf, value);
  std::string s(buf, res.ptr);
  if (s.find_first_of(".e") == std::string::npos) s += ".0";
  return s;
}

inline std::string comment_safe(std::string_view text) {
  std::string out;
  for (std::size_t i = 0; i < text.size(); ++i) {
    char const c = text[i];
    bool const closes = c == '*' && i + 1 < text.size() && text[i + 1] == '/';
    out += (c < 0x20 || c > 0x7E || closes) ? '_' : c;
  }
  return out;
}

inline std::string key_literal(FlintKey key) {
  if (key.value >= 0) return fmt::format("0x{:08X}", static_cast<std::uint32_t>(key.value));
  return fmt::format("({})", key.value);
}

class Emitter {
 public:
  Emitter(Ensemble const& e, EmitConfig const& cfg, QuantizedEnsemble const* q)
      : e_(e), cfg_(cfg), q_(q) {}

  std::string body() {
    auto const& name = cfg_.function_name;
    bool const integer = cfg_.mode == EmitMode::kInteger;
    bool const keyed = cfg_.mode != EmitMode::kFloat && !cfg_.nonneg_fast;
    auto const used = used_features(e_);

    out_ += "#include <stdint.h>\n\n";
    if (!integer && !used.empty()) {
      out_ += fmt::format(
          "static uint32_t {0}_bits(float value)\n"
          "{{\n"
          "  union {{ float f; uint32_t u; }} pun;\n"
          "  pun.f = value;\n"
          "  return pun.u;\n"
          "}}\n\n",
          name);
    }
    if (keyed && !used.empty()) {
      out_ += fmt::format(
          "static int32_t {0}_key(uint32_t word)\n"
          "{{\n"
          "  const uint32_t mag = word & 0x7FFFFFFFu;\n"
          "  if (word == mag) return (int32_t)word;\n"
          "  return mag == 0u ? 0 : -1 - (int32_t)mag;\n"
          "}}\n\n",
          name);
    }

    out_ += signature() + "\n{\n";
    if (used.empty()) out_ += "  (void)features;\n";
    for (auto f : used) {
      if (integer) {
        out_ += fmt::format("  const uint32_t w{0} = features[{0}];\n", f);
      } else {
        out_ += fmt::format("  const uint32_t w{0} = {1}_bits(features[{0}]);\n", f, name);
      }
      out_ += fmt::format("  const int m{0} = (w{0} & 0x7FFFFFFFu) > 0x7F800000u;\n", f);
      if (keyed) out_ += fmt::format("  const int32_t k{0} = {1}_key(w{0});\n", f, name);
    }

    for (std::size_t t = 0; t < e_.trees.size(); ++t) {
      out_ += fmt::format("\n  /* tree {} */\n", t);
      auto const& tree = e_.trees[t];
      auto const* qtree = q_ ? &q_->trees[t] : nullptr;
      if (std::holds_alternative<Leaf>(tree.nodes[tree.root])) {
        out_ += "  {\n";
        emit_leaf(tree, qtree, tree.root, 2);
        out_ += "  }\n";
      } else {
        emit_node(tree, qtree, tree.root, 1);
      }
    }
    out_ += "}\n";

    if (cfg_.emit_argmax_helper) {
      auto const acc_type = integer ? "uint32_t" : "float";
      out_ += fmt::format(
          "\nint {0}_argmax(const {1} result[{2}])\n"
          "{{\n"
          "  int best = 0;\n"
          "  int c;\n"
          "  for (c = 1; c < {2}; ++c) {{\n"
          "    if (result[c] > result[best]) best = c;\n"
          "  }}\n"
          "  return best;\n"
          "}}\n",
          name, acc_type, e_.num_classes);
    }
    return std::move(out_);
  }

  std::string signature() const {
    bool const integer = cfg_.mode == EmitMode::kInteger;
    auto const type = integer ? "uint32_t" : "float";
    auto const features = e_.num_features == 0
                              ? fmt::format("const {} *features", type)
                              : fmt::format("const {} features[{}]", type, e_.num_features);
    return fmt::format("void {}({}, {} result[{}])", cfg_.function_name, features, type,
                       e_.num_classes);
  }

 private:
  static std::string indent(int level) { return std::string(static_cast<std::size_t>(level) * 2, ' '); }

  std::string condition(Branch const& b) const {
    auto const f = b.feature;
    auto const op = b.op == CompareOp::kLE ? "<=" : "<";
    std::string cmp;
    if (cfg_.mode == EmitMode::kFloat) {
      cmp = fmt::format("features[{}] {} {}f", f, op, c_float_literal(b.threshold.value()));
    } else if (cfg_.nonneg_fast) {
      cmp = fmt::format("w{} {} 0x{:08X}u", f, op, b.threshold.bits());
    } else {
      cmp = fmt::format("k{} {} {}", f, op, key_literal(flint_key(b.threshold.bits())));
    }
    return b.default_left ? fmt::format("m{} || {}", f, cmp) : fmt::format("!m{} && {}", f, cmp);
  }

  void emit_node(Tree const& tree, QTree const* qtree, std::uint32_t i, int level) {
    auto const& b = std::get<Branch>(tree.nodes[i]);
    out_ += indent(level) + "if (" + condition(b) + ") {\n";
    emit_child(tree, qtree, b.left, level + 1);
    out_ += indent(level) + "} else {\n";
    emit_child(tree, qtree, b.right, level + 1);
    out_ += indent(level) + "}\n";
  }

  void emit_child(Tree const& tree, QTree const* qtree, std::uint32_t i, int level) {
    if (std::holds_alternative<Branch>(tree.nodes[i])) {
      emit_node(tree, qtree, i, level);
    } else {
      emit_leaf(tree, qtree, i, level);
    }
  }

  void emit_leaf(Tree const& tree, QTree const* qtree, std::uint32_t i, int level) {
    if (cfg_.mode == EmitMode::kInteger) {
      auto const& inc = std::get<QLeaf>(qtree->nodes[i]).increments;
      for (std::size_t c = 0; c < inc.size(); ++c) {
        out_ += fmt::format("{}result[{}] += {}u;\n", indent(level), c, inc[c]);
      }
    } else {
      auto const& probs = std::get<Leaf>(tree.nodes[i]).probs;
      for (std::size_t c = 0; c < probs.size(); ++c) {
        out_ += fmt::format("{}result[{}] += (float){};\n", indent(level), c,
                            c_float_literal(probs[c]));
      }
    }
  }

  Ensemble const& e_;
  EmitConfig const& cfg_;
  QuantizedEnsemble const* q_;
  std::string out_;
};

inline void check_config(Ensemble const& e, EmitConfig const& cfg) {
  if (!is_c_identifier(cfg.function_name)) {
    throw ConfigError("function name \"" + cfg.function_name + "\" is not a valid C identifier");
  }
  if (cfg.feature_min && cfg.feature_min->size() != e.num_features) {
    throw ConfigError("feature_min has " + std::to_string(cfg.feature_min->size()) +
                      " entries, model has " + std::to_string(e.num_features) + " features");
  }
  std::optional<std::span<float const>> domain;
  if (cfg.feature_min) domain = std::span<float const>(*cfg.feature_min);
  if (cfg.nonneg_fast && !check_nonneg(e, domain)) {
    throw ConfigError(
        "nonneg_fast requires non-negative thresholds and a declared non-negative minimum "
        "for every feature");
  }
}

}  // namespace detail

inline EmittedUnit emit(Ensemble const& e, EmitConfig const& cfg) {
  check_valid(e);
  detail::check_config(e, cfg);

  std::optional<QuantizedEnsemble> q;
  if (cfg.mode == EmitMode::kInteger) q = quantize_ensemble(e).model;

  detail::Emitter emitter(e, cfg, q ? &*q : nullptr);
  auto const signature = emitter.signature();
  auto const body = emitter.body();

  EmittedUnit unit;
  unit.manifest = EmitManifest{cfg.mode, static_cast<std::uint32_t>(e.num_trees()), e.num_features,
                               e.num_classes, fmt::format("fnv1a64:{:016x}", detail::fnv1a64(body))};

  std::string header = "/*\n * Tree-ensemble inference generated by treegrate. Do not edit.\n";
  header += fmt::format(" * format: {}\n", kEmitFormatVersion);
  header += fmt::format(" * model_id: {}\n", detail::comment_safe(e.model_id));
  header += fmt::format(" * mode: {}\n", to_string(cfg.mode));
  header += fmt::format(" * trees: {}\n", e.num_trees());
  header += fmt::format(" * features: {}\n", e.num_features);
  header += fmt::format(" * classes: {}\n", e.num_classes);
  header += fmt::format(" * digest: {}\n *\n", unit.manifest.digest);
  header += fmt::format(" * {};\n", signature);
  if (cfg.mode == EmitMode::kInteger) {
    header +=
        " * features are binary32 bit patterns (NaN = missing). result must be zeroed by the\n"
        " * caller; afterwards result[c] / 2^32 is the mean probability of class c.\n";
  } else {
    header +=
        " * NaN features are missing. result must be zeroed by the caller; afterwards\n"
        " * result[c] / trees is the mean probability of class c.\n";
  }
  header += " */\n";

  unit.source = header + body;
  return unit;
}

// Companion C file with a main() that runs the predictor over `vectors`, `replications`
// times each, and prints one line of space-separated decimal accumulators per vector.
// Float-mode accumulators print with 9 significant digits, enough to recover every bit.
inline std::string emit_harness(Ensemble const& e, EmitConfig const& cfg,
                                std::span<FeatureVector const> vectors,
                                std::uint64_t replications = 1) {
  detail::check_config(e, cfg);
  if (replications == 0) throw ConfigError("harness replications must be at least 1");
  for (auto const& x : vectors) {
    if (x.size() != e.num_features) {
      throw InputError("harness vector has " + std::to_string(x.size()) + " values, model expects " +
                       std::to_string(e.num_features));
    }
  }

  bool const integer = cfg.mode == EmitMode::kInteger;
  auto const type = integer ? "uint32_t" : "float";
  auto const width = std::max<std::uint32_t>(e.num_features, 1);
  detail::Emitter emitter(e, cfg, nullptr);

  std::string out = fmt::format(
      "/* Test harness for {}() generated by treegrate. */\n"
      "#include <stdint.h>\n#include <stdio.h>\n#include <string.h>\n\n"
      "{};\n",
      cfg.function_name, emitter.signature());
  if (vectors.empty()) return out + "\nint main(void)\n{\n  return 0;\n}\n";

  out += fmt::format("\nstatic const uint32_t vectors[{}][{}] = {{\n", vectors.size(), width);
  for (auto const& x : vectors) {
    out += "  {";
    for (std::uint32_t f = 0; f < width; ++f) {
      out += fmt::format("{}0x{:08X}u", f ? ", " : "", f < x.size() ? x[f] : 0u);
    }
    out += "},\n";
  }
  out += "};\n\n";

  out += "int main(void)\n{\n  unsigned long i;\n  unsigned long r;\n  unsigned c;\n";
  out += fmt::format("  for (i = 0; i < {}ul; ++i) {{\n", vectors.size());
  out += fmt::format("    {} result[{}];\n", type, e.num_classes);
  if (!integer) {
    out += fmt::format("    float x[{}];\n", width);
    out += "    memcpy(x, vectors[i], sizeof x);\n";
  }
  out += fmt::format("    for (r = 0; r < {}ul; ++r) {{\n", replications);
  out += "      memset(result, 0, sizeof result);\n";
  out += fmt::format("      {}({}, result);\n", cfg.function_name, integer ? "vectors[i]" : "x");
  out += "    }\n";
  out += fmt::format("    for (c = 0; c < {}u; ++c) {{\n", e.num_classes);
  if (integer) {
    out += "      printf(c ? \" %lu\" : \"%lu\", (unsigned long)result[c]);\n";
  } else {
    out += "      printf(c ? \" %.9g\" : \"%.9g\", (double)result[c]);\n";
  }
  out += "    }\n    printf(\"\\n\");\n  }\n  return 0;\n}\n";
  return out;
}

}  // namespace treegrate
