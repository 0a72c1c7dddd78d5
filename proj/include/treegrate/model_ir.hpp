#pragma once

// Canonical in-memory tree-ensemble classifier and its on-disk JSON form.
//
// Document layout ("treegrate-model/1"):
//
//   {"format_version": "treegrate-model/1", "model_id": "...",
//    "num_features": F, "num_classes": C, ["feature_names": [...],]
//    "trees": [{"root": r, "nodes": [
//        {"kind": "branch", "feature": f, "threshold": "0x42AF0000", "op": "le",
//         "default_left": true, "left": i, "right": j},
//        {"kind": "leaf", "probs": ["0x3FE8000000000000", ...]}]}]}
//
// Thresholds are binary32 bit patterns and leaf probabilities binary64 bit patterns, both
// as hexadecimal strings, so a load/save cycle never perturbs a bit.

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "treegrate/errors.hpp"
#include "treegrate/flint.hpp"

namespace treegrate {

inline constexpr std::string_view kModelFormatVersion = "treegrate-model/1";
inline constexpr double kProbabilitySumTolerance = 0x1p-20;

// Binary32 split threshold. -0.0 is stored as +0.0.
class Threshold {
 public:
  constexpr Threshold() = default;
  constexpr explicit Threshold(std::uint32_t bits) : bits_(canonicalize_zero(bits)) {}
  static constexpr Threshold from_float(float f) { return Threshold(float_bits(f)); }

  constexpr std::uint32_t bits() const { return bits_; }
  constexpr float value() const { return bits_float(bits_); }

  friend constexpr bool operator==(Threshold, Threshold) = default;

 private:
  std::uint32_t bits_ = 0;
};

struct Branch {
  std::uint32_t feature = 0;
  Threshold threshold;
  CompareOp op = CompareOp::kLE;
  bool default_left = true;
  std::uint32_t left = 0;
  std::uint32_t right = 0;

  friend bool operator==(Branch const&, Branch const&) = default;
};

struct Leaf {
  std::vector<double> probs;

  // Bitwise, so that round-trip checks distinguish every binary64 pattern.
  friend bool operator==(Leaf const& a, Leaf const& b) {
    if (a.probs.size() != b.probs.size()) return false;
    for (std::size_t i = 0; i < a.probs.size(); ++i) {
      if (std::bit_cast<std::uint64_t>(a.probs[i]) != std::bit_cast<std::uint64_t>(b.probs[i])) {
        return false;
      }
    }
    return true;
  }
};

using Node = std::variant<Branch, Leaf>;

struct Tree {
  std::vector<Node> nodes;
  std::uint32_t root = 0;

  friend bool operator==(Tree const&, Tree const&) = default;
};

struct Ensemble {
  std::string model_id;
  std::uint32_t num_features = 0;
  std::uint32_t num_classes = 0;
  std::vector<Tree> trees;
  std::optional<std::vector<std::string>> feature_names;

  std::size_t num_trees() const { return trees.size(); }

  friend bool operator==(Ensemble const&, Ensemble const&) = default;
};

// One binary32 bit pattern per feature; a NaN pattern marks the value as missing.
using FeatureVector = std::vector<std::uint32_t>;

inline FeatureVector feature_vector_from_floats(std::vector<float> const& values) {
  FeatureVector out;
  out.reserve(values.size());
  for (float v : values) out.push_back(float_bits(v));
  return out;
}

struct Violation {
  std::optional<std::size_t> tree;
  std::optional<std::size_t> node;
  std::string message;

  std::string to_string() const {
    std::string out;
    if (tree) out += "tree " + std::to_string(*tree);
    if (node) out += (out.empty() ? "" : ", ") + std::string("node ") + std::to_string(*node);
    if (!out.empty()) out += ": ";
    return out + message;
  }
};

namespace detail {

// Shortest text that reads back as the same binary64.
inline std::string format_double(double v) {
  char buf[32];
  auto const res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline void validate_tree(Ensemble const& e, std::size_t t, std::vector<Violation>& out) {
  Tree const& tree = e.trees[t];
  auto const n = tree.nodes.size();
  auto report = [&](std::optional<std::size_t> node, std::string msg) {
    out.push_back(Violation{t, node, std::move(msg)});
  };
  if (n == 0) {
    report(std::nullopt, "tree has no nodes");
    return;
  }
  if (tree.root >= n) {
    report(std::nullopt, "root index " + std::to_string(tree.root) + " out of range");
    return;
  }

  for (std::size_t i = 0; i < n; ++i) {
    if (auto const* b = std::get_if<Branch>(&tree.nodes[i])) {
      if (b->feature >= e.num_features) report(i, "feature index out of range");
      if (is_nan_bits(b->threshold.bits())) report(i, "threshold is NaN");
      else if (std::isinf(b->threshold.value())) report(i, "threshold is infinite");
      if (b->threshold.bits() == kNegativeZeroBits) report(i, "threshold is negative zero");
      if (b->left >= n) report(i, "left child index out of range");
      if (b->right >= n) report(i, "right child index out of range");
    } else {
      auto const& probs = std::get<Leaf>(tree.nodes[i]).probs;
      if (probs.size() != e.num_classes) {
        report(i, "leaf has " + std::to_string(probs.size()) + " probabilities, expected " +
                      std::to_string(e.num_classes));
      }
      double sum = 0.0;
      bool in_range = true;
      for (double p : probs) {
        if (!(p >= 0.0 && p <= 1.0)) in_range = false;
        sum += p;
      }
      if (!in_range) {
        report(i, "leaf probability outside [0, 1]");
      } else if (!probs.empty() && !(std::fabs(sum - 1.0) <= kProbabilitySumTolerance)) {
        report(i, "leaf probabilities sum " + format_double(sum) + " ≠ 1");
      }
    }
  }

  // Every node must be reached exactly once from the root.
  std::vector<int> visits(n, 0);
  std::vector<std::size_t> stack{tree.root};
  while (!stack.empty()) {
    auto const i = stack.back();
    stack.pop_back();
    if (++visits[i] > 1) continue;
    if (auto const* b = std::get_if<Branch>(&tree.nodes[i])) {
      if (b->right < n) stack.push_back(b->right);
      if (b->left < n) stack.push_back(b->left);
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (visits[i] == 0) report(i, "node unreachable from root");
    if (visits[i] > 1) report(i, "node reached more than once (shared child or cycle)");
  }
}

}  // namespace detail

// Every invariant violation of `e`; empty iff the ensemble is well formed.
inline std::vector<Violation> validate(Ensemble const& e) {
  std::vector<Violation> out;
  if (e.num_classes < 2) out.push_back({std::nullopt, std::nullopt, "num_classes must be at least 2"});
  if (e.trees.empty()) out.push_back({std::nullopt, std::nullopt, "ensemble has no trees"});
  if (e.feature_names && e.feature_names->size() != e.num_features) {
    out.push_back({std::nullopt, std::nullopt, "feature_names length differs from num_features"});
  }
  for (std::size_t t = 0; t < e.trees.size(); ++t) detail::validate_tree(e, t, out);
  return out;
}

inline void check_valid(Ensemble const& e) {
  auto const violations = validate(e);
  if (violations.empty()) return;
  std::string msg = "invalid model (" + std::to_string(violations.size()) + " violation" +
                    (violations.size() == 1 ? "" : "s") + ")";
  for (auto const& v : violations) msg += "\n  " + v.to_string();
  throw ModelError(msg);
}

// ---------------------------------------------------------------------------------------
// Serialization

namespace detail {

using ordered_json = nlohmann::ordered_json;

inline std::string hex_bits(std::uint64_t bits, int digits) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "0x%0*llX", digits, static_cast<unsigned long long>(bits));
  return buf;
}

inline std::optional<std::uint64_t> parse_hex_bits(std::string const& s, std::size_t digits) {
  if (s.size() != digits + 2 || s[0] != '0' || (s[1] != 'x' && s[1] != 'X')) return std::nullopt;
  std::uint64_t v = 0;
  for (std::size_t i = 2; i < s.size(); ++i) {
    char const c = s[i];
    int d;
    if (c >= '0' && c <= '9') d = c - '0';
    else if (c >= 'a' && c <= 'f') d = c - 'a' + 10;
    else if (c >= 'A' && c <= 'F') d = c - 'A' + 10;
    else return std::nullopt;
    v = (v << 4) | static_cast<std::uint64_t>(d);
  }
  return v;
}

class Reader {
 public:
  explicit Reader(nlohmann::json const& root) : root_(root) {}

  nlohmann::json const& field(nlohmann::json const& obj, std::string const& path,
                              char const* key) const {
    if (!obj.is_object()) throw SchemaError(path.empty() ? "/" : path, "expected an object");
    auto it = obj.find(key);
    if (it == obj.end()) throw SchemaError(path + "/" + key, "required field missing");
    return *it;
  }

  std::uint32_t index(nlohmann::json const& obj, std::string const& path, char const* key) const {
    auto const& v = field(obj, path, key);
    if (!v.is_number_unsigned() || v.get<std::uint64_t>() > 0xFFFFFFFFull) {
      throw SchemaError(path + "/" + key, "expected a non-negative 32-bit integer");
    }
    return static_cast<std::uint32_t>(v.get<std::uint64_t>());
  }

  std::string string(nlohmann::json const& obj, std::string const& path, char const* key) const {
    auto const& v = field(obj, path, key);
    if (!v.is_string()) throw SchemaError(path + "/" + key, "expected a string");
    return v.get<std::string>();
  }

  bool boolean(nlohmann::json const& obj, std::string const& path, char const* key) const {
    auto const& v = field(obj, path, key);
    if (!v.is_boolean()) throw SchemaError(path + "/" + key, "expected a boolean");
    return v.get<bool>();
  }

  nlohmann::json const& root() const { return root_; }

 private:
  nlohmann::json const& root_;
};

inline Node read_node(Reader const& r, nlohmann::json const& obj, std::string const& path) {
  auto const kind = r.string(obj, path, "kind");
  if (kind == "leaf") {
    auto const& probs = r.field(obj, path, "probs");
    if (!probs.is_array()) throw SchemaError(path + "/probs", "expected an array");
    Leaf leaf;
    for (std::size_t c = 0; c < probs.size(); ++c) {
      auto const p = path + "/probs/" + std::to_string(c);
      if (!probs[c].is_string()) throw SchemaError(p, "expected a binary64 hex string");
      auto bits = parse_hex_bits(probs[c].get<std::string>(), 16);
      if (!bits) throw SchemaError(p, "expected \"0x\" followed by 16 hex digits");
      leaf.probs.push_back(std::bit_cast<double>(*bits));
    }
    return leaf;
  }
  if (kind != "branch") throw SchemaError(path + "/kind", "expected \"branch\" or \"leaf\"");

  Branch b;
  b.feature = r.index(obj, path, "feature");
  auto const threshold = r.string(obj, path, "threshold");
  auto bits = parse_hex_bits(threshold, 8);
  if (!bits) throw SchemaError(path + "/threshold", "expected \"0x\" followed by 8 hex digits");
  b.threshold = Threshold(static_cast<std::uint32_t>(*bits));
  b.default_left = r.boolean(obj, path, "default_left");
  b.left = r.index(obj, path, "left");
  b.right = r.index(obj, path, "right");

  // gt/ge are folded into le/lt by swapping children: for non-NaN x,
  // (x > t) == !(x <= t) and (x >= t) == !(x < t).
  auto const op = r.string(obj, path, "op");
  if (op == "le" || op == "lt") {
    b.op = op == "le" ? CompareOp::kLE : CompareOp::kLT;
  } else if (op == "gt" || op == "ge") {
    b.op = op == "gt" ? CompareOp::kLE : CompareOp::kLT;
    std::swap(b.left, b.right);
    b.default_left = !b.default_left;
  } else {
    throw SchemaError(path + "/op", "expected \"le\" or \"lt\"");
  }
  return b;
}

}  // namespace detail

// Parses and validates a canonical model document.
inline Ensemble load_model(std::string_view bytes) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(bytes.begin(), bytes.end());
  } catch (nlohmann::json::parse_error const& err) {
    throw ParseError(std::string("malformed JSON at byte ") + std::to_string(err.byte) + ": " +
                         err.what(),
                     err.byte);
  }

  detail::Reader r(doc);
  if (!doc.is_object()) throw SchemaError("/", "expected an object");
  auto const version = r.string(doc, "", "format_version");
  if (version != kModelFormatVersion) {
    throw SchemaError("/format_version", "unsupported format version \"" + version + "\"");
  }

  Ensemble e;
  e.model_id = r.string(doc, "", "model_id");
  e.num_features = r.index(doc, "", "num_features");
  e.num_classes = r.index(doc, "", "num_classes");
  if (auto it = doc.find("feature_names"); it != doc.end()) {
    if (!it->is_array()) throw SchemaError("/feature_names", "expected an array of strings");
    std::vector<std::string> names;
    for (std::size_t i = 0; i < it->size(); ++i) {
      if (!(*it)[i].is_string()) {
        throw SchemaError("/feature_names/" + std::to_string(i), "expected a string");
      }
      names.push_back((*it)[i].get<std::string>());
    }
    e.feature_names = std::move(names);
  }

  auto const& trees = r.field(doc, "", "trees");
  if (!trees.is_array()) throw SchemaError("/trees", "expected an array");
  for (std::size_t t = 0; t < trees.size(); ++t) {
    auto const tpath = "/trees/" + std::to_string(t);
    Tree tree;
    tree.root = r.index(trees[t], tpath, "root");
    auto const& nodes = r.field(trees[t], tpath, "nodes");
    if (!nodes.is_array()) throw SchemaError(tpath + "/nodes", "expected an array");
    tree.nodes.reserve(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      tree.nodes.push_back(detail::read_node(r, nodes[i], tpath + "/nodes/" + std::to_string(i)));
    }
    e.trees.push_back(std::move(tree));
  }

  check_valid(e);
  return e;
}

// Deterministic serialization: fixed key order, upper-case hex bit patterns.
inline std::string save_model(Ensemble const& e) {
  using detail::ordered_json;
  ordered_json doc;
  doc["format_version"] = kModelFormatVersion;
  doc["model_id"] = e.model_id;
  doc["num_features"] = e.num_features;
  doc["num_classes"] = e.num_classes;
  if (e.feature_names) doc["feature_names"] = *e.feature_names;

  auto trees = ordered_json::array();
  for (auto const& tree : e.trees) {
    auto nodes = ordered_json::array();
    for (auto const& node : tree.nodes) {
      ordered_json n;
      if (auto const* b = std::get_if<Branch>(&node)) {
        n["kind"] = "branch";
        n["feature"] = b->feature;
        n["threshold"] = detail::hex_bits(b->threshold.bits(), 8);
        n["op"] = b->op == CompareOp::kLE ? "le" : "lt";
        n["default_left"] = b->default_left;
        n["left"] = b->left;
        n["right"] = b->right;
      } else {
        n["kind"] = "leaf";
        auto probs = ordered_json::array();
        for (double p : std::get<Leaf>(node).probs) {
          probs.push_back(detail::hex_bits(std::bit_cast<std::uint64_t>(p), 16));
        }
        n["probs"] = std::move(probs);
      }
      nodes.push_back(std::move(n));
    }
    ordered_json t;
    t["root"] = tree.root;
    t["nodes"] = std::move(nodes);
    trees.push_back(std::move(t));
  }
  doc["trees"] = std::move(trees);
  return doc.dump(1) + "\n";
}

// ---------------------------------------------------------------------------------------
// Structural queries shared by codegen, inspect and the generators.

inline std::size_t tree_depth(Tree const& tree) {
  std::size_t depth = 0;
  std::vector<std::pair<std::uint32_t, std::size_t>> stack{{tree.root, 0}};
  while (!stack.empty()) {
    auto const [i, d] = stack.back();
    stack.pop_back();
    depth = std::max(depth, d);
    if (auto const* b = std::get_if<Branch>(&tree.nodes[i])) {
      stack.push_back({b->left, d + 1});
      stack.push_back({b->right, d + 1});
    }
  }
  return depth;
}

// Sorted feature indices referenced by at least one branch.
inline std::vector<std::uint32_t> used_features(Ensemble const& e) {
  std::set<std::uint32_t> used;
  for (auto const& tree : e.trees) {
    for (auto const& node : tree.nodes) {
      if (auto const* b = std::get_if<Branch>(&node)) used.insert(b->feature);
    }
  }
  return {used.begin(), used.end()};
}

}  // namespace treegrate
