#pragma once

// Fixed-point leaf probabilities.
//
// A leaf probability p of an n-tree ensemble becomes the 32-bit increment
// floor(p * 2^32 / n), so the sum over all trees is the ensemble mean in units of 2^-32
// and never exceeds 32 bits. Each tree loses less than one unit to flooring, which bounds
// the error of the final mean by n / 2^32.

#include <bit>
#include <cstdint>
#include <numeric>
#include <variant>
#include <vector>

#include "treegrate/errors.hpp"
#include "treegrate/flint.hpp"
#include "treegrate/model_ir.hpp"

namespace treegrate {

inline constexpr std::uint64_t kFixedPointScale = std::uint64_t{1} << 32;
inline constexpr std::uint32_t kMaxTreesForFloatParity = 256;
inline constexpr double kLowProbabilityThreshold = 0x1p-10;

// Non-negative rational kept in lowest terms.
struct Rational {
  std::uint64_t num = 0;
  std::uint64_t den = 1;

  static constexpr Rational make(std::uint64_t num, std::uint64_t den) {
    auto const g = std::gcd(num, den);
    return g == 0 ? Rational{0, 1} : Rational{num / g, den / g};
  }

  constexpr double to_double() const {
    return static_cast<double>(num) / static_cast<double>(den);
  }

  friend constexpr bool operator==(Rational, Rational) = default;
};

struct QBranch {
  std::uint32_t feature = 0;
  FlintKey key;
  CompareOp op = CompareOp::kLE;
  bool default_left = true;
  std::uint32_t left = 0;
  std::uint32_t right = 0;

  friend bool operator==(QBranch const&, QBranch const&) = default;
};

struct QLeaf {
  std::vector<std::uint32_t> increments;

  friend bool operator==(QLeaf const&, QLeaf const&) = default;
};

using QNode = std::variant<QBranch, QLeaf>;

struct QTree {
  std::vector<QNode> nodes;
  std::uint32_t root = 0;
};

struct QuantizedEnsemble {
  std::uint32_t num_features = 0;
  std::uint32_t num_classes = 0;
  std::uint32_t num_trees = 0;
  std::vector<QTree> trees;
};

struct PrecisionReport {
  std::uint32_t n = 0;
  Rational bound;
  bool warn_tree_count = false;   // n > 256: binary32 leaves would be more precise
  std::size_t low_prob_leaves = 0;  // nonzero leaf probabilities below 2^-10
};

// Largest increment any single tree may contribute; n of them fit in 32 bits.
constexpr std::uint32_t max_increment(std::uint32_t n) {
  return static_cast<std::uint32_t>((kFixedPointScale - 1) / n);
}

// min(floor(p * 2^32 / n), floor((2^32 - 1) / n)), computed on the exact binary64 value of p.
inline std::uint32_t quantize_prob(double p, std::uint32_t n) {
  if (n == 0) throw DomainError("quantize_prob: tree count must be at least 1");
  if (!(p >= 0.0 && p <= 1.0)) throw DomainError("quantize_prob: probability outside [0, 1]");

  auto const bits = std::bit_cast<std::uint64_t>(p);
  auto const biased_exp = static_cast<int>((bits >> 52) & 0x7FF);
  std::uint64_t mantissa = bits & ((std::uint64_t{1} << 52) - 1);
  int exp;  // p == mantissa * 2^exp
  if (biased_exp == 0) {
    exp = -1074;
  } else {
    mantissa |= std::uint64_t{1} << 52;
    exp = biased_exp - 1075;
  }

  // floor(m * 2^s / n) with s = exp + 32. For s < 0 this is floor(floor(m / 2^-s) / n).
  int const shift = exp + 32;
  std::uint64_t scaled;
  if (shift >= 0) {
    scaled = mantissa << shift;  // p <= 1 keeps this <= 2^32
  } else if (shift > -64) {
    scaled = mantissa >> -shift;
  } else {
    scaled = 0;
  }
  auto const q = scaled / n;
  auto const cap = max_increment(n);
  return q > cap ? cap : static_cast<std::uint32_t>(q);
}

// n / 2^32: worst-case distance between the fixed-point mean and the exact mean.
inline Rational error_bound(std::uint32_t n) {
  if (n == 0) throw DomainError("error_bound: tree count must be at least 1");
  return Rational::make(n, kFixedPointScale);
}

inline PrecisionReport precision_report(Ensemble const& e) {
  PrecisionReport report;
  report.n = static_cast<std::uint32_t>(e.num_trees());
  report.bound = error_bound(report.n);
  report.warn_tree_count = report.n > kMaxTreesForFloatParity;
  for (auto const& tree : e.trees) {
    for (auto const& node : tree.nodes) {
      if (auto const* leaf = std::get_if<Leaf>(&node)) {
        for (double p : leaf->probs) {
          if (p > 0.0 && p < kLowProbabilityThreshold) ++report.low_prob_leaves;
        }
      }
    }
  }
  return report;
}

struct QuantizeResult {
  QuantizedEnsemble model;
  PrecisionReport report;
};

inline QuantizeResult quantize_ensemble(Ensemble const& e) {
  auto const n = static_cast<std::uint32_t>(e.num_trees());
  QuantizeResult out;
  out.report = precision_report(e);
  auto& q = out.model;
  q.num_features = e.num_features;
  q.num_classes = e.num_classes;
  q.num_trees = n;
  q.trees.reserve(n);
  for (auto const& tree : e.trees) {
    QTree qt;
    qt.root = tree.root;
    qt.nodes.reserve(tree.nodes.size());
    for (auto const& node : tree.nodes) {
      if (auto const* b = std::get_if<Branch>(&node)) {
        qt.nodes.push_back(QBranch{b->feature, flint_key(b->threshold.bits()), b->op,
                                   b->default_left, b->left, b->right});
      } else {
        QLeaf leaf;
        for (double p : std::get<Leaf>(node).probs) leaf.increments.push_back(quantize_prob(p, n));
        qt.nodes.push_back(std::move(leaf));
      }
    }
    q.trees.push_back(std::move(qt));
  }
  return out;
}

}  // namespace treegrate
