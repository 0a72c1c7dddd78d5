#pragma once

// Reference evaluators.
//
// predict_float mirrors the float-mode generated code: binary32 accumulators, one
// `result[c] += (float)p` per class per tree, in tree order. predict_int mirrors the
// integer-mode generated code: FlInt key comparisons and 32-bit unsigned additions.
// Both walk trees in the same order and add classes in index order, so each is
// step-equivalent to the corresponding emitted function.

#include <array>
#include <bit>
#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "treegrate/errors.hpp"
#include "treegrate/flint.hpp"
#include "treegrate/model_ir.hpp"
#include "treegrate/quantize.hpp"

namespace treegrate {

using BigInt = boost::multiprecision::cpp_int;

// Exact sum of non-negative finite binary64 values, held as a fixed-point integer with
// 1074 fractional bits (the weight of the smallest subnormal). Sums below 2^64 are exact.
class ExactSum {
 public:
  static constexpr int kFracBits = 1074;
  static constexpr std::size_t kLimbs = 18;  // 1152 bits >= 1074 + 64

  void add(double p) {
    auto const bits = std::bit_cast<std::uint64_t>(p);
    if (bits >> 63) throw DomainError("ExactSum: negative summand");
    auto const biased_exp = static_cast<int>(bits >> 52);
    if (biased_exp == 0x7FF) throw DomainError("ExactSum: non-finite summand");
    std::uint64_t mantissa = bits & ((std::uint64_t{1} << 52) - 1);
    int offset = 0;  // bit position of the mantissa's lsb
    if (biased_exp != 0) {
      mantissa |= std::uint64_t{1} << 52;
      offset = biased_exp - 1;
    }
    if (mantissa == 0) return;
    auto const limb = static_cast<std::size_t>(offset / 64);
    auto const shift = offset % 64;
    add_at(limb, mantissa << shift);
    if (shift != 0) add_at(limb + 1, mantissa >> (64 - shift));
  }

  // Numerator over 2^kFracBits.
  BigInt scaled() const {
    BigInt out = 0;
    for (std::size_t i = kLimbs; i-- > 0;) {
      out <<= 64;
      out += limbs_[i];
    }
    return out;
  }

  double to_double() const {
    double out = 0.0;
    for (std::size_t i = 0; i < kLimbs; ++i) {
      if (limbs_[i] != 0) {
        out += std::ldexp(static_cast<double>(limbs_[i]), static_cast<int>(64 * i) - kFracBits);
      }
    }
    return out;
  }

  friend std::strong_ordering operator<=>(ExactSum const& a, ExactSum const& b) {
    for (std::size_t i = kLimbs; i-- > 0;) {
      if (auto c = a.limbs_[i] <=> b.limbs_[i]; c != 0) return c;
    }
    return std::strong_ordering::equal;
  }
  friend bool operator==(ExactSum const& a, ExactSum const& b) = default;

 private:
  void add_at(std::size_t limb, std::uint64_t value) {
    while (value != 0) {
      if (limb >= kLimbs) throw DomainError("ExactSum: overflow");
      auto const before = limbs_[limb];
      limbs_[limb] = before + value;
      value = limbs_[limb] < before ? 1 : 0;
      ++limb;
    }
  }

  std::array<std::uint64_t, kLimbs> limbs_{};
};

struct FloatAccumulators {
  std::vector<float> sums;     // binary32, accumulated in tree order
  std::vector<ExactSum> exact;  // exact sum of the binary64 leaf probabilities
};

struct FloatPrediction {
  FloatAccumulators acc;
  std::size_t argmax = 0;

  // Ensemble-mean probabilities from the binary32 sums.
  std::vector<double> probabilities(std::size_t num_trees) const {
    std::vector<double> out;
    out.reserve(acc.sums.size());
    for (float s : acc.sums) out.push_back(static_cast<double>(s) / static_cast<double>(num_trees));
    return out;
  }
};

struct IntPrediction {
  std::vector<std::uint32_t> acc;
  std::size_t argmax = 0;
};

// Index of the largest element; ties go to the lowest index.
template <typename T>
std::size_t argmax(std::span<T const> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[best] < values[i]) best = i;
  }
  return best;
}

template <typename Container>
std::size_t argmax(Container const& values) {
  return argmax(std::span<typename Container::value_type const>(values.data(), values.size()));
}

namespace detail {

inline void check_arity(std::size_t expected, FeatureVector const& x) {
  if (x.size() != expected) {
    throw InputError("feature vector has " + std::to_string(x.size()) + " values, model expects " +
                     std::to_string(expected));
  }
}

}  // namespace detail

// Index of the leaf reached in `tree`. When `path` is given, the visited node indices
// (root first, leaf last) are appended to it.
inline std::uint32_t eval_tree_float_index(Tree const& tree, FeatureVector const& x,
                                           std::vector<std::uint32_t>* path = nullptr) {
  std::uint32_t i = tree.root;
  for (;;) {
    if (path) path->push_back(i);
    auto const* b = std::get_if<Branch>(&tree.nodes[i]);
    if (!b) return i;
    auto const word = x[b->feature];
    bool go_left;
    if (is_nan_bits(word)) {
      go_left = b->default_left;
    } else {
      float const value = bits_float(word);
      float const threshold = b->threshold.value();
      go_left = b->op == CompareOp::kLE ? value <= threshold : value < threshold;
    }
    i = go_left ? b->left : b->right;
  }
}

inline Leaf const& eval_tree_float(Tree const& tree, FeatureVector const& x) {
  return std::get<Leaf>(tree.nodes[eval_tree_float_index(tree, x)]);
}

inline FloatPrediction predict_float(Ensemble const& e, FeatureVector const& x) {
  detail::check_arity(e.num_features, x);
  FloatPrediction out;
  out.acc.sums.assign(e.num_classes, 0.0f);
  out.acc.exact.assign(e.num_classes, ExactSum{});
  for (auto const& tree : e.trees) {
    auto const& leaf = eval_tree_float(tree, x);
    for (std::size_t c = 0; c < e.num_classes; ++c) {
      out.acc.sums[c] += static_cast<float>(leaf.probs[c]);
      out.acc.exact[c].add(leaf.probs[c]);
    }
  }
  out.argmax = argmax(out.acc.sums);
  return out;
}

inline std::uint32_t eval_tree_int_index(QTree const& tree, FeatureVector const& x,
                                         std::vector<std::uint32_t>* path = nullptr) {
  std::uint32_t i = tree.root;
  for (;;) {
    if (path) path->push_back(i);
    auto const* b = std::get_if<QBranch>(&tree.nodes[i]);
    if (!b) return i;
    auto const word = x[b->feature];
    bool const go_left = is_nan_bits(word)
                             ? b->default_left
                             : compare_keys(flint_key_unchecked(word), b->key, b->op);
    i = go_left ? b->left : b->right;
  }
}

inline IntPrediction predict_int(QuantizedEnsemble const& q, FeatureVector const& x) {
  detail::check_arity(q.num_features, x);
  IntPrediction out;
  out.acc.assign(q.num_classes, 0u);
  for (auto const& tree : q.trees) {
    auto const& leaf = std::get<QLeaf>(tree.nodes[eval_tree_int_index(tree, x)]);
    for (std::size_t c = 0; c < q.num_classes; ++c) out.acc[c] += leaf.increments[c];
  }
  out.argmax = argmax(out.acc);
  return out;
}

inline std::vector<double> probabilities_from_int(std::span<std::uint32_t const> acc) {
  std::vector<double> out;
  out.reserve(acc.size());
  for (auto a : acc) out.push_back(std::ldexp(static_cast<double>(a), -32));
  return out;
}

inline std::vector<double> probabilities_from_int(std::vector<std::uint32_t> const& acc) {
  return probabilities_from_int(std::span<std::uint32_t const>(acc));
}

}  // namespace treegrate
