#include <gtest/gtest.h>

#include <cmath>
#include <cstdint>
#include <vector>

#include "test_support.hpp"
#include "treegrate/interp.hpp"
#include "treegrate/quantize.hpp"
#include "treegrate/verify.hpp"

namespace treegrate {
namespace {

// x0 <= 87.5 ? A : B
Ensemble depth_one(bool default_left, CompareOp op = CompareOp::kLE) {
  Ensemble e;
  e.model_id = "d1";
  e.num_features = 1;
  e.num_classes = 2;
  Tree t;
  t.nodes.push_back(Branch{0, Threshold::from_float(87.5f), op, default_left, 1, 2});
  t.nodes.push_back(Leaf{{0.2717557251908397, 0.7282442748091603}});
  t.nodes.push_back(Leaf{{0.9, 0.1}});
  e.trees.push_back(std::move(t));
  return e;
}

Ensemble uniform_forest(std::uint32_t n, std::vector<double> probs) {
  Ensemble e;
  e.model_id = "uniform";
  e.num_features = 1;
  e.num_classes = static_cast<std::uint32_t>(probs.size());
  for (std::uint32_t t = 0; t < n; ++t) e.trees.push_back(Tree{{Leaf{probs}}, 0});
  return e;
}

FeatureVector x1(float v) { return {float_bits(v)}; }

TEST(EvalTreeFloat, FollowsComparison) {
  auto const e = depth_one(false);
  EXPECT_EQ(eval_tree_float_index(e.trees[0], x1(3.0f)), 1u);
  EXPECT_EQ(eval_tree_float_index(e.trees[0], x1(87.5f)), 1u);  // LE boundary inclusive
  EXPECT_EQ(eval_tree_float_index(e.trees[0], x1(100.0f)), 2u);
  EXPECT_EQ(eval_tree_float_index(e.trees[0], {0x7FC00000u}), 2u);  // missing, default right
  EXPECT_EQ(eval_tree_float_index(depth_one(true).trees[0], {0x7FC00000u}), 1u);
  EXPECT_EQ(eval_tree_float_index(depth_one(false, CompareOp::kLT).trees[0], x1(87.5f)), 2u);
}

TEST(PredictFloat, ListingLeaf) {
  auto const p = predict_float(depth_one(false), x1(3.0f));
  EXPECT_EQ(p.argmax, 1u);
  EXPECT_EQ(p.acc.sums[0], static_cast<float>(0.2717557251908397));
}

TEST(PredictFloat, TieGoesToLowestClass) {
  Ensemble e = uniform_forest(1, {1.0, 0.0});
  e.trees.push_back(Tree{{Leaf{{0.0, 1.0}}}, 0});
  auto const p = predict_float(e, x1(0.0f));
  EXPECT_EQ(p.acc.sums, (std::vector<float>{1.0f, 1.0f}));
  EXPECT_EQ(p.argmax, 0u);
}

TEST(PredictFloat, IdenticalLeavesAverage) {
  auto const e = uniform_forest(10, {0.75, 0.25});
  auto const p = predict_float(e, x1(0.0f));
  auto const probs = p.probabilities(10);
  EXPECT_NEAR(probs[0], 0.75, 1e-6);
  EXPECT_NEAR(probs[1], 0.25, 1e-6);
  EXPECT_EQ(p.argmax, 0u);
  EXPECT_EQ(p.acc.exact[0].to_double(), 7.5);
}

TEST(PredictInt, TenTreeWorkedExample) {
  auto const q = quantize_ensemble(uniform_forest(10, {0.75, 0.25})).model;
  auto const p = predict_int(q, x1(0.0f));
  EXPECT_EQ(p.acc, (std::vector<std::uint32_t>{10u * 322122547u, 10u * 107374182u}));
  EXPECT_EQ(p.acc, (std::vector<std::uint32_t>{3221225470u, 1073741820u}));
  EXPECT_EQ(p.argmax, 0u);
}

TEST(PredictInt, SingleLeafClamps) {
  auto const q = quantize_ensemble(uniform_forest(1, {1.0, 0.0})).model;
  auto const p = predict_int(q, x1(0.0f));
  EXPECT_EQ(p.acc, (std::vector<std::uint32_t>{4294967295u, 0u}));
  EXPECT_EQ(p.argmax, 0u);
}

TEST(PredictInt, RejectsWrongArity) {
  auto const q = quantize_ensemble(depth_one(true)).model;
  EXPECT_THROW(predict_int(q, {}), InputError);
  EXPECT_THROW(predict_float(depth_one(true), {1u, 2u}), InputError);
}

TEST(ProbabilitiesFromInt, ScaleDefinition) {
  auto const a = probabilities_from_int(std::vector<std::uint32_t>{4294967295u, 0u});
  EXPECT_EQ(a[0], 1.0 - 0x1p-32);
  EXPECT_EQ(a[1], 0.0);
  auto const b = probabilities_from_int(std::vector<std::uint32_t>{3221225470u, 1073741820u});
  EXPECT_LT(std::fabs(b[0] - 0.75), 10 * 0x1p-32);
  EXPECT_LT(std::fabs(b[1] - 0.25), 10 * 0x1p-32);
  EXPECT_LT(b[0], 0.75);
  EXPECT_EQ(probabilities_from_int(std::vector<std::uint32_t>{0u, 0u, 0u}),
            (std::vector<double>{0.0, 0.0, 0.0}));
}

TEST(ExactSum, MatchesRationalOracle) {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    ExactSum sum;
    mpq_class oracle = 0;
    auto const terms = 1 + rng.below(300);
    for (std::uint64_t i = 0; i < terms; ++i) {
      double const p = rng.chance(0.1) ? std::ldexp(rng.unit(), -1000 - static_cast<int>(rng.below(70)))
                                       : rng.unit();
      sum.add(p);
      oracle += mpq_class(p);
    }
    mpq_class const scaled = oracle * mpq_class(mpz_class(1) << ExactSum::kFracBits);
    ASSERT_EQ(scaled.get_den(), 1);
    EXPECT_EQ(sum.scaled().str(), scaled.get_num().get_str());
  }
}

TEST(ExactSum, OrdersLikeValues) {
  ExactSum a, b;
  a.add(0.5);
  b.add(0.25);
  b.add(0.25 + 0x1p-50);
  EXPECT_LT(a, b);
  EXPECT_THROW(a.add(-1.0), DomainError);
}

// Independent oracle: exact mean via GMP rationals over the leaves the float walker reaches.
TEST(PredictInt, ErrorBoundAgainstRationalMean) {
  for (std::uint32_t n : {1u, 3u, 10u, 64u}) {
    auto const e = random_ensemble({.num_features = 4, .num_classes = 3, .num_trees = n, .max_depth = 5}, n);
    auto const q = quantize_ensemble(e).model;
    InputGenerator gen(e, UniformRange{});
    for (std::uint64_t s = 0; s < 300; ++s) {
      auto const x = gen.sample(17, s);
      auto const ip = predict_int(q, x);
      for (std::size_t c = 0; c < e.num_classes; ++c) {
        mpq_class mean = 0;
        for (auto const& tree : e.trees) mean += mpq_class(eval_tree_float(tree, x).probs[c]);
        mean /= n;
        mpq_class const diff = mean * mpq_class(mpz_class(1) << 32) - mpq_class(ip.acc[c]);
        EXPECT_GE(diff, 0);
        EXPECT_LT(diff, n);
      }
    }
  }
}

TEST(PredictInt, MissingPathsMatchFloatTraversal) {
  auto const e = random_ensemble({.num_features = 3, .num_classes = 2, .num_trees = 20, .max_depth = 6}, 4);
  auto const q = quantize_ensemble(e).model;
  InputGenerator gen(e, UniformRange{.nan_rate = 0.3, .boundary_rate = 0.2});
  for (std::uint64_t s = 0; s < 500; ++s) {
    auto const x = gen.sample(3, s);
    for (std::size_t t = 0; t < e.trees.size(); ++t) {
      std::vector<std::uint32_t> float_path, int_path;
      eval_tree_float_index(e.trees[t], x, &float_path);
      eval_tree_int_index(q.trees[t], x, &int_path);
      ASSERT_EQ(float_path, int_path);
    }
  }
}

TEST(PredictInt, NegativeZeroFeatureMatchesFloat) {
  Ensemble e = depth_one(false, CompareOp::kLT);
  std::get<Branch>(e.trees[0].nodes[0]).threshold = Threshold::from_float(0.0f);
  auto const q = quantize_ensemble(e).model;
  for (float v : {-0.0f, 0.0f, -1e-45f, 1e-45f}) {
    std::vector<std::uint32_t> fp, ip;
    eval_tree_float_index(e.trees[0], x1(v), &fp);
    eval_tree_int_index(q.trees[0], x1(v), &ip);
    EXPECT_EQ(fp, ip) << v;
  }
}

TEST(Predict, Deterministic) {
  auto const e = random_ensemble({.num_trees = 30}, 8);
  auto const q = quantize_ensemble(e).model;
  InputGenerator gen(e, UniformRange{});
  auto const x = gen.sample(1, 1);
  EXPECT_EQ(predict_int(q, x).acc, predict_int(q, x).acc);
  EXPECT_EQ(predict_float(e, x).acc.sums, predict_float(e, x).acc.sums);
}

}  // namespace
}  // namespace treegrate
