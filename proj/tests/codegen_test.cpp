#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "test_support.hpp"
#include "treegrate/codegen.hpp"
#include "treegrate/verify.hpp"

namespace treegrate {
namespace {

bool contains(std::string const& hay, std::string const& needle) {
  return hay.find(needle) != std::string::npos;
}

Ensemble constant_forest(std::uint32_t n) {
  Ensemble e;
  e.model_id = "constant";
  e.num_features = 1;
  e.num_classes = 2;
  for (std::uint32_t t = 0; t < n; ++t) e.trees.push_back(Tree{{Leaf{{0.75, 0.25}}}, 0});
  return e;
}

Ensemble split_at(float threshold) {
  Ensemble e;
  e.model_id = "split";
  e.num_features = 2;
  e.num_classes = 2;
  Tree t;
  t.nodes.push_back(Branch{1, Threshold::from_float(threshold), CompareOp::kLE, false, 1, 2});
  t.nodes.push_back(Leaf{{0.75, 0.25}});
  t.nodes.push_back(Leaf{{0.1, 0.9}});
  e.trees.push_back(std::move(t));
  return e;
}

TEST(Emit, IntegerLeafIncrements) {
  auto const unit = emit(constant_forest(10), {});
  EXPECT_TRUE(contains(unit.source, "result[0] += 322122547u;"));
  EXPECT_TRUE(contains(unit.source, "result[1] += 107374182u;"));
  EXPECT_TRUE(contains(unit.source, "void predict(const uint32_t features[1], uint32_t result[2])"));
  EXPECT_TRUE(contains(unit.source, "(void)features;"));
}

TEST(Emit, FloatLeafLiterals) {
  EmitConfig cfg;
  cfg.mode = EmitMode::kFloat;
  auto const unit = emit(constant_forest(10), cfg);
  EXPECT_TRUE(contains(unit.source, "result[0] += (float)0.75;"));
  EXPECT_TRUE(contains(unit.source, "result[1] += (float)0.25;"));
  EXPECT_TRUE(contains(unit.source, "void predict(const float features[1], float result[2])"));
}

TEST(Emit, NonnegFastComparesRawBits) {
  EmitConfig cfg;
  cfg.nonneg_fast = true;
  cfg.feature_min = std::vector<float>{0.0f, 0.0f};
  auto const unit = emit(split_at(87.5f), cfg);
  EXPECT_TRUE(contains(unit.source, "w1 <= 0x42AF0000u"));
  EXPECT_FALSE(contains(unit.source, "_key("));
}

TEST(Emit, KeyedComparisonUsesFlintKey) {
  auto const pos = emit(split_at(87.5f), {}).source;
  EXPECT_TRUE(contains(pos, "k1 <= 0x42AF0000"));
  auto const neg = emit(split_at(-1.0f), {}).source;
  EXPECT_TRUE(contains(neg, "k1 <= (-1065353217)"));
  EXPECT_TRUE(contains(neg, "!m1 && "));
}

TEST(Emit, IntegerModeHasNoFloatingPointTokens) {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    RandomEnsembleSpec spec;
    spec.num_features = 1 + static_cast<std::uint32_t>(seed % 6);
    spec.num_classes = 2 + static_cast<std::uint32_t>(seed % 4);
    spec.num_trees = 1 + static_cast<std::uint32_t>(seed * 7 % 30);
    spec.max_depth = static_cast<std::uint32_t>(seed % 7);
    auto const e = random_ensemble(spec, seed);
    EmitConfig cfg;
    cfg.emit_argmax_helper = seed % 2 == 0;
    auto const tokens = testing::c_float_tokens(emit(e, cfg).source);
    EXPECT_TRUE(tokens.empty()) << "seed " << seed << ": " << tokens.front();
  }
}

TEST(FloatTokenScanner, FindsFloatingConstructs) {
  using testing::c_float_tokens;
  EXPECT_EQ(c_float_tokens("x = 1.5;"), std::vector<std::string>{"1.5"});
  EXPECT_EQ(c_float_tokens("x = 1e3;"), std::vector<std::string>{"1e3"});
  EXPECT_EQ(c_float_tokens("x = 0x1p-3;"), std::vector<std::string>{"0x1p-3"});
  EXPECT_EQ(c_float_tokens("double d;"), std::vector<std::string>{"double"});
  EXPECT_TRUE(c_float_tokens("x = 0x7F800000u; /* 1.5 float */ s = \"2.5\";").empty());
  EXPECT_TRUE(c_float_tokens("x = 0xE5u + 0xFEu;").empty());
}

TEST(CheckNonneg, Examples) {
  std::vector<float> const zeros{0.0f, 0.0f};
  EXPECT_TRUE(check_nonneg(split_at(87.5f), std::span<float const>(zeros)));
  EXPECT_TRUE(check_nonneg(split_at(0.0f), std::span<float const>(zeros)));
  EXPECT_FALSE(check_nonneg(split_at(-1.0f), std::span<float const>(zeros)));
  EXPECT_FALSE(check_nonneg(split_at(87.5f), std::nullopt));
  std::vector<float> const neg_zero{0.0f, -0.0f};
  EXPECT_FALSE(check_nonneg(split_at(87.5f), std::span<float const>(neg_zero)));
  std::vector<float> const negative{0.0f, -3.0f};
  EXPECT_FALSE(check_nonneg(split_at(87.5f), std::span<float const>(negative)));
  std::vector<float> const short_domain{0.0f};
  EXPECT_FALSE(check_nonneg(split_at(87.5f), std::span<float const>(short_domain)));
}

TEST(Emit, ConfigErrors) {
  EmitConfig bad_name;
  bad_name.function_name = "2fast";
  EXPECT_THROW(emit(split_at(1.0f), bad_name), ConfigError);
  bad_name.function_name = "int";
  EXPECT_THROW(emit(split_at(1.0f), bad_name), ConfigError);

  EmitConfig undeclared;
  undeclared.nonneg_fast = true;
  EXPECT_THROW(emit(split_at(1.0f), undeclared), ConfigError);

  EmitConfig negative_threshold;
  negative_threshold.nonneg_fast = true;
  negative_threshold.feature_min = std::vector<float>{0.0f, 0.0f};
  EXPECT_THROW(emit(split_at(-1.0f), negative_threshold), ConfigError);

  EmitConfig wrong_size;
  wrong_size.feature_min = std::vector<float>{0.0f};
  EXPECT_THROW(emit(split_at(1.0f), wrong_size), ConfigError);
}

TEST(Emit, RejectsInvalidModel) {
  auto e = split_at(1.0f);
  std::get<Leaf>(e.trees[0].nodes[1]).probs = {0.9, 0.9};
  EXPECT_THROW(emit(e, {}), ModelError);
}

TEST(Emit, ByteIdenticalAcrossRuns) {
  auto const e = random_ensemble({.num_features = 5, .num_classes = 3, .num_trees = 20}, 99);
  for (auto mode : {EmitMode::kFloat, EmitMode::kFlint, EmitMode::kInteger}) {
    EmitConfig cfg;
    cfg.mode = mode;
    auto const a = emit(e, cfg);
    auto const b = emit(e, cfg);
    EXPECT_EQ(a.source, b.source);
    EXPECT_EQ(a.manifest.digest, b.manifest.digest);
  }
}

TEST(Emit, HeaderDescribesUnit) {
  auto e = constant_forest(3);
  e.model_id = "iris */ evil";
  auto const unit = emit(e, {});
  EXPECT_TRUE(contains(unit.source, " * format: treegrate-c/1\n"));
  EXPECT_TRUE(contains(unit.source, " * model_id: iris _/ evil\n"));
  EXPECT_TRUE(contains(unit.source, " * mode: integer\n"));
  EXPECT_TRUE(contains(unit.source, " * trees: 3\n"));
  EXPECT_TRUE(contains(unit.source, " * " + unit.manifest.digest + "\n") ||
              contains(unit.source, "digest: " + unit.manifest.digest));
  EXPECT_EQ(unit.manifest.num_trees, 3u);
  EXPECT_EQ(unit.manifest.num_classes, 2u);
  EXPECT_EQ(unit.source.find("#include"), unit.source.find("#include <stdint.h>"));
  EXPECT_EQ(unit.source.find("#include", unit.source.find("#include") + 1), std::string::npos);
}

TEST(Emit, ArgmaxHelper) {
  EmitConfig cfg;
  cfg.emit_argmax_helper = true;
  cfg.function_name = "iris";
  auto const src = emit(constant_forest(2), cfg).source;
  EXPECT_TRUE(contains(src, "int iris_argmax(const uint32_t result[2])"));
  EXPECT_TRUE(contains(src, "if (result[c] > result[best]) best = c;"));
}

// Compilation checks run only when a C compiler was configured.
class CompiledTest : public ::testing::Test {
 protected:
  void SetUp() override {
    cc_ = testing::toolchain();
    if (!cc_) GTEST_SKIP() << "TREEGRATE_CC not set";
    auto pattern = (std::filesystem::temp_directory_path() / "treegrate-test-XXXXXX").string();
    ASSERT_NE(::mkdtemp(pattern.data()), nullptr);
    dir_ = pattern;
  }
  void TearDown() override {
    if (!dir_.empty()) std::filesystem::remove_all(dir_);
  }

  std::filesystem::path write(std::string const& name, std::string const& text) {
    auto const p = dir_ / name;
    std::ofstream(p) << text;
    return p;
  }

  int sh(std::string const& cmd) { return std::system(cmd.c_str()); }

  std::string read(std::filesystem::path const& p) {
    std::ifstream in(p);
    return {std::istreambuf_iterator<char>(in), {}};
  }

  std::string run_harness(Ensemble const& e, EmitConfig const& cfg, std::vector<FeatureVector> const& xs,
                          std::uint64_t replications) {
    auto const model = write("model.c", emit(e, cfg).source);
    auto const harness = write("harness.c", emit_harness(e, cfg, xs, replications));
    auto const exe = dir_ / "harness";
    auto const out = dir_ / "out.txt";
    EXPECT_EQ(sh(*cc_ + " -std=c99 -O2 -o " + exe.string() + " " + model.string() + " " +
                 harness.string()),
              0);
    EXPECT_EQ(sh(exe.string() + " > " + out.string()), 0);
    return read(out);
  }

  std::optional<std::string> cc_;
  std::filesystem::path dir_;
};

TEST_F(CompiledTest, FreestandingPedanticClean) {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    auto const e = random_ensemble({.num_features = 3, .num_classes = 3, .num_trees = 8, .max_depth = 5}, seed);
    std::vector<EmitConfig> cfgs(3);
    cfgs[0].mode = EmitMode::kFloat;
    cfgs[1].mode = EmitMode::kFlint;
    cfgs[2].emit_argmax_helper = true;
    for (auto const& cfg : cfgs) {
      auto const src = write("unit.c", emit(e, cfg).source);
      EXPECT_EQ(sh(*cc_ + " -std=c99 -ffreestanding -Wall -Wextra -pedantic -Werror -c -o " +
                   (dir_ / "unit.o").string() + " " + src.string()),
                0)
          << "seed " << seed << " mode " << to_string(cfg.mode);
    }
  }
  // Single-leaf model: no feature reads at all.
  auto const src = write("leaf.c", emit(constant_forest(1), {}).source);
  EXPECT_EQ(sh(*cc_ + " -std=c99 -ffreestanding -Wall -Wextra -pedantic -Werror -c -o " +
               (dir_ / "leaf.o").string() + " " + src.string()),
            0);
}

TEST_F(CompiledTest, HarnessVectorCounts) {
  auto const e = split_at(87.5f);
  EXPECT_EQ(run_harness(e, {}, {}, 1), "");
  FeatureVector const x{float_bits(0.0f), float_bits(3.0f)};
  auto const one = run_harness(e, {}, {x}, 1);
  EXPECT_EQ(one, std::to_string(quantize_prob(0.75, 1)) + " " + std::to_string(quantize_prob(0.25, 1)) + "\n");
  EXPECT_EQ(run_harness(e, {}, {x}, 10000), one);  // result is zeroed per call
}

TEST_F(CompiledTest, MissingAndSignedZeroInputs) {
  auto const e = split_at(0.0f);
  std::vector<FeatureVector> xs;
  for (std::uint32_t w : {0x00000000u, 0x80000000u, 0x00000001u, 0x80000001u, 0x7FC00000u, 0xFFC00000u,
                          0x7F800001u, 0x7F800000u, 0xFF800000u}) {
    xs.push_back({0u, w});
  }
  for (auto mode : {EmitMode::kFloat, EmitMode::kFlint, EmitMode::kInteger}) {
    EmitConfig cfg;
    cfg.mode = mode;
    auto const report = compile_and_compare(e, cfg, *cc_, xs);
    EXPECT_EQ(report.status, "ok");
    EXPECT_EQ(report.compiled_diff, 0u) << to_string(mode);
  }
}

}  // namespace
}  // namespace treegrate
