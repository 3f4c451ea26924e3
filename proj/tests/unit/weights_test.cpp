#include <gtest/gtest.h>

#include <cmath>

#include "cdrc/error.hpp"
#include "cdrc/random.hpp"
#include "cdrc/weights.hpp"

namespace cdrc {
namespace {

TEST(DefaultC, Formula) {
  EXPECT_NEAR(default_c(10000), 5.0 / (100.0 * std::log(2000.0)), 1e-15);
  EXPECT_NEAR(default_c(10000), 6.5783e-3, 2e-7);
  EXPECT_NEAR(default_c(500), 4.856e-2, 1e-5);
  EXPECT_THROW(default_c(5), ArgumentError);
}

TEST(WeightSimple, Branches) {
  auto r = weight_simple(0.5, 0.25, 0.01);
  EXPECT_EQ(r.weight, 1.0);
  EXPECT_EQ(r.branch, Branch::unit_weight);
  r = weight_simple(0.005, 0.5, 0.01);
  EXPECT_NEAR(r.weight, 0.01, 1e-15);
  EXPECT_EQ(r.branch, Branch::ratio);
  r = weight_simple(0.0, 0.0, 0.01);
  EXPECT_EQ(r.weight, 0.0);
  EXPECT_EQ(r.branch, Branch::ratio);
  EXPECT_TRUE(r.floored);
  r = weight_simple(0.005, 0.008, 0.01);
  EXPECT_TRUE(r.guard_failed);
  EXPECT_NEAR(r.weight, 0.625, 1e-15);
}

TEST(WeightFallback, Chain) {
  const double c1[] = {0.3, 0.2};
  EXPECT_EQ(weight_fallback(0.2, c1, 0.01).weight, 1.0);
  const double c2[] = {0.002, 0.05, 0.3};
  auto r = weight_fallback(0.004, c2, 0.01);
  EXPECT_NEAR(r.weight, 0.08, 1e-15);
  EXPECT_EQ(r.branch, Branch::fallback_level);
  EXPECT_EQ(r.level, 1);
  const double c3[] = {0.002, 0.003};
  r = weight_fallback(0.004, c3, 0.01);
  EXPECT_NEAR(r.weight, 0.004 / 0.003, 1e-12);
  EXPECT_EQ(r.branch, Branch::marginal_ratio);
  const double c4[] = {0.05, 0.3};
  EXPECT_EQ(weight_fallback(0.004, c4, 0.01).branch, Branch::ratio);
}

TEST(SingleTimepoint, Branches) {
  EXPECT_EQ(single_timepoint_weight(0.3, 0.2, 0.01).weight, 1.0);
  EXPECT_NEAR(single_timepoint_weight(0.005, 0.5, 0.01).weight, 0.01, 1e-15);
  EXPECT_EQ(single_timepoint_weight(0.005, 0.004, 0.01).branch, Branch::undefined);
}

TEST(WeightPlan, Validation) {
  EXPECT_THROW((WeightPlan{0.0}.validate()), ConfigError);
  EXPECT_THROW((WeightPlan{-1.0}.validate()), ConfigError);
  EXPECT_THROW((WeightPlan{0.1, WeightVariant::simple, 0.0}.validate()), ConfigError);
  EXPECT_NO_THROW((WeightPlan{0.1}.validate()));
}

TEST(WeightProperties, UnitBranchIffNumeratorAboveC) {
  FastRng rng(1);
  for (int k = 0; k < 2000; ++k) {
    const double num = rng.uniform() * 0.2, d0 = rng.uniform() * 0.2, d1 = rng.uniform() * 0.2;
    const double c = rng.uniform() * 0.1;
    const double chain[] = {d0, d1};
    for (auto variant : {WeightVariant::simple, WeightVariant::fallback}) {
      const auto r = compute_weight(WeightPlan{c, variant}, num, chain);
      EXPECT_EQ(r.branch == Branch::unit_weight, num > c);
      EXPECT_EQ(r.weight == 1.0 && r.branch == Branch::unit_weight, num > c);
      EXPECT_TRUE(std::isfinite(r.weight));
      EXPECT_GE(r.weight, 0.0);
    }
  }
}

TEST(WeightProperties, MonotoneInC) {
  FastRng rng(2);
  const double cs[] = {0.001, 0.01, 0.05, 0.2, 1.0};
  for (int k = 0; k < 500; ++k) {
    const double num = rng.uniform() * 0.5;
    const double chain[] = {rng.uniform() * 0.5, rng.uniform() * 0.5};
    bool off = false;
    for (double c : cs) {
      const bool now = compute_weight(WeightPlan{c}, num, chain).branch != Branch::unit_weight;
      EXPECT_TRUE(!off || now);
      off = now;
    }
  }
}

TEST(WeightProperties, RatioIsScaleConsistent) {
  const auto a = weight_simple(0.004, 0.02, 0.01);
  const auto b = weight_simple(0.002, 0.01, 0.01);
  EXPECT_EQ(a.branch, Branch::ratio);
  EXPECT_EQ(b.branch, Branch::ratio);
  EXPECT_NEAR(a.weight, b.weight, 1e-15);
}

TEST(WeightProperties, CAboveAllDensitiesGivesRatio) {
  const double chain[] = {0.4, 0.3};
  const auto r = compute_weight(WeightPlan{1.0, WeightVariant::simple}, 0.2, chain);
  EXPECT_EQ(r.branch, Branch::ratio);
  EXPECT_NEAR(r.weight, 0.5, 1e-15);
}

}  // namespace
}  // namespace cdrc
