#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "cdrc/error.hpp"
#include "cdrc/gcomp.hpp"
#include "cdrc/random.hpp"
#include "cdrc/simulation.hpp"
#include "toy_system.hpp"

namespace cdrc {
namespace {

EstimatorConfig sequential() {
  EstimatorConfig c;
  c.estimand = Estimand::cdrc_sequential;
  return c;
}

EstimatorConfig weighted(double c, WeightVariant v = WeightVariant::fallback) {
  EstimatorConfig config;
  config.estimand = Estimand::weighted;
  config.weights = WeightPlan{c, v};
  return config;
}

// L_0 ~ N(0,1); A_0 ~ N(1 + 0.5 L_0, 1); L_1 ~ N(0.3 A_0, 1); A_1 ~ N(0.5 A_0 + 0.5 L_1, 1);
// Y_t linear in the past.
Dataset two_period(std::size_t n, std::uint64_t seed, bool binary_y = false) {
  FastRng rng(seed);
  std::vector<Dataset::Column> cols(6);
  for (std::size_t i = 0; i < n; ++i) {
    const double l0 = rng.normal();
    const double a0 = 1 + 0.5 * l0 + rng.normal();
    double y0 = l0 + 0.5 * a0 + rng.normal();
    const double l1 = 0.3 * a0 + rng.normal();
    const double a1 = 0.5 * a0 + 0.5 * l1 + rng.normal();
    double y1 = 0.5 * y0 + l1 + 0.5 * a1 + rng.normal();
    if (binary_y) {
      y0 = 0.0;
      y1 = rng.uniform() < 1 / (1 + std::exp(-(l1 + 0.3 * a1 - 0.5))) ? 1.0 : 0.0;
    }
    const double v[6] = {l0, a0, y0, l1, a1, y1};
    for (int k = 0; k < 6; ++k) cols[static_cast<std::size_t>(k)].values.push_back(v[k]);
  }
  const auto yk = binary_y ? ValueKind::binary : ValueKind::continuous;
  std::vector<ColumnRole> schema{{"L_0", Role::time_covariate, 0, ValueKind::continuous},
                                 {"A_0", Role::treatment, 0, ValueKind::continuous},
                                 {"Y_0", Role::outcome, 0, yk},
                                 {"L_1", Role::time_covariate, 1, ValueKind::continuous},
                                 {"A_1", Role::treatment, 1, ValueKind::continuous},
                                 {"Y_1", Role::outcome, 1, yk}};
  return Dataset(schema, cols);
}

TEST(Sequential, SinglePeriodIsRegression) {
  FastRng rng(1);
  std::vector<Dataset::Column> cols(2);
  for (int i = 0; i < 300; ++i) {
    const double a = rng.normal();
    cols[0].values.push_back(a);
    cols[1].values.push_back(2 - a + rng.normal());
  }
  const Dataset d({{"A_0", Role::treatment, 0, ValueKind::continuous}, {"Y_0", Role::outcome, 0, ValueKind::continuous}},
                  cols);
  const std::vector<double> grid{-1, 0, 1.5};
  const auto curve = estimate_cdrc_sequential(d, constant_grid(grid, 0), sequential());
  Eigen::MatrixXd X(300, 1);
  Eigen::VectorXd y(300);
  for (int i = 0; i < 300; ++i) {
    X(i, 0) = cols[0].values[static_cast<std::size_t>(i)];
    y(i) = cols[1].values[static_cast<std::size_t>(i)];
  }
  const LinearFit fit = fit_ols(X, y);
  for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(curve.value(j, 0), fit.intercept + fit.coef(0) * grid[j], 1e-10);
}

TEST(Sequential, PointMassTreatmentGivesObservedMean) {
  FastRng rng(2);
  std::vector<Dataset::Column> cols(3);
  double sum = 0;
  for (int i = 0; i < 200; ++i) {
    const double l = rng.normal();
    const double y = l + rng.normal();
    cols[0].values.push_back(l);
    cols[1].values.push_back(5.0);
    cols[2].values.push_back(y);
    sum += y;
  }
  const Dataset d({{"L", Role::baseline_covariate, std::nullopt, ValueKind::continuous},
                   {"A_0", Role::treatment, 0, ValueKind::continuous},
                   {"Y_0", Role::outcome, 0, ValueKind::continuous}},
                  cols);
  const std::vector<double> grid{5.0};
  EXPECT_NEAR(estimate_cdrc_sequential(d, constant_grid(grid, 0), sequential()).value(0, 0), sum / 200, 1e-10);
}

TEST(Sequential, AuditCountsOneRegressionPerStage) {
  const Dataset d = two_period(500, 3);
  const std::vector<double> grid{0.5, 1.5};
  for (auto config : {sequential(), weighted(0.05)}) {
    const auto result = estimate(d, constant_grid(grid, 1), config);
    ASSERT_EQ(result.audit.size(), 4u);
    for (const auto& a : result.audit) {
      EXPECT_EQ(a.outcome_regressions, a.time + 1);
      if (config.estimand == Estimand::weighted) EXPECT_EQ(a.weight_computations, a.time + 1);
    }
  }
}

TEST(Sequential, SeededDeterminism) {
  const Dataset d = two_period(400, 4);
  EstimatorConfig config = weighted(0.1);
  config.outcome.stack.kinds = {LearnerKind::ols, LearnerKind::lasso, LearnerKind::stumps};
  const std::vector<double> grid{0, 1, 2};
  std::ostringstream a, b;
  write_curve_csv(estimate(d, constant_grid(grid, 1), config).curve, a);
  write_curve_csv(estimate(d, constant_grid(grid, 1), config).curve, b);
  EXPECT_EQ(a.str(), b.str());
}

TEST(Weighted, TinyCEqualsSequentialBitForBit) {
  const Dataset d = two_period(500, 5);
  const std::vector<double> grid{0, 1, 2};
  const auto g = constant_grid(grid, 1);
  EstimatorConfig w = weighted(1e-300);
  const auto a = estimate(d, g, sequential()).curve;
  const auto b = estimate(d, g, w).curve;
  for (std::size_t k = 0; k < a.points.size(); ++k) EXPECT_EQ(a.points[k].value, b.points[k].value);
}

TEST(Weighted, HugeCFlagsUndefinedButStaysFinite) {
  const Dataset d = two_period(500, 6);
  const std::vector<double> grid{-3, 1, 5};
  const auto curve = estimate(d, constant_grid(grid, 1), weighted(5.0)).curve;
  for (const auto& p : curve.points) {
    EXPECT_TRUE(p.undefined);
    EXPECT_TRUE(std::isfinite(p.value));
  }
}

TEST(Weighted, PlacementsAgreeWithSaturatedFits) {
  // On the toy system the saturated regression reproduces cell means, so
  // weighting the outcome or the prediction gives the same curve.
  const auto sys = testing::ToySystem::standard();
  const Dataset d = sys.dataset();
  const InterventionGrid g({{1, 2}, {3, 1}});
  EstimatorConfig config = weighted(0.3);
  config.outcome.basis = Basis::saturated;
  config.density.strategy = DensityStrategy::binning;
  config.density.basis = Basis::saturated;
  config.density.edges = {0.5, 1.5, 2.5, 3.5};
  const auto a = estimate(d, g, config).curve;
  config.placement = WeightPlacement::prediction;
  const auto b = estimate(d, g, config).curve;
  for (std::size_t k = 0; k < a.points.size(); ++k) EXPECT_NEAR(a.points[k].value, b.points[k].value, 1e-8);
}

TEST(Weighted, ToySystemMatchesEnumerationAtMidC) {
  const auto sys = testing::ToySystem::standard();
  const Dataset d = sys.dataset();
  const InterventionGrid g({{2, 3}, {3, 2}});
  EstimatorConfig config = weighted(0.3);
  config.outcome.basis = Basis::saturated;
  config.density.strategy = DensityStrategy::binning;
  config.density.basis = Basis::saturated;
  config.density.edges = {0.5, 1.5, 2.5, 3.5};
  config.stage0_mean = Stage0Mean::population;
  const auto curve = estimate(d, g, config).curve;
  for (std::size_t j = 0; j < 2; ++j)
    for (int t = 0; t <= 1; ++t) {
      const auto e = testing::enumerate_weighted(sys, static_cast<int>(g.trajectory(j)[0]) - 1,
                                                 static_cast<int>(g.trajectory(j)[1]) - 1, t, 0.3,
                                                 WeightVariant::fallback);
      EXPECT_NEAR(curve.value(j, t), e.value, 1e-6);
    }
}

TEST(Survival, NoPriorEventsMatchesWeighted) {
  const Dataset d = two_period(600, 7, true);
  const std::vector<double> grid{0, 1, 2};
  const auto g = constant_grid(grid, 1);
  EstimatorConfig config = weighted(0.1);
  const auto a = estimate(d, g, config).curve;
  config.survival = true;
  const auto b = estimate(d, g, config).curve;
  for (std::size_t k = 0; k < a.points.size(); ++k) EXPECT_NEAR(a.points[k].value, b.points[k].value, 1e-12);
}

TEST(Survival, EventsAtStartCarryForward) {
  FastRng rng(8);
  std::vector<Dataset::Column> cols(4);
  for (int i = 0; i < 100; ++i) {
    cols[0].values.push_back(rng.normal());
    cols[1].values.push_back(1.0);
    cols[2].values.push_back(rng.normal());
    cols[3].values.push_back(1.0);
  }
  const Dataset d({{"A_0", Role::treatment, 0, ValueKind::continuous},
                   {"Y_0", Role::outcome, 0, ValueKind::binary},
                   {"A_1", Role::treatment, 1, ValueKind::continuous},
                   {"Y_1", Role::outcome, 1, ValueKind::binary}},
                  cols);
  const std::vector<double> grid{0, 1};
  EstimatorConfig config = sequential();
  config.survival = true;
  config.times = {1};
  const auto curve = estimate(d, constant_grid(grid, 1), config).curve;
  for (const auto& p : curve.points) EXPECT_NEAR(p.value, 1.0, 1e-12);
}

TEST(Parametric, LinearGaussianClosedForm) {
  // L ~ N(1, 1), A ~ N(L, 1), Y = 2 + 1.5 A + 0.5 L + e, so E(Y^a) = 2 + 1.5 a + 0.5.
  FastRng rng(9);
  std::vector<Dataset::Column> cols(3);
  for (int i = 0; i < 5000; ++i) {
    const double l = 1 + rng.normal();
    const double a = l + rng.normal();
    cols[0].values.push_back(l);
    cols[1].values.push_back(a);
    cols[2].values.push_back(2 + 1.5 * a + 0.5 * l + rng.normal());
  }
  const Dataset d({{"L_0", Role::time_covariate, 0, ValueKind::continuous},
                   {"A_0", Role::treatment, 0, ValueKind::continuous},
                   {"Y_0", Role::outcome, 0, ValueKind::continuous}},
                  cols);
  EstimatorConfig config = sequential();
  config.estimand = Estimand::cdrc_parametric;
  config.monte_carlo_draws = 20000;
  const std::vector<double> grid{0, 2};
  const auto curve = estimate(d, constant_grid(grid, 0), config).curve;
  EXPECT_NEAR(curve.value(0, 0), 2.5, 0.08);
  EXPECT_NEAR(curve.value(1, 0), 5.5, 0.08);
}

TEST(Parametric, NullEffectIsFlat) {
  FastRng rng(10);
  std::vector<Dataset::Column> cols(3);
  double sum = 0;
  for (int i = 0; i < 2000; ++i) {
    const double l = rng.normal();
    const double y = 1 + l + rng.normal();
    cols[0].values.push_back(l);
    cols[1].values.push_back(rng.normal());
    cols[2].values.push_back(y);
    sum += y;
  }
  const Dataset d({{"L_0", Role::time_covariate, 0, ValueKind::continuous},
                   {"A_0", Role::treatment, 0, ValueKind::continuous},
                   {"Y_0", Role::outcome, 0, ValueKind::continuous}},
                  cols);
  EstimatorConfig config = sequential();
  config.estimand = Estimand::cdrc_parametric;
  config.monte_carlo_draws = 10000;
  const std::vector<double> grid{-2, 0, 2};
  const auto curve = estimate(d, constant_grid(grid, 0), config).curve;
  for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(curve.value(j, 0), sum / 2000, 0.05 + 3 * std::sqrt(2.0 / 10000));
}

TEST(Config, WeightedNeedsPlan) {
  EstimatorConfig config = sequential();
  config.estimand = Estimand::weighted;
  EXPECT_THROW(config.validate(), ConfigError);
  EXPECT_THROW(parse_weight_placement("middle"), ArgumentError);
  EXPECT_THROW(parse_denominator_source("x"), ArgumentError);
  EXPECT_THROW(parse_stage0_mean("x"), ArgumentError);
}

}  // namespace
}  // namespace cdrc
