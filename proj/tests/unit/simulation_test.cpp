#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "cdrc/error.hpp"
#include "cdrc/learners.hpp"
#include "cdrc/simulation.hpp"

namespace cdrc {
namespace {

double column_mean(const Dataset& d, std::string_view name) {
  const auto col = d.column(d.index_of(name));
  double s = 0;
  std::size_t k = 0;
  for (double v : col)
    if (!std::isnan(v)) s += v, ++k;
  return s / static_cast<double>(k);
}

TEST(TruncNormal, FarAboveUsesUpperTail) {
  const TruncSpec spec{0, 0, 1, 10, 20, 30};
  FastRng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const double x = sample_trunc_normal(spec, 10 + 20, 1, rng);
    EXPECT_GE(x, 20);
    EXPECT_LE(x, 30);
  }
}

TEST(TruncNormal, WideBoundsArePlainNormal) {
  const TruncSpec spec{-1e300, 0, 0, 1e300, 0, 0};
  FastRng a(2), b(2);
  for (int i = 0; i < 100; ++i) {
    const double x = sample_trunc_normal(spec, 3, 2, a);
    const double z = b.normal();
    b.uniform();
    EXPECT_NEAR(x, 3 + 2 * z, 1e-12);
  }
}

TEST(TruncNormal, EfvRange) {
  const TruncSpec spec{0.2032, 0.2032, 0.88, 21, 8.376, 21};
  FastRng rng(3);
  for (int i = 0; i < 20000; ++i) {
    const double x = sample_trunc_normal(spec, 3, 4, rng);
    EXPECT_GE(x, 0.2032);
    EXPECT_LE(x, 21);
  }
}

TEST(Simulate, Sim1Structure) {
  const Dataset d = simulate(SystemId::sim1, 10000, 7);
  EXPECT_EQ(d.rows(), 10000u);
  EXPECT_EQ(d.cols(), 12u);
  EXPECT_NEAR(column_mean(d, "L1.0"), 0.3, 0.015);
  Eigen::MatrixXd X(10000, 2);
  Eigen::VectorXd y(10000);
  for (std::size_t i = 0; i < 10000; ++i) {
    X(static_cast<Eigen::Index>(i), 0) = d.at(i, d.index_of("L1.0"));
    X(static_cast<Eigen::Index>(i), 1) = d.at(i, d.index_of("L2.0"));
    y(static_cast<Eigen::Index>(i)) = d.at(i, d.treatment(0));
  }
  const LinearFit fit = fit_ols(X, y);
  EXPECT_NEAR(fit.intercept, 7, 0.05);
  EXPECT_NEAR(fit.coef(0), 1, 0.05);
  EXPECT_NEAR(fit.coef(1), 0.7, 0.05);
}

TEST(Simulate, Sim3TreatmentRange) {
  const Dataset d = simulate(SystemId::sim3, 10000, 8);
  for (int t = 0; t <= system_horizon(SystemId::sim3); ++t)
    for (double v : d.column(d.treatment(t))) {
      EXPECT_GE(v, 0.2032);
      EXPECT_LE(v, 21.84);
    }
}

TEST(Simulate, Sim2CensoringIsMonotone) {
  const Dataset d = simulate(SystemId::sim2, 3000, 9);
  for (std::size_t i = 0; i < d.rows(); ++i) {
    bool censored = false, event = false;
    for (int t = 0; t <= d.horizon(); ++t) {
      if (auto c = d.censoring(t)) {
        if (censored) EXPECT_TRUE(std::isnan(d.at(i, *c)));
        else if (d.at(i, *c) == 1.0) censored = true;
      }
      const double y = d.at(i, d.outcome(t));
      if (censored) {
        EXPECT_TRUE(std::isnan(y));
      } else {
        if (event) EXPECT_EQ(y, 1.0);
        if (y == 1.0) event = true;
      }
    }
  }
}

TEST(Simulate, SeedsAndPrefixes) {
  for (SystemId id : {SystemId::sim1, SystemId::sim2, SystemId::sim3}) {
    std::ostringstream a, b, c;
    write_dataset(simulate(id, 200, 5), a);
    write_dataset(simulate(id, 200, 5), b);
    EXPECT_EQ(a.str(), b.str());
    const Dataset big = simulate(id, 300, 5);
    write_dataset(big.select_rows(std::vector<std::size_t>([] {
                    std::vector<std::size_t> r(200);
                    for (std::size_t i = 0; i < 200; ++i) r[i] = i;
                    return r;
                  }())),
                  c);
    EXPECT_EQ(a.str(), c.str());
  }
  EXPECT_THROW(simulate(SystemId::sim1, 0, 1), ArgumentError);
  EXPECT_THROW(parse_system("sim4"), ArgumentError);
}

TEST(Simulate, ForcedObservedPathReproducesData) {
  for (SystemId id : {SystemId::sim1, SystemId::sim3}) {
    const Dataset d = simulate(id, 300, 6);
    std::vector<std::vector<double>> paths(d.rows());
    for (std::size_t i = 0; i < d.rows(); ++i)
      for (int t = 0; t <= d.horizon(); ++t) paths[i].push_back(d.at(i, d.treatment(t)));
    std::ostringstream a, b;
    write_dataset(d, a);
    write_dataset(simulate_intervened(id, paths, 6), b);
    EXPECT_EQ(a.str(), b.str());
  }
}

TEST(Truth, Sim1TimeZeroClosedForm) {
  const auto grid = default_grid(SystemId::sim1);
  const auto truth = counterfactual_truth(SystemId::sim1, grid, 200000, 3);
  for (std::size_t j = 0; j < grid.size(); ++j) {
    EXPECT_NEAR(truth.value(j, 0), 0.5 * grid.trajectory(j)[0] - 1.2, 0.01);
  }
}

TEST(Truth, Sim2MonotoneAtLastTime) {
  const auto grid = default_grid(SystemId::sim2);
  const auto truth = counterfactual_truth(SystemId::sim2, grid, 100000, 4);
  for (std::size_t j = 1; j < grid.size(); ++j) EXPECT_GE(truth.value(j, 4), truth.value(j - 1, 4) - 1e-12);
}

TEST(Truth, ThreadCountDoesNotMatter) {
  const auto grid = parse_grid_spec("0,5", 4);
  std::ostringstream a, b;
  write_curve_csv(counterfactual_truth(SystemId::sim3, grid, 20000, 5, 1), a);
  write_curve_csv(counterfactual_truth(SystemId::sim3, grid, 20000, 5, 4), b);
  EXPECT_EQ(a.str(), b.str());
}

TEST(Experiment, SingleReplicateEqualsSingleRun) {
  const auto grid = parse_grid_spec("3,9", 2);
  EstimatorConfig config;
  const ExperimentArm arms[] = {{"seq", config}};
  ExperimentOptions o;
  o.replicates = 1;
  o.n = 500;
  o.seed = 9;
  o.truth_draws = 5000;
  const auto report = run_experiment(SystemId::sim1, grid, arms, o);
  const Dataset d = simulate(SystemId::sim1, 500, derive_seed(9, 0));
  config.seed = derive_seed(derive_seed(9, 0), 0);
  const auto curve = estimate(d, grid, config).curve;
  for (const auto& row : report.rows) {
    EXPECT_EQ(row.mean, curve.value(row.trajectory, row.time));
    EXPECT_EQ(row.bias, row.mean - row.truth);
  }
}

}  // namespace
}  // namespace cdrc
