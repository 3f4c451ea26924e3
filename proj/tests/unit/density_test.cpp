#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "cdrc/density.hpp"
#include "cdrc/error.hpp"
#include "cdrc/random.hpp"
#include "cdrc/simulation.hpp"

namespace cdrc {
namespace {

// One baseline covariate X, treatment A ~ N(mean_a + slope * X, 1), outcome Y.
Dataset one_period(std::size_t n, double slope, std::uint64_t seed, double mean_a = 0.0) {
  FastRng rng(seed);
  std::vector<Dataset::Column> cols(3);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = rng.normal();
    const double a = mean_a + slope * x + rng.normal();
    cols[0].values.push_back(x);
    cols[1].values.push_back(a);
    cols[2].values.push_back(a + x + rng.normal());
  }
  std::vector<ColumnRole> schema{{"X", Role::baseline_covariate, std::nullopt, ValueKind::continuous},
                                 {"A_0", Role::treatment, 0, ValueKind::continuous},
                                 {"Y_0", Role::outcome, 0, ValueKind::continuous}};
  return Dataset(schema, cols);
}

std::vector<std::size_t> all_rows(const Dataset& d) {
  std::vector<std::size_t> r(d.rows());
  std::iota(r.begin(), r.end(), 0);
  return r;
}

TEST(Density, IndependentStandardNormalAtZero) {
  const Dataset d = one_period(10000, 0.0, 1);
  const RawFrame raw = raw_frame(d);
  const auto rows = all_rows(d);
  const DensityModel g(d, raw, d.treatment(0), {0}, rows, DensityOptions{});
  const std::vector<std::size_t> one{0};
  EXPECT_NEAR(g.evaluate(raw, one, 0.0)[0], 0.3989, 0.02);
}

TEST(Density, MarginalGaussianMatchesSampleMoments) {
  const Dataset d = one_period(2000, 0.5, 2, 3.0);
  const RawFrame raw = raw_frame(d);
  const auto rows = all_rows(d);
  const DensityModel g(d, raw, d.treatment(0), {}, rows, DensityOptions{});
  const auto a = d.column(d.treatment(0));
  const double mean = std::accumulate(a.begin(), a.end(), 0.0) / a.size();
  double ss = 0;
  for (double v : a) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / (a.size() - 1));
  EXPECT_NEAR(g.means(raw, rows)(0), mean, 1e-10);
  EXPECT_NEAR(g.sigma(), sd, 1e-10);
}

TEST(Density, Sim1TreatmentAtSeven) {
  const Dataset d = simulate(SystemId::sim1, 10000, 3);
  RawFrame raw = raw_frame(d);
  const auto rows = all_rows(d);
  const DensityModel g(d, raw, d.treatment(0), d.history(0), rows, DensityOptions{});
  // Evaluate at L1 = 0, L2 = 0 against the structural N(7, 1).
  for (std::size_t c : d.history(0)) raw(0, static_cast<Eigen::Index>(c)) = 0.0;
  const std::vector<std::size_t> one{0};
  EXPECT_NEAR(g.evaluate(raw, one, 7.0)[0], 0.3989, 0.02);
}

TEST(Density, GaussianIntegratesToOneAndIsUnimodal) {
  const Dataset d = one_period(500, 1.0, 4);
  const RawFrame raw = raw_frame(d);
  const auto rows = all_rows(d);
  const DensityModel g(d, raw, d.treatment(0), {0}, rows, DensityOptions{});
  for (std::size_t i : {0u, 7u, 99u}) {
    const std::vector<std::size_t> one{i};
    const double mu = g.means(raw, one)(0), s = g.sigma();
    const int nodes = 10000;
    const double lo = mu - 8 * s, h = 16 * s / nodes;
    double sum = 0;
    double prev = g.evaluate(raw, one, lo)[0];
    bool rising = true, unimodal = true;
    for (int k = 0; k <= nodes; ++k) {
      const double f = g.evaluate(raw, one, lo + k * h)[0];
      sum += f * (k == 0 || k == nodes ? 1 : (k % 2 ? 4 : 2));
      if (f < prev) rising = false;
      if (!rising && f > prev + 1e-15) unimodal = false;
      prev = f;
    }
    EXPECT_NEAR(sum * h / 3, 1.0, 1e-4);
    EXPECT_TRUE(unimodal);
  }
}

TEST(Density, PdfValues) {
  EXPECT_NEAR(normal_pdf(2, 2, 1), 0.39894, 1e-5);
  EXPECT_NEAR(normal_pdf(5, 0, 1), 1.4867e-6, 1e-10);
}

TEST(Density, BinningProbabilitiesSumToOneAndDensityIsProbOverWidth) {
  const Dataset d = one_period(1000, 1.0, 5);
  const RawFrame raw = raw_frame(d);
  const auto rows = all_rows(d);
  DensityOptions o;
  o.strategy = DensityStrategy::binning;
  o.bins = 8;
  const DensityModel g(d, raw, d.treatment(0), {0}, rows, o);
  std::vector<std::size_t> some(100);
  std::iota(some.begin(), some.end(), 0);
  const Eigen::MatrixXd P = g.bin_probabilities(raw, some);
  for (Eigen::Index i = 0; i < P.rows(); ++i) EXPECT_NEAR(P.row(i).sum(), 1.0, 1e-6);
  const double a = 0.1;
  const std::size_t b = g.bin_of(a);
  const double width = g.edges()[b + 1] - g.edges()[b];
  const auto f = g.evaluate(raw, some, a);
  for (std::size_t i = 0; i < some.size(); ++i) EXPECT_NEAR(f[i], P(static_cast<Eigen::Index>(i), b) / width, 1e-12);
}

TEST(Density, ExplicitEdgesMarginalFrequency) {
  // A uniform on {0.25, 0.75, 1.25, 1.75}: edges 0..2 step 0.5 give probability
  // 0.25 and width 0.5, so density 0.5.
  std::vector<Dataset::Column> cols(2);
  for (int i = 0; i < 400; ++i) {
    cols[0].values.push_back(0.25 + 0.5 * (i % 4));
    cols[1].values.push_back(i % 3);
  }
  std::vector<ColumnRole> schema{{"A_0", Role::treatment, 0, ValueKind::continuous},
                                 {"Y_0", Role::outcome, 0, ValueKind::continuous}};
  const Dataset d(schema, cols);
  const RawFrame raw = raw_frame(d);
  const auto rows = all_rows(d);
  DensityOptions o;
  o.strategy = DensityStrategy::binning;
  o.edges = {0, 0.5, 1, 1.5, 2};
  const DensityModel g(d, raw, 0, {}, rows, o);
  const std::vector<std::size_t> one{0};
  EXPECT_NEAR(g.evaluate(raw, one, 1.3)[0], 0.5, 1e-8);
}

TEST(Density, TooFewRowsIsFitError) {
  const Dataset d = one_period(10, 1.0, 6);
  const RawFrame raw = raw_frame(d);
  EXPECT_THROW(DensityModel(d, raw, d.treatment(0), {0}, all_rows(d), DensityOptions{}), FitError);
}

}  // namespace
}  // namespace cdrc
