#include <gtest/gtest.h>

#include "cdrc/diagnostics.hpp"
#include "cdrc/gcomp.hpp"
#include "cdrc/random.hpp"
#include "cdrc/simulation.hpp"

namespace cdrc {
namespace {

Dataset uniform_treatments(std::size_t n, int T, std::uint64_t seed) {
  FastRng rng(seed);
  std::vector<ColumnRole> schema;
  std::vector<Dataset::Column> cols;
  for (int t = 0; t <= T; ++t) {
    schema.push_back({"A_" + std::to_string(t), Role::treatment, t, ValueKind::continuous});
    schema.push_back({"Y_" + std::to_string(t), Role::outcome, t, ValueKind::continuous});
    cols.resize(cols.size() + 2);
  }
  for (std::size_t i = 0; i < n; ++i)
    for (int t = 0; t <= T; ++t) {
      cols[2 * static_cast<std::size_t>(t)].values.push_back(rng.uniform());
      cols[2 * static_cast<std::size_t>(t) + 1].values.push_back(rng.normal());
    }
  return Dataset(schema, cols);
}

std::vector<WeightRecord> records_with(std::vector<double> nums) {
  std::vector<WeightRecord> out;
  for (std::size_t i = 0; i < nums.size(); ++i) {
    WeightRecord r;
    r.unit = i;
    r.numerator = nums[i];
    out.push_back(r);
  }
  return out;
}

TEST(Proportion, ExtremeNumerators) {
  const std::vector<double> cs{0.001, 0.01, 1.0};
  for (const auto& cell : weight_proportion_surface(records_with({2.0, 3.0, 5.0}), cs)) EXPECT_EQ(cell.proportion, 0.0);
  for (const auto& cell : weight_proportion_surface(records_with({0.0, 0.0}), cs)) EXPECT_EQ(cell.proportion, 1.0);
}

TEST(Proportion, MonotoneInCAndVisitAverage) {
  const Dataset d = simulate(SystemId::sim1, 800, 1);
  EstimatorConfig config;
  config.estimand = Estimand::weighted;
  config.weights = WeightPlan{0.01};
  const auto records = weight_records(d, default_grid(SystemId::sim1), config);
  const std::vector<double> cs{0.001, 0.01, 0.025, 0.2, 1};
  const auto surface = weight_proportion_surface(records, cs);
  for (const auto& a : surface)
    for (const auto& b : surface)
      if (a.trajectory == b.trajectory && a.time == b.time && a.c < b.c) EXPECT_LE(a.proportion, b.proportion);
  const auto avg = visit_average(surface);
  EXPECT_EQ(avg.size(), cs.size() * 10);
  for (const auto& cell : avg) EXPECT_EQ(cell.time, -1);
}

TEST(Proportion, Sim3LowDoseHasLessSupport) {
  const Dataset d = simulate(SystemId::sim3, 2000, 2);
  EstimatorConfig config;
  config.estimand = Estimand::weighted;
  config.weights = WeightPlan{0.01};
  const auto grid = parse_grid_spec("0,5", system_horizon(SystemId::sim3));
  const std::vector<double> cs{0.01};
  const auto avg = visit_average(weight_proportion_surface(weight_records(d, grid, config), cs));
  ASSERT_EQ(avg.size(), 2u);
  EXPECT_GT(avg[0].proportion, avg[1].proportion);
}

TEST(Shading, Categories) {
  EXPECT_EQ(shading_category(0.6), ">50%");
  EXPECT_EQ(shading_category(0.2), "15-50%");
  EXPECT_EQ(shading_category(0.1), "5-15%");
  EXPECT_EQ(shading_category(0.01), "<5%");
}

TEST(Support, BinsPartitionTheLine) {
  const std::vector<double> sorted{1, 2, 4};
  EXPECT_EQ(support_bin(sorted, 0).first, -std::numeric_limits<double>::infinity());
  EXPECT_EQ(support_bin(sorted, 0).second, 1.5);
  EXPECT_EQ(support_bin(sorted, 1), std::make_pair(1.5, 3.0));
  EXPECT_EQ(support_bin(sorted, 2).second, std::numeric_limits<double>::infinity());
}

TEST(Support, TwoValueUniformIsHalf) {
  const Dataset d = uniform_treatments(10000, 2, 3);
  const std::vector<double> v{0.25, 0.75};
  const auto cells = binned_support(d, constant_grid(v, 2));
  ASSERT_EQ(cells.size(), 6u);
  for (const auto& c : cells) EXPECT_NEAR(c.support, 0.5, 0.05);
}

TEST(Support, FollowersNestOverTime) {
  const Dataset d = uniform_treatments(3000, 3, 4);
  const std::vector<double> v{0.2, 0.5, 0.8};
  const auto cells = binned_support(d, constant_grid(v, 3));
  for (const auto& a : cells)
    for (const auto& b : cells)
      if (a.trajectory == b.trajectory && a.time < b.time) EXPECT_GE(a.followers, b.followers);
}

TEST(Support, DeterministicTreatmentHasFullSupport) {
  std::vector<Dataset::Column> cols(4);
  for (int i = 0; i < 50; ++i) {
    cols[0].values.push_back(5);
    cols[1].values.push_back(i);
    cols[2].values.push_back(5);
    cols[3].values.push_back(i);
  }
  const Dataset d({{"A_0", Role::treatment, 0, ValueKind::continuous},
                   {"Y_0", Role::outcome, 0, ValueKind::continuous},
                   {"A_1", Role::treatment, 1, ValueKind::continuous},
                   {"Y_1", Role::outcome, 1, ValueKind::continuous}},
                  cols);
  const std::vector<double> v{3, 5, 7};
  for (const auto& c : binned_support(d, constant_grid(v, 1))) {
    if (c.trajectory == 1) EXPECT_EQ(c.support, 1.0);
  }
}

// Low concentrations are redrawn from U(0.2032, 0.88), so the lowest bin carries the
// truncation mass; binned support at 0 exceeds support at 4.
TEST(Support, Sim3TruncationMassInLowestBin) {
  const Dataset d = simulate(SystemId::sim3, 5000, 5);
  const auto cells = binned_support(d, default_grid(SystemId::sim3));
  for (const auto& a : cells)
    for (const auto& b : cells)
      if (a.trajectory == 0 && b.trajectory == 4 && a.time == b.time && a.time <= 1) EXPECT_GT(a.support, b.support);
}

}  // namespace
}  // namespace cdrc
