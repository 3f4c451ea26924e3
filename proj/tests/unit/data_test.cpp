#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "cdrc/data.hpp"
#include "cdrc/error.hpp"
#include "cdrc/simulation.hpp"

namespace cdrc {
namespace {

std::vector<ColumnRole> efv_schema() {
  return parse_schema_json(R"({"columns": [
    {"name": "sex", "role": "baseline_covariate", "value_kind": "binary"},
    {"name": "metabolic", "role": "baseline_covariate", "value_kind": "categorical"},
    {"name": "log_age", "role": "baseline_covariate"},
    {"name": "NRTI", "role": "baseline_covariate", "value_kind": "categorical"},
    {"name": "weight.0", "role": "time_covariate", "time_index": 0},
    {"name": "efv.0", "role": "treatment", "time_index": 0},
    {"name": "VL.0", "role": "outcome", "time_index": 0, "value_kind": "binary"},
    {"name": "adherence.1", "role": "time_covariate", "time_index": 1, "value_kind": "binary"},
    {"name": "weight.1", "role": "time_covariate", "time_index": 1},
    {"name": "efv.1", "role": "treatment", "time_index": 1},
    {"name": "VL.1", "role": "outcome", "time_index": 1, "value_kind": "binary"}]})");
}

TEST(Dataset, OrderingFollowsTemporalRoles) {
  std::istringstream csv(
      "VL.1,efv.1,weight.1,adherence.1,VL.0,efv.0,weight.0,NRTI,log_age,metabolic,sex\n"
      "0,2.5,20,1,0,3.1,19,ABC,1.2,fast,1\n"
      "1,0.9,15,0,1,1.0,14,EFV,0.7,slow,0\n");
  const Dataset data = read_dataset(csv, efv_schema());
  EXPECT_EQ(data.horizon(), 1);
  const auto& order = data.ordering();
  ASSERT_EQ(order.size(), 11u);
  EXPECT_EQ(data.schema(order[0]).name, "sex");
  EXPECT_EQ(data.schema(order[order.size() - 2]).name, "efv.1");
  EXPECT_EQ(data.schema(order.back()).name, "VL.1");
  EXPECT_EQ(data.levels(data.index_of("metabolic")).front(), "fast");
  // H_1 holds everything before efv.1.
  EXPECT_EQ(data.history(1).size(), 9u);
}

TEST(Dataset, EmptyFileIsParseError) {
  std::istringstream csv("");
  EXPECT_THROW(read_dataset(csv, efv_schema()), ParseError);
}

TEST(Dataset, TwoOutcomesAtOneTimeIsSchemaError) {
  std::vector<ColumnRole> schema{{"A", Role::treatment, 0, ValueKind::continuous},
                                 {"Y", Role::outcome, 0, ValueKind::continuous},
                                 {"Z", Role::outcome, 0, ValueKind::continuous}};
  std::vector<Dataset::Column> cols(3, Dataset::Column{{1.0, 2.0}, {}});
  EXPECT_THROW(Dataset(schema, cols), SchemaError);
}

TEST(Dataset, MissingOnlyAfterCensoring) {
  std::vector<ColumnRole> schema{{"A_0", Role::treatment, 0, ValueKind::continuous},
                                 {"Y_0", Role::outcome, 0, ValueKind::continuous},
                                 {"A_1", Role::treatment, 1, ValueKind::continuous},
                                 {"Y_1", Role::outcome, 1, ValueKind::continuous}};
  const double nan = std::nan("");
  std::vector<Dataset::Column> cols{{{1, 2}, {}}, {{0, 1}, {}}, {{1, nan}, {}}, {{0, 1}, {}}};
  EXPECT_THROW(Dataset(schema, cols), ParseError);
}

TEST(Dataset, RoundTripIsByteIdentical) {
  const Dataset data = simulate(SystemId::sim2, 200, 3);
  std::ostringstream first;
  write_dataset(data, first);
  std::istringstream in(first.str());
  const Dataset again = read_dataset(in, data.schema());
  std::ostringstream second;
  write_dataset(again, second);
  EXPECT_EQ(first.str(), second.str());
  for (std::size_t j = 0; j < data.cols(); ++j)
    for (std::size_t i = 0; i < data.rows(); ++i) {
      const double a = data.at(i, j), b = again.at(i, j);
      EXPECT_TRUE(a == b || (std::isnan(a) && std::isnan(b)));
    }
}

TEST(Dataset, SchemaJsonRoundTrip) {
  const auto schema = system_schema(SystemId::sim3);
  const auto again = parse_schema_json(schema_to_json(schema));
  ASSERT_EQ(again.size(), schema.size());
  for (std::size_t j = 0; j < schema.size(); ++j) {
    EXPECT_EQ(again[j].name, schema[j].name);
    EXPECT_EQ(again[j].role, schema[j].role);
    EXPECT_EQ(again[j].time_index, schema[j].time_index);
    EXPECT_EQ(again[j].kind, schema[j].kind);
  }
}

TEST(Grid, ConstantGrid) {
  std::vector<double> v;
  for (int a = 2; a <= 11; ++a) v.push_back(a);
  const auto grid = constant_grid(v, 2);
  ASSERT_EQ(grid.size(), 10u);
  EXPECT_EQ(grid.length(), 3u);
  EXPECT_EQ(grid.trajectory(9)[2], 11.0);

  const std::vector<double> zero{0.0};
  const auto single = constant_grid(zero, 0);
  EXPECT_EQ(single.size(), 1u);
  EXPECT_EQ(single.length(), 1u);

  const auto efv = parse_grid_spec("0:6:1", 3);
  EXPECT_EQ(efv.size(), 7u);
  EXPECT_EQ(efv.length(), 4u);
  EXPECT_EQ(efv.trajectory(6)[3], 6.0);
}

TEST(Grid, BadSpecIsArgumentError) {
  EXPECT_THROW(parse_grid_spec("3:1:1", 1), ArgumentError);
  EXPECT_THROW(parse_grid_spec("a,b", 1), ArgumentError);
}

}  // namespace
}  // namespace cdrc
