#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cdrc/data.hpp"
#include "cdrc/weights.hpp"

namespace cdrc {

/// Share of units whose weight differs from 1, per (c, trajectory, time).
struct ProportionCell {
  double c = 0.0;
  std::size_t trajectory = 0;
  int time = 0;  // -1 for the visit average
  double proportion = 0.0;
  std::size_t units = 0;
};

/// ">50%", "15-50%", "5-15%" or "<5%".
std::string_view shading_category(double proportion);

/// Branches are recomputed from the stored numerator densities: a unit keeps
/// weight 1 at c exactly when its numerator exceeds c.
std::vector<ProportionCell> weight_proportion_surface(std::span<const WeightRecord> records,
                                                     std::span<const double> c_grid);

/// Averages each (c, trajectory) over time points.
std::vector<ProportionCell> visit_average(std::span<const ProportionCell> cells);

struct SupportOptions {
  std::size_t small_sample = 10;
  bool covariate_adjusted = false;
};

enum class SupportFlag { ok, small_sample, no_followers };
std::string_view to_string(SupportFlag flag);

struct SupportCell {
  std::size_t trajectory = 0;
  int time = 0;
  double support = 0.0;
  std::size_t followers = 0;
  SupportFlag flag = SupportFlag::ok;
};

/// Interval [lower, upper) around grid value `k` of the ascending distinct
/// values `sorted`: edges at midpoints to the neighbours, outer edges infinite.
std::pair<double, double> support_bin(std::span<const double> sorted, std::size_t k);

/// Probability of landing in trajectory j's bin at t among units whose
/// earlier treatments all fell in j's bins.
std::vector<SupportCell> binned_support(const Dataset& data, const InterventionGrid& grid,
                                        const SupportOptions& options = {});

void write_proportion_csv(std::span<const ProportionCell> cells, const std::vector<std::string>& labels,
                          std::ostream& out);
void write_support_csv(std::span<const SupportCell> cells, const std::vector<std::string>& labels, std::ostream& out);

}  // namespace cdrc
