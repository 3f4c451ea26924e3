#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cdrc {

enum class WeightVariant { simple, fallback };
enum class Branch { unit_weight, ratio, fallback_level, marginal_ratio, undefined };

std::string_view to_string(WeightVariant variant);
WeightVariant parse_weight_variant(std::string_view text);
std::string_view to_string(Branch branch);

struct WeightPlan {
  double c = 0.01;
  WeightVariant variant = WeightVariant::fallback;
  double denominator_floor = 1e-12;
  /// Judge support by num/marginal > c instead of num > c.
  bool ratio_support_test = false;

  void validate() const;  // throws ConfigError
};

struct WeightRecord {
  std::size_t unit = 0;
  int time = 0;
  std::size_t trajectory = 0;
  double weight = 1.0;
  Branch branch = Branch::unit_weight;
  int level = 0;  // chain depth used by fallback_level
  double numerator = 0.0;
  double denominator = 0.0;
  bool floored = false;       // denominator replaced by the floor
  bool guard_failed = false;  // simple variant: denominator itself not above c
};

/// 5 / (sqrt(n) * ln(n / 5)); throws ArgumentError when n <= 5.
double default_c(std::size_t n);

/// 1 if num > c, else num / den (guarded, floored).
WeightRecord weight_simple(double num, double den, double c, double floor = 1e-12);

/// `chain` runs from the most recent conditional density back to the marginal
/// (last element). 1 if num > c; otherwise num over the first chain element
/// above c; otherwise num over the marginal.
WeightRecord weight_fallback(double num, std::span<const double> chain, double c, double floor = 1e-12);

/// Time-zero weight: 1 if num > c, else num / marginal; the branch is
/// `undefined` when the marginal itself is not above c.
WeightRecord single_timepoint_weight(double num, double marginal, double c, double floor = 1e-12);

/// Dispatches on the plan for a stage s >= 1 weight. `chain` as in weight_fallback.
WeightRecord compute_weight(const WeightPlan& plan, double num, std::span<const double> chain);

/// unit,t,trajectory,c,weight,branch,num,den
void write_weight_csv(std::span<const WeightRecord> records, const std::vector<std::string>& labels, double c,
                      std::ostream& out);

}  // namespace cdrc
