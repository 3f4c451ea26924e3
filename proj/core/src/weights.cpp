#include "cdrc/weights.hpp"

#include <cmath>
#include <ostream>

#include "cdrc/csv.hpp"
#include "cdrc/error.hpp"

namespace cdrc {

std::string_view to_string(WeightVariant variant) {
  return variant == WeightVariant::simple ? "simple" : "fallback";
}

WeightVariant parse_weight_variant(std::string_view text) {
  if (text == "simple") return WeightVariant::simple;
  if (text == "fallback") return WeightVariant::fallback;
  throw ArgumentError("unknown weight variant '" + std::string(text) + "' (simple or fallback)");
}

std::string_view to_string(Branch branch) {
  switch (branch) {
    case Branch::unit_weight: return "unit_weight";
    case Branch::ratio: return "ratio";
    case Branch::fallback_level: return "fallback_level";
    case Branch::marginal_ratio: return "marginal_ratio";
    case Branch::undefined: return "undefined";
  }
  return "?";
}

void WeightPlan::validate() const {
  if (!(c > 0) || std::isnan(c)) throw ConfigError("truncation constant c must be > 0");
  if (!(denominator_floor > 0)) throw ConfigError("denominator floor must be > 0");
}

double default_c(std::size_t n) {
  const double nd = static_cast<double>(n);
  if (n < 2 || !(std::log(nd / 5.0) > 0)) {
    throw ArgumentError("default c needs n > 5 (got " + std::to_string(n) + ")");
  }
  return 5.0 / (std::sqrt(nd) * std::log(nd / 5.0));
}

namespace {

WeightRecord ratio_record(double num, double den, double floor, Branch branch, int level) {
  WeightRecord r;
  r.numerator = num;
  r.denominator = den;
  r.branch = branch;
  r.level = level;
  r.floored = den < floor;
  r.weight = num / std::max(den, floor);
  return r;
}

}  // namespace

WeightRecord weight_simple(double num, double den, double c, double floor) {
  if (num > c) {
    WeightRecord r;
    r.numerator = num;
    r.denominator = den;
    return r;
  }
  WeightRecord r = ratio_record(num, den, floor, Branch::ratio, 0);
  r.guard_failed = !(den > c);
  return r;
}

WeightRecord weight_fallback(double num, std::span<const double> chain, double c, double floor) {
  if (chain.empty()) throw ConfigError("fallback weight needs at least the marginal density");
  if (num > c) {
    WeightRecord r;
    r.numerator = num;
    r.denominator = chain.front();
    return r;
  }
  const std::size_t last = chain.size() - 1;
  for (std::size_t k = 0; k < last; ++k) {
    if (chain[k] > c) {
      return ratio_record(num, chain[k], floor, k == 0 ? Branch::ratio : Branch::fallback_level, static_cast<int>(k));
    }
  }
  return ratio_record(num, chain[last], floor, Branch::marginal_ratio, static_cast<int>(last));
}

WeightRecord single_timepoint_weight(double num, double marginal, double c, double floor) {
  if (num > c) {
    WeightRecord r;
    r.numerator = num;
    r.denominator = marginal;
    return r;
  }
  return ratio_record(num, marginal, floor, marginal > c ? Branch::ratio : Branch::undefined, 0);
}

WeightRecord compute_weight(const WeightPlan& plan, double num, std::span<const double> chain) {
  if (chain.empty()) throw ConfigError("weight needs at least one denominator density");
  if (plan.ratio_support_test) {
    const double ratio = num / std::max(chain.back(), plan.denominator_floor);
    if (ratio > plan.c) {
      WeightRecord r;
      r.numerator = num;
      r.denominator = chain.front();
      return r;
    }
    // Below the support threshold: reuse the density-based rules with the
    // numerator test forced to fail.
    if (plan.variant == WeightVariant::simple) {
      WeightRecord r = ratio_record(num, chain.front(), plan.denominator_floor, Branch::ratio, 0);
      r.guard_failed = !(chain.front() > plan.c);
      return r;
    }
    WeightRecord r = weight_fallback(0.0, chain, plan.c, plan.denominator_floor);
    r.numerator = num;
    r.weight = num / std::max(r.denominator, plan.denominator_floor);
    return r;
  }
  if (plan.variant == WeightVariant::simple) return weight_simple(num, chain.front(), plan.c, plan.denominator_floor);
  return weight_fallback(num, chain, plan.c, plan.denominator_floor);
}

void write_weight_csv(std::span<const WeightRecord> records, const std::vector<std::string>& labels, double c,
                      std::ostream& out) {
  out << "unit,t,trajectory,c,weight,branch,num,den\n";
  for (const auto& r : records) {
    std::string branch(to_string(r.branch));
    if (r.branch == Branch::fallback_level) branch += "(" + std::to_string(r.level) + ")";
    out << r.unit << ',' << r.time << ',' << csv::escape(labels.at(r.trajectory)) << ',' << csv::format_number(c)
        << ',' << csv::format_number(r.weight) << ',' << branch << ',' << csv::format_number(r.numerator) << ','
        << csv::format_number(r.denominator) << '\n';
  }
}

}  // namespace cdrc
