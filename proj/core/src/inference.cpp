#include "cdrc/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <ostream>
#include <random>

#include "cdrc/csv.hpp"
#include "cdrc/error.hpp"
#include "cdrc/parallel.hpp"
#include "cdrc/random.hpp"

namespace cdrc {

double quantile(std::vector<double> values, double p) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * std::clamp(p, 0.0, 1.0);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

std::vector<std::size_t> resample_rows(std::size_t n, std::uint64_t seed, std::size_t r) {
  Rng rng = make_rng(seed, r);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::vector<std::size_t> rows(n);
  for (auto& i : rows) i = pick(rng);
  return rows;
}

BootstrapResult bootstrap(const Dataset& data, const InterventionGrid& grid, const EstimatorConfig& config,
                          const BootstrapOptions& options) {
  if (options.replicates < options.min_replicates) {
    throw ArgumentError("bootstrap needs at least " + std::to_string(options.min_replicates) + " replicates");
  }
  if (!(options.level > 0.0 && options.level < 1.0)) throw ArgumentError("confidence level must lie in (0,1)");

  BootstrapResult result;
  result.replicates = options.replicates;
  result.point = estimate(data, grid, config).curve;

  std::vector<std::optional<CurveEstimate>> draws(options.replicates);
  parallel_for(options.replicates, options.threads, [&](std::size_t r) {
    EstimatorConfig replicate = config;
    replicate.seed = derive_seed(options.seed, r);
    replicate.threads = 1;
    replicate.keep_weights = false;
    try {
      const Dataset sample = data.select_rows(resample_rows(data.rows(), options.seed, r));
      draws[r] = estimate(sample, grid, replicate).curve;
    } catch (const FitError&) {
      draws[r].reset();
    } catch (const SchemaError&) {
      draws[r].reset();
    }
  });
  for (std::size_t r = 0; r < draws.size(); ++r) {
    if (draws[r]) result.draws.push_back(std::move(*draws[r]));
    else result.failed.push_back(r);
  }

  const double alpha = (1.0 - options.level) / 2.0;
  for (const auto& point : result.point.points) {
    BandCell cell;
    cell.trajectory = point.trajectory;
    cell.time = point.time;
    cell.estimate = point.value;
    std::vector<double> values;
    std::size_t undefined = 0;
    for (const auto& d : result.draws) {
      const auto& p = d.at(point.trajectory, point.time);
      if (p.undefined) ++undefined;
      else values.push_back(p.value);
    }
    cell.undefined_rate = result.draws.empty() ? 1.0 : static_cast<double>(undefined) / static_cast<double>(result.draws.size());
    cell.unreliable = cell.undefined_rate > options.unreliable_rate;
    cell.lower = quantile(values, alpha);
    cell.upper = quantile(values, 1.0 - alpha);
    result.bands.push_back(cell);
  }
  return result;
}

void write_bands_csv(const BootstrapResult& result, std::ostream& out) {
  out << "trajectory_label,time,estimate,lower,upper,undefined_rate\n";
  for (const auto& b : result.bands) {
    out << csv::escape(result.point.labels.at(b.trajectory)) << ',' << b.time << ',' << csv::format_number(b.estimate)
        << ',' << csv::format_number(b.lower) << ',' << csv::format_number(b.upper) << ','
        << csv::format_number(b.undefined_rate) << '\n';
  }
}

}  // namespace cdrc
