#include "cdrc/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>

#include "cdrc/csv.hpp"
#include "cdrc/design.hpp"
#include "cdrc/error.hpp"
#include "cdrc/learners.hpp"

namespace cdrc {

std::string_view shading_category(double proportion) {
  if (proportion > 0.5) return ">50%";
  if (proportion >= 0.15) return "15-50%";
  if (proportion >= 0.05) return "5-15%";
  return "<5%";
}

std::vector<ProportionCell> weight_proportion_surface(std::span<const WeightRecord> records,
                                                     std::span<const double> c_grid) {
  if (records.empty()) throw ArgumentError("no weight records to summarize");
  if (c_grid.empty()) throw ArgumentError("empty c grid");
  std::map<std::pair<std::size_t, int>, std::vector<double>> numerators;
  for (const auto& r : records) numerators[{r.trajectory, r.time}].push_back(r.numerator);
  std::vector<ProportionCell> cells;
  for (double c : c_grid) {
    for (const auto& [key, nums] : numerators) {
      const auto below = std::count_if(nums.begin(), nums.end(), [c](double v) { return !(v > c); });
      cells.push_back({c, key.first, key.second, static_cast<double>(below) / static_cast<double>(nums.size()),
                       nums.size()});
    }
  }
  return cells;
}

std::vector<ProportionCell> visit_average(std::span<const ProportionCell> cells) {
  std::map<std::pair<double, std::size_t>, std::pair<double, std::size_t>> acc;
  for (const auto& cell : cells) {
    if (cell.time < 0) continue;
    auto& slot = acc[{cell.c, cell.trajectory}];
    slot.first += cell.proportion;
    ++slot.second;
  }
  std::vector<ProportionCell> out;
  for (const auto& [key, sum] : acc) {
    out.push_back({key.first, key.second, -1, sum.first / static_cast<double>(sum.second), sum.second});
  }
  return out;
}

std::string_view to_string(SupportFlag flag) {
  switch (flag) {
    case SupportFlag::ok: return "ok";
    case SupportFlag::small_sample: return "small_sample";
    case SupportFlag::no_followers: return "no_followers";
  }
  return "?";
}

std::pair<double, double> support_bin(std::span<const double> sorted, std::size_t k) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  const double lower = k == 0 ? -inf : 0.5 * (sorted[k - 1] + sorted[k]);
  const double upper = k + 1 == sorted.size() ? inf : 0.5 * (sorted[k] + sorted[k + 1]);
  return {lower, upper};
}

std::vector<SupportCell> binned_support(const Dataset& data, const InterventionGrid& grid,
                                        const SupportOptions& options) {
  const int T = data.horizon();
  if (grid.length() != static_cast<std::size_t>(T) + 1) {
    throw ArgumentError("grid length does not match the number of time points");
  }
  // bins[t][j] = trajectory j's interval at time t
  std::vector<std::vector<std::pair<double, double>>> bins(static_cast<std::size_t>(T) + 1);
  for (int t = 0; t <= T; ++t) {
    std::vector<double> values;
    for (std::size_t j = 0; j < grid.size(); ++j) values.push_back(grid.trajectory(j)[static_cast<std::size_t>(t)]);
    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    for (double v : values) {
      const auto k = static_cast<std::size_t>(std::lower_bound(sorted.begin(), sorted.end(), v) - sorted.begin());
      bins[static_cast<std::size_t>(t)].push_back(support_bin(sorted, k));
    }
  }

  const RawFrame raw = raw_frame(data);
  std::vector<SupportCell> cells;
  for (std::size_t j = 0; j < grid.size(); ++j) {
    std::vector<std::size_t> followers(data.rows());
    for (std::size_t i = 0; i < data.rows(); ++i) followers[i] = i;
    for (int t = 0; t <= T; ++t) {
      const std::size_t a_col = data.treatment(t);
      const auto [lo, hi] = bins[static_cast<std::size_t>(t)][j];
      std::vector<std::size_t> observed;
      for (std::size_t i : followers) {
        if (!std::isnan(data.at(i, a_col))) observed.push_back(i);
      }
      Eigen::VectorXd inside(static_cast<Eigen::Index>(observed.size()));
      std::vector<std::size_t> next;
      for (std::size_t r = 0; r < observed.size(); ++r) {
        const double a = data.at(observed[r], a_col);
        const bool in = a >= lo && a < hi;
        inside(static_cast<Eigen::Index>(r)) = in ? 1.0 : 0.0;
        if (in) next.push_back(observed[r]);
      }

      SupportCell cell;
      cell.trajectory = j;
      cell.time = t;
      cell.followers = observed.size();
      if (observed.empty()) {
        cell.flag = SupportFlag::no_followers;
      } else {
        const double share = inside.mean();
        cell.support = share;
        if (observed.size() < options.small_sample) {
          cell.flag = SupportFlag::small_sample;
        } else if (share > 0.0 && share < 1.0) {
          // Mean fitted probability of a logistic model among followers
          // (intercept only unless covariate adjustment is requested).
          Eigen::MatrixXd X(static_cast<Eigen::Index>(observed.size()), 0);
          if (options.covariate_adjusted) {
            ModelMatrixSpec spec;
            for (std::size_t c : data.history(t)) {
              if (data.schema(c).role != Role::treatment) spec.columns.push_back(c);
            }
            try {
              X = Design(data, spec, raw, observed).expand(raw, observed);
            } catch (const FitError&) {
              X.resize(static_cast<Eigen::Index>(observed.size()), 0);
            }
          }
          try {
            cell.support = fit_logistic(X, inside).predict(X).mean();
          } catch (const FitError&) {
            cell.support = share;
          }
        }
      }
      cells.push_back(cell);
      followers = std::move(next);
    }
  }
  return cells;
}

void write_proportion_csv(std::span<const ProportionCell> cells, const std::vector<std::string>& labels,
                          std::ostream& out) {
  out << "c,trajectory_label,time,proportion,shading\n";
  for (const auto& cell : cells) {
    out << csv::format_number(cell.c) << ',' << csv::escape(labels.at(cell.trajectory)) << ',';
    if (cell.time >= 0) out << cell.time;
    else out << "all";
    out << ',' << csv::format_number(cell.proportion) << ',' << shading_category(cell.proportion) << '\n';
  }
}

void write_support_csv(std::span<const SupportCell> cells, const std::vector<std::string>& labels, std::ostream& out) {
  out << "trajectory_label,time,support,followers,flag\n";
  for (const auto& cell : cells) {
    out << csv::escape(labels.at(cell.trajectory)) << ',' << cell.time << ',' << csv::format_number(cell.support)
        << ',' << cell.followers << ',' << to_string(cell.flag) << '\n';
  }
}

}  // namespace cdrc
