#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <random>

#include "cdrc/error.hpp"
#include "cdrc/gcomp.hpp"
#include "cdrc/parallel.hpp"
#include "cdrc/random.hpp"

namespace cdrc {
namespace {

// Conditional law of one column given every column before it.
struct Conditional {
  std::size_t column = 0;
  ValueKind kind = ValueKind::continuous;
  std::unique_ptr<Design> design;
  LinearFit linear;                       // continuous
  std::vector<LogisticFit> logistic;      // binary: one model; categorical: one per level
  std::vector<double> constant;           // per-level probability when a fit is degenerate (NaN otherwise)
};

bool is_observed(const Dataset& data, std::size_t row, std::span<const std::size_t> cols) {
  for (std::size_t c : cols) {
    if (std::isnan(data.at(row, c))) return false;
  }
  return true;
}

Conditional fit_conditional(const Dataset& data, const RawFrame& raw, std::size_t column, bool survival,
                            const EstimatorConfig& config) {
  const int t = *data.schema(column).time_index;
  std::vector<std::size_t> parents;
  for (std::size_t c : data.ordering()) {
    if (c == column) break;
    parents.push_back(c);
  }
  std::vector<std::size_t> all = parents;
  all.push_back(column);
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < data.rows(); ++i) {
    if (!is_observed(data, i, all)) continue;
    if (survival) {
      const int prior = t - 1;
      if (prior >= 0 && data.at(i, data.outcome(prior)) != 0.0) continue;
    }
    rows.push_back(i);
  }
  if (rows.empty()) throw FitError("no rows to fit the conditional model of '" + data.schema(column).name + "'");

  Conditional cond;
  cond.column = column;
  cond.kind = data.schema(column).kind;
  ModelMatrixSpec spec;
  spec.columns = parents;
  spec.basis = config.outcome.basis;
  spec.degree = config.outcome.degree;
  cond.design = std::make_unique<Design>(data, spec, raw, rows);
  const Eigen::MatrixXd X = cond.design->expand(raw, rows);
  Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) y(static_cast<Eigen::Index>(r)) = data.at(rows[r], column);

  auto fit_binary = [&](const Eigen::VectorXd& target) {
    const double mean = target.mean();
    if (mean == 0.0 || mean == 1.0) {
      cond.logistic.emplace_back();
      cond.constant.push_back(mean);
    } else {
      cond.logistic.push_back(fit_logistic(X, target));
      cond.constant.push_back(std::numeric_limits<double>::quiet_NaN());
    }
  };
  switch (cond.kind) {
    case ValueKind::continuous:
      cond.linear = fit_ols(X, y);
      break;
    case ValueKind::binary:
      fit_binary(y);
      break;
    case ValueKind::categorical:
      for (std::size_t level = 0; level < data.levels(column).size(); ++level) {
        fit_binary((y.array() == static_cast<double>(level)).cast<double>().matrix());
      }
      break;
  }
  return cond;
}

Eigen::VectorXd probability(const Conditional& cond, std::size_t k, const Eigen::MatrixXd& X) {
  if (!std::isnan(cond.constant[k])) return Eigen::VectorXd::Constant(X.rows(), cond.constant[k]);
  return cond.logistic[k].predict(X);
}

}  // namespace

EstimateResult estimate_parametric(const Dataset& data, const InterventionGrid& grid, const EstimatorConfig& config) {
  const int T = data.horizon();
  if (grid.length() != static_cast<std::size_t>(T) + 1) {
    throw ArgumentError("intervention trajectories have " + std::to_string(grid.length()) +
                        " time points but the data has " + std::to_string(T + 1));
  }
  std::vector<int> times = config.times;
  if (times.empty()) {
    for (int t = 0; t <= T; ++t) times.push_back(t);
  }
  for (int t : times) {
    if (t < 0 || t > T) throw ArgumentError("target time " + std::to_string(t) + " out of range");
  }

  // Columns drawn by resampling observed rows: baseline plus time-0 covariates.
  std::vector<std::size_t> resampled = data.covariates(0);
  std::vector<std::size_t> modeled;
  for (std::size_t c : data.ordering()) {
    const auto& role = data.schema(c);
    if (role.role == Role::outcome || (role.role == Role::time_covariate && *role.time_index > 0)) {
      modeled.push_back(c);
    }
  }
  if (config.parametric_models) {
    for (std::size_t c : modeled) {
      const auto& names = *config.parametric_models;
      if (std::find(names.begin(), names.end(), data.schema(c).name) == names.end()) {
        throw ConfigError("no conditional model declared for '" + data.schema(c).name + "'");
      }
    }
  }

  const RawFrame raw = raw_frame(data);
  std::vector<Conditional> models;
  for (std::size_t c : modeled) {
    try {
      models.push_back(fit_conditional(data, raw, c, config.survival, config));
    } catch (const FitError& e) {
      throw FitError("parametric model for '" + data.schema(c).name + "' failed: " + e.what());
    }
  }

  std::vector<std::size_t> base_rows;
  for (std::size_t i = 0; i < data.rows(); ++i) {
    if (is_observed(data, i, resampled)) base_rows.push_back(i);
  }
  if (base_rows.empty()) throw FitError("no complete baseline rows to resample");

  const std::size_t M = config.monte_carlo_draws;
  std::vector<std::vector<double>> expected(grid.size(), std::vector<double>(static_cast<std::size_t>(T) + 1, 0.0));
  parallel_for(grid.size(), config.threads, [&](std::size_t j) {
    // Same stream for every trajectory: common random numbers across the grid.
    Rng rng = make_rng(config.seed, 0x7061726dULL);
    std::uniform_int_distribution<std::size_t> pick(0, base_rows.size() - 1);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    RawFrame sim = RawFrame::Constant(static_cast<Eigen::Index>(M), raw.cols(), std::numeric_limits<double>::quiet_NaN());
    for (std::size_t m = 0; m < M; ++m) {
      const std::size_t src = base_rows[pick(rng)];
      for (std::size_t c : resampled) sim(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(c)) = raw(static_cast<Eigen::Index>(src), static_cast<Eigen::Index>(c));
    }
    std::vector<std::size_t> all(M);
    for (std::size_t m = 0; m < M; ++m) all[m] = m;
    std::vector<char> event(M, 0);
    const auto traj = grid.trajectory(j);

    std::size_t next_model = 0;
    for (std::size_t c : data.ordering()) {
      const auto& role = data.schema(c);
      const auto col = static_cast<Eigen::Index>(c);
      if (role.role == Role::treatment) {
        sim.col(col).setConstant(traj[static_cast<std::size_t>(*role.time_index)]);
        continue;
      }
      if (role.role == Role::censoring) {
        sim.col(col).setZero();
        continue;
      }
      if (next_model >= models.size() || models[next_model].column != c) continue;
      const Conditional& cond = models[next_model++];
      const Eigen::MatrixXd X = cond.design->expand(sim, all);
      const bool outcome = role.role == Role::outcome;
      const int t = *role.time_index;
      switch (cond.kind) {
        case ValueKind::continuous: {
          const Eigen::VectorXd mean = cond.linear.predict(X);
          double total = 0.0;
          for (std::size_t m = 0; m < M; ++m) {
            const auto mi = static_cast<Eigen::Index>(m);
            sim(mi, col) = mean(mi) + cond.linear.residual_scale * normal(rng);
            total += mean(mi);
          }
          if (outcome) expected[j][static_cast<std::size_t>(t)] = total / static_cast<double>(M);
          break;
        }
        case ValueKind::binary: {
          const Eigen::VectorXd p = probability(cond, 0, X);
          double total = 0.0;
          for (std::size_t m = 0; m < M; ++m) {
            const auto mi = static_cast<Eigen::Index>(m);
            const double u = unif(rng);
            if (outcome && config.survival && event[m]) {
              sim(mi, col) = 1.0;
              total += 1.0;
              continue;
            }
            sim(mi, col) = u < p(mi) ? 1.0 : 0.0;
            total += p(mi);
            if (outcome && sim(mi, col) == 1.0) event[m] = 1;
          }
          if (outcome) expected[j][static_cast<std::size_t>(t)] = total / static_cast<double>(M);
          break;
        }
        case ValueKind::categorical: {
          std::vector<Eigen::VectorXd> p;
          for (std::size_t k = 0; k < cond.logistic.size(); ++k) p.push_back(probability(cond, k, X));
          for (std::size_t m = 0; m < M; ++m) {
            const auto mi = static_cast<Eigen::Index>(m);
            double total = 0.0;
            for (const auto& pk : p) total += pk(mi);
            double u = unif(rng) * total;
            std::size_t level = 0;
            for (; level + 1 < p.size(); ++level) {
              if (u < p[level](mi)) break;
              u -= p[level](mi);
            }
            sim(mi, col) = static_cast<double>(level);
          }
          break;
        }
      }
    }
  });

  EstimateResult out;
  out.curve.estimand = Estimand::cdrc_parametric;
  out.curve.labels = grid.labels();
  out.curve.meta = {data.rows(), config.seed, "parametric"};
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  for (std::size_t j = 0; j < grid.size(); ++j) {
    for (int t : times) out.curve.points.push_back({j, t, expected[j][static_cast<std::size_t>(t)], false});
  }
  return out;
}

}  // namespace cdrc
