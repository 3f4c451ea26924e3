#include "cdrc/gcomp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <mutex>
#include <set>
#include <tuple>

#include "cdrc/error.hpp"
#include "cdrc/parallel.hpp"
#include "cdrc/random.hpp"

namespace cdrc {

std::string_view to_string(WeightPlacement placement) {
  return placement == WeightPlacement::prediction ? "prediction" : "outcome";
}

WeightPlacement parse_weight_placement(std::string_view text) {
  if (text == "outcome") return WeightPlacement::outcome;
  if (text == "prediction") return WeightPlacement::prediction;
  throw ArgumentError("unknown weight placement '" + std::string(text) + "' (valid: outcome, prediction)");
}

std::string_view to_string(DenominatorSource source) {
  return source == DenominatorSource::regression ? "regression" : "density";
}

DenominatorSource parse_denominator_source(std::string_view text) {
  if (text == "density") return DenominatorSource::density;
  if (text == "regression") return DenominatorSource::regression;
  throw ArgumentError("unknown denominator source '" + std::string(text) + "' (valid: density, regression)");
}

std::string_view to_string(Stage0Mean mean) { return mean == Stage0Mean::population ? "population" : "hajek"; }

Stage0Mean parse_stage0_mean(std::string_view text) {
  if (text == "hajek") return Stage0Mean::hajek;
  if (text == "population") return Stage0Mean::population;
  throw ArgumentError("unknown time-zero mean '" + std::string(text) + "' (valid: hajek, population)");
}

void EstimatorConfig::validate() const {
  if (estimand == Estimand::weighted) {
    if (!weights) throw ConfigError("weighted estimand needs a weight plan (c)");
    weights->validate();
  }
  if (outcome.stack.kinds.empty()) throw ConfigError("outcome learner stack is empty");
  if (estimand == Estimand::cdrc_parametric && monte_carlo_draws == 0) {
    throw ConfigError("parametric g-computation needs at least one Monte-Carlo draw");
  }
}

const DensityOptions& EstimatorConfig::density_for(int time) const {
  auto it = density_at.find(time);
  return it == density_at.end() ? density : it->second;
}

std::vector<std::size_t> stage_rows(const Dataset& data, int s, bool survival) {
  std::vector<std::size_t> rows;
  const auto cens = data.censoring(s);
  for (std::size_t i = 0; i < data.rows(); ++i) {
    if (cens && data.at(i, *cens) != 0.0) continue;
    if (survival && s > 0 && data.at(i, data.outcome(s - 1)) != 0.0) continue;
    rows.push_back(i);
  }
  return rows;
}

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string learner_label(const StackOptions& stack) {
  std::string out;
  for (auto k : stack.kinds) {
    if (!out.empty()) out += '+';
    out += to_string(k);
  }
  return out;
}

class Engine {
 public:
  Engine(const Dataset& data, const InterventionGrid& grid, const EstimatorConfig& config)
      : data_(data), grid_(grid), config_(config), raw_(raw_frame(data)) {
    const int T = data.horizon();
    if (grid.length() != static_cast<std::size_t>(T) + 1) {
      throw ArgumentError("intervention trajectories have " + std::to_string(grid.length()) +
                          " time points but the data has " + std::to_string(T + 1));
    }
    for (int s = 0; s <= T; ++s) rows_.push_back(stage_rows(data, s, config.survival));
    all_rows_.resize(data.rows());
    for (std::size_t i = 0; i < data.rows(); ++i) all_rows_[i] = i;
    weighted_ = config.estimand == Estimand::weighted;
    if (weighted_) plan_ = *config.weights;
  }

  // Numerator and first denominator for every stage, before any parallel work.
  void prefit(int up_to) {
    for (int s = 0; s <= up_to; ++s) {
      density(s, -1);
      density(s, 0);
    }
  }

  std::size_t density_fits() const { return fits_; }

  RawFrame intervened(int s, std::size_t j) const {
    RawFrame frame = raw_;
    const auto traj = grid_.trajectory(j);
    for (int k = 0; k <= s; ++k) {
      frame.col(static_cast<Eigen::Index>(data_.treatment(k))).setConstant(traj[static_cast<std::size_t>(k)]);
      if (auto c = data_.censoring(k)) frame.col(static_cast<Eigen::Index>(*c)).setZero();
    }
    return frame;
  }

  // Weights for stage s >= 1 on rows R_s; for s = 0 on all rows.
  std::vector<WeightRecord> stage_weights(int s, std::size_t j, const RawFrame& frame) {
    return stage_weights(s, j, frame, s == 0 ? all_rows_ : rows_[static_cast<std::size_t>(s)]);
  }

  std::vector<WeightRecord> stage_weights(int s, std::size_t j, const RawFrame& frame,
                                          const std::vector<std::size_t>& rows) {
    const double a = grid_.trajectory(j)[static_cast<std::size_t>(s)];
    std::vector<WeightRecord> out(rows.size());
    if (rows.empty()) return out;
    const auto num = density(s, -1).evaluate(frame, rows, a);
    const double c = plan_.c;

    if (s == 0) {
      const auto marginal = denominator(0, 0, j, frame, rows, a);
      for (std::size_t r = 0; r < rows.size(); ++r) {
        WeightRecord rec = single_timepoint_weight(num[r], marginal[r], c, plan_.denominator_floor);
        if (plan_.ratio_support_test) {
          const double ratio = num[r] / std::max(marginal[r], plan_.denominator_floor);
          if (ratio > c) {
            rec = WeightRecord{};
          } else {
            rec.weight = ratio;
            rec.branch = marginal[r] > c ? Branch::ratio : Branch::undefined;
            rec.floored = marginal[r] < plan_.denominator_floor;
          }
          rec.numerator = num[r];
          rec.denominator = marginal[r];
        }
        finish(rec, rows[r], s, j);
        out[r] = rec;
      }
      return out;
    }

    // Chain levels 0..s-1 condition on (A_{s*}, H_{s*}) for s* = s-1..0;
    // level s is the marginal. Deeper levels are evaluated only when a unit
    // still lacks a denominator above c.
    const int depth = plan_.variant == WeightVariant::simple ? 1 : s + 1;
    std::vector<std::vector<double>> levels(static_cast<std::size_t>(depth),
                                            std::vector<double>(rows.size(), kNaN));
    std::vector<bool> need(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) need[r] = plan_.ratio_support_test || !(num[r] > c);
    for (int k = 0; k < depth; ++k) {
      const bool any = std::find(need.begin(), need.end(), true) != need.end();
      if (!any && !(plan_.ratio_support_test || k == 0)) break;
      levels[static_cast<std::size_t>(k)] = denominator(s, k, j, frame, rows, a);
      for (std::size_t r = 0; r < rows.size(); ++r) {
        if (!(levels[static_cast<std::size_t>(k)][r] <= c)) need[r] = plan_.ratio_support_test;
      }
    }
    if (plan_.ratio_support_test && plan_.variant == WeightVariant::simple) {
      // The ratio test needs the marginal even in the simple variant.
      const auto marginal = denominator(s, s, j, frame, rows, a);
      for (std::size_t r = 0; r < rows.size(); ++r) {
        const double chain[2] = {levels[0][r], marginal[r]};
        WeightRecord rec = compute_weight(plan_, num[r], chain);
        finish(rec, rows[r], s, j);
        out[r] = rec;
      }
      return out;
    }
    std::vector<double> chain(static_cast<std::size_t>(depth));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      for (int k = 0; k < depth; ++k) chain[static_cast<std::size_t>(k)] = levels[static_cast<std::size_t>(k)][r];
      WeightRecord rec = compute_weight(plan_, num[r], chain);
      finish(rec, rows[r], s, j);
      out[r] = rec;
    }
    return out;
  }

  struct TargetResult {
    double value = 0.0;
    bool undefined = false;
    StageAudit audit;
  };

  TargetResult run(int t, std::size_t j) {
    TargetResult result;
    result.audit.time = t;
    result.audit.trajectory = j;
    const std::size_t n = data_.rows();
    std::vector<double> ytil(n);
    const auto y_t = data_.column(data_.outcome(t));
    std::copy(y_t.begin(), y_t.end(), ytil.begin());

    for (int s = t; s >= 0; --s) {
      const auto& fit_rows = rows_[static_cast<std::size_t>(s)];
      const RawFrame frame = intervened(s, j);
      const bool weigh_outcome = weighted_ && s >= 1 && config_.placement == WeightPlacement::outcome;
      const bool weigh_prediction = weighted_ && s >= 1 && config_.placement == WeightPlacement::prediction;
      std::vector<double> w(fit_rows.size(), 1.0);
      if (weigh_outcome) {
        const auto records = stage_weights(s, j, frame);
        for (std::size_t r = 0; r < records.size(); ++r) w[r] = records[r].weight;
        ++result.audit.weight_computations;
      }

      const std::vector<std::size_t>& target_rows = s > 0 ? rows_[static_cast<std::size_t>(s - 1)] : all_rows_;
      std::vector<double> next(n, kNaN);
      std::vector<std::size_t> predict_rows;
      for (std::size_t i : target_rows) {
        if (config_.survival && s > 0 && data_.at(i, data_.outcome(s - 1)) == 1.0) {
          next[i] = 1.0;  // event already happened: carried forward
        } else {
          predict_rows.push_back(i);
        }
      }
      if (!predict_rows.empty()) {
        try {
          if (fit_rows.empty()) throw FitError("no uncensored, event-free units to fit");
          Eigen::VectorXd z(static_cast<Eigen::Index>(fit_rows.size()));
          for (std::size_t r = 0; r < fit_rows.size(); ++r) {
            const double v = w[r] * ytil[fit_rows[r]];
            if (!std::isfinite(v)) throw FitError("iterated outcome is not finite for unit " + std::to_string(fit_rows[r]));
            z(static_cast<Eigen::Index>(r)) = v;
          }
          ModelMatrixSpec spec;
          spec.columns = data_.history(s);
          spec.columns.push_back(data_.treatment(s));
          spec.basis = config_.outcome.basis;
          spec.degree = config_.outcome.degree;
          for (int k = 0; k <= s; ++k) spec.protected_columns.push_back(data_.treatment(k));
          const Design design(data_, spec, raw_, fit_rows);
          StackOptions options = config_.outcome.stack;
          options.seed = derive_seed(derive_seed(derive_seed(config_.seed, static_cast<std::uint64_t>(t)),
                                                 static_cast<std::uint64_t>(s)),
                                     j);
          options.keep = design.protected_mask();
          const StackedLearner stack = fit_stack(design.expand(raw_, fit_rows), z, options);
          Eigen::VectorXd pred = stack.predict(design.expand(frame, predict_rows));
          if (weigh_prediction) {
            const auto records = stage_weights(s, j, frame, predict_rows);
            for (std::size_t r = 0; r < records.size(); ++r) pred(static_cast<Eigen::Index>(r)) *= records[r].weight;
            ++result.audit.weight_computations;
          }
          for (std::size_t r = 0; r < predict_rows.size(); ++r) next[predict_rows[r]] = pred(static_cast<Eigen::Index>(r));
          ++result.audit.outcome_regressions;
        } catch (const FitError& e) {
          throw FitError("outcome regression failed at target time " + std::to_string(t) + ", stage " +
                         std::to_string(s) + ", trajectory '" + grid_.label(j) + "': " + e.what());
        }
      }
      ytil = std::move(next);
    }

    double sum_w = 0.0, sum_wy = 0.0;
    if (weighted_) {
      const auto records = stage_weights(0, j, intervened(0, j));
      ++result.audit.weight_computations;
      for (std::size_t i = 0; i < n; ++i) {
        sum_w += records[i].weight;
        sum_wy += records[i].weight * ytil[i];
        if (records[i].branch == Branch::undefined) result.undefined = true;
      }
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        sum_w += 1.0;
        sum_wy += 1.0 * ytil[i];
      }
    }
    if (weighted_ && config_.stage0_mean == Stage0Mean::population) {
      result.value = sum_wy / static_cast<double>(n);
    } else if (sum_w > 0) {
      result.value = sum_wy / sum_w;
    } else {
      result.undefined = true;
      double total = 0.0;
      for (double v : ytil) total += v;
      result.value = total / static_cast<double>(n);
    }
    if (data_.schema(data_.outcome(t)).kind == ValueKind::binary) {
      result.value = std::clamp(result.value, 0.0, 1.0);
    }
    return result;
  }

 private:
  void finish(WeightRecord& rec, std::size_t unit, int s, std::size_t j) const {
    rec.unit = unit;
    rec.time = s;
    rec.trajectory = j;
  }

  // Chain level `level` (0..s, s = marginal) of stage s at a = a_s^{(j)}.
  std::vector<double> denominator(int s, int level, std::size_t j, const RawFrame& frame,
                                  std::span<const std::size_t> rows, double a) {
    if (config_.denominator == DenominatorSource::density) return density(s, level).evaluate(frame, rows, a);
    if (level == s) {
      const double m = marginal_mean(s, j, a);
      return std::vector<double>(rows.size(), m);
    }
    const DenominatorFit& fit = denominator_fit(s, level, j, a);
    const Eigen::VectorXd pred = fit.stack.predict(fit.design.expand(frame, rows));
    std::vector<double> out(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) out[r] = std::max(pred(static_cast<Eigen::Index>(r)), 0.0);
    return out;
  }

  double marginal_mean(int s, std::size_t j, double a) {
    const auto key = std::make_tuple(s, s, j);
    {
      std::lock_guard lock(mutex_);
      if (auto it = marginals_.find(key); it != marginals_.end()) return it->second;
    }
    const auto& rows_s = rows_[static_cast<std::size_t>(s)];
    if (rows_s.empty()) throw FitError("no rows to average the treatment density at time " + std::to_string(s));
    const auto g = density(s, -1).evaluate(raw_, rows_s, a);
    double total = 0.0;
    for (double v : g) total += v;
    const double m = total / static_cast<double>(g.size());
    std::lock_guard lock(mutex_);
    marginals_.emplace(key, m);
    return m;
  }

  struct DenominatorFit {
    Design design;
    StackedLearner stack;
  };

  // g(a_s | H_s) with A_0..A_{s*} set to the trajectory, regressed on
  // (H_{s*}, A_{s*}) over R_s.
  const DenominatorFit& denominator_fit(int s, int level, std::size_t j, double a) {
    const auto key = std::make_tuple(s, level, j);
    {
      std::lock_guard lock(mutex_);
      if (auto it = denominator_fits_.find(key); it != denominator_fits_.end()) return *it->second;
    }
    const int s_star = s - 1 - level;
    const auto& rows_s = rows_[static_cast<std::size_t>(s)];
    if (rows_s.empty()) throw FitError("no rows to regress the treatment density at time " + std::to_string(s));
    const auto g = density(s, -1).evaluate(intervened(s_star, j), rows_s, a);
    Eigen::VectorXd y(static_cast<Eigen::Index>(rows_s.size()));
    for (std::size_t r = 0; r < rows_s.size(); ++r) y(static_cast<Eigen::Index>(r)) = g[r];

    ModelMatrixSpec spec;
    spec.columns = data_.history(s_star);
    spec.columns.push_back(data_.treatment(s_star));
    spec.basis = config_.outcome.basis;
    spec.degree = config_.outcome.degree;
    for (int k = 0; k <= s_star; ++k) spec.protected_columns.push_back(data_.treatment(k));
    Design design(data_, spec, raw_, rows_s);
    StackOptions options = config_.outcome.stack;
    options.loss = Loss::squared;
    std::erase(options.kinds, LearnerKind::logistic);
    if (options.kinds.empty()) options.kinds.push_back(LearnerKind::ols);
    options.seed = derive_seed(derive_seed(derive_seed(config_.seed, 0x64656eULL), static_cast<std::uint64_t>(s)),
                               static_cast<std::uint64_t>(level) * 1000003ULL + j);
    options.keep = design.protected_mask();
    std::unique_ptr<DenominatorFit> fit;
    try {
      StackedLearner stack = fit_stack(design.expand(raw_, rows_s), y, options);
      fit = std::make_unique<DenominatorFit>(DenominatorFit{std::move(design), std::move(stack)});
    } catch (const FitError& e) {
      throw FitError("denominator regression at time " + std::to_string(s) + " failed: " + e.what());
    }
    std::lock_guard lock(mutex_);
    return *denominator_fits_.emplace(key, std::move(fit)).first->second;
  }

  // level -1: g(A_s | H_s); 0 <= level < s: g(A_s | A_{s*}, H_{s*}) with
  // s* = s-1-level; level == s: marginal g(A_s).
  const DensityModel& density(int s, int level) {
    std::lock_guard lock(mutex_);
    const auto key = std::make_pair(s, level);
    if (auto it = cache_.find(key); it != cache_.end()) return *it->second;
    std::vector<std::size_t> conditioning;
    if (level < 0) {
      conditioning = data_.history(s);
    } else if (level < s) {
      const int s_star = s - 1 - level;
      conditioning = data_.history(s_star);
      conditioning.push_back(data_.treatment(s_star));
    }
    try {
      auto model = std::make_unique<DensityModel>(data_, raw_, data_.treatment(s), conditioning,
                                                  rows_[static_cast<std::size_t>(s)], config_.density_for(s));
      ++fits_;
      return *cache_.emplace(key, std::move(model)).first->second;
    } catch (const FitError& e) {
      throw FitError("treatment density at time " + std::to_string(s) + " failed: " + e.what());
    }
  }

  const Dataset& data_;
  const InterventionGrid& grid_;
  const EstimatorConfig& config_;
  RawFrame raw_;
  std::vector<std::vector<std::size_t>> rows_;
  std::vector<std::size_t> all_rows_;
  bool weighted_ = false;
  WeightPlan plan_;
  std::mutex mutex_;
  std::map<std::pair<int, int>, std::unique_ptr<DensityModel>> cache_;
  std::map<std::tuple<int, int, std::size_t>, std::unique_ptr<DenominatorFit>> denominator_fits_;
  std::map<std::tuple<int, int, std::size_t>, double> marginals_;
  std::size_t fits_ = 0;
};

std::vector<int> target_times(const Dataset& data, const EstimatorConfig& config) {
  std::vector<int> times = config.times;
  if (times.empty()) {
    for (int t = 0; t <= data.horizon(); ++t) times.push_back(t);
  }
  for (int t : times) {
    if (t < 0 || t > data.horizon()) {
      throw ArgumentError("target time " + std::to_string(t) + " outside 0.." + std::to_string(data.horizon()));
    }
  }
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  return times;
}

}  // namespace

EstimateResult estimate(const Dataset& data, const InterventionGrid& grid, const EstimatorConfig& config) {
  config.validate();
  if (config.estimand == Estimand::cdrc_parametric) return estimate_parametric(data, grid, config);

  const auto times = target_times(data, config);
  Engine engine(data, grid, config);
  const bool weighted = config.estimand == Estimand::weighted;
  if (weighted) engine.prefit(times.back());

  struct Task {
    int t;
    std::size_t j;
  };
  std::vector<Task> tasks;
  for (int t : times) {
    for (std::size_t j = 0; j < grid.size(); ++j) tasks.push_back({t, j});
  }
  std::vector<Engine::TargetResult> results(tasks.size());
  parallel_for(tasks.size(), config.threads, [&](std::size_t k) { results[k] = engine.run(tasks[k].t, tasks[k].j); });

  EstimateResult out;
  out.curve.estimand = config.estimand;
  if (weighted) out.curve.c = config.weights->c;
  out.curve.labels = grid.labels();
  out.curve.meta = {data.rows(), config.seed, learner_label(config.outcome.stack)};
  for (std::size_t k = 0; k < tasks.size(); ++k) {
    out.curve.points.push_back({tasks[k].j, tasks[k].t, results[k].value, results[k].undefined});
    out.audit.push_back(results[k].audit);
  }
  std::sort(out.curve.points.begin(), out.curve.points.end(), [](const CurvePoint& a, const CurvePoint& b) {
    return a.trajectory != b.trajectory ? a.trajectory < b.trajectory : a.time < b.time;
  });
  for (std::size_t j = 0; j < grid.size(); ++j) {
    for (int t = 0; t <= data.horizon(); ++t) {
      const double a = grid.trajectory(j)[static_cast<std::size_t>(t)];
      const auto col = data.column(data.treatment(t));
      const auto [lo, hi] = std::minmax_element(col.begin(), col.end(), [](double x, double y) {
        return std::isnan(x) ? false : (std::isnan(y) ? true : x < y);
      });
      if (a < *lo || a > *hi) {
        out.warnings.push_back("trajectory '" + grid.label(j) + "' at time " + std::to_string(t) +
                               " lies outside the observed treatment range (extrapolated)");
      }
    }
  }
  if (weighted && config.keep_weights) {
    for (std::size_t j = 0; j < grid.size(); ++j) {
      for (int s = 0; s <= times.back(); ++s) {
        auto records = engine.stage_weights(s, j, engine.intervened(s, j));
        out.weights.insert(out.weights.end(), records.begin(), records.end());
      }
    }
  }
  out.density_fits = engine.density_fits();
  return out;
}

CurveEstimate estimate_cdrc_sequential(const Dataset& data, const InterventionGrid& grid, EstimatorConfig config) {
  config.estimand = Estimand::cdrc_sequential;
  return estimate(data, grid, config).curve;
}

CurveEstimate estimate_weighted(const Dataset& data, const InterventionGrid& grid, EstimatorConfig config) {
  config.estimand = Estimand::weighted;
  return estimate(data, grid, config).curve;
}

CurveEstimate estimate_weighted_survival(const Dataset& data, const InterventionGrid& grid, EstimatorConfig config) {
  config.estimand = Estimand::weighted;
  config.survival = true;
  return estimate(data, grid, config).curve;
}

CurveEstimate estimate_cdrc_parametric(const Dataset& data, const InterventionGrid& grid, EstimatorConfig config) {
  config.estimand = Estimand::cdrc_parametric;
  return estimate(data, grid, config).curve;
}

std::vector<WeightRecord> weight_records(const Dataset& data, const InterventionGrid& grid,
                                         const EstimatorConfig& config) {
  if (!config.weights) throw ConfigError("weight records need a weight plan");
  config.weights->validate();
  EstimatorConfig cfg = config;
  cfg.estimand = Estimand::weighted;
  Engine engine(data, grid, cfg);
  const auto times = target_times(data, cfg);
  engine.prefit(times.back());
  std::vector<std::vector<WeightRecord>> per(grid.size());
  parallel_for(grid.size(), cfg.threads, [&](std::size_t j) {
    for (int s = 0; s <= times.back(); ++s) {
      auto records = engine.stage_weights(s, j, engine.intervened(s, j));
      per[j].insert(per[j].end(), records.begin(), records.end());
    }
  });
  std::vector<WeightRecord> out;
  for (auto& p : per) out.insert(out.end(), p.begin(), p.end());
  return out;
}

}  // namespace cdrc
