#include "cdrc/simulation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <ostream>

#include "cdrc/csv.hpp"
#include "cdrc/error.hpp"
#include "cdrc/parallel.hpp"

namespace cdrc {
namespace {

constexpr double nan = std::numeric_limits<double>::quiet_NaN();

double expit(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double bernoulli(double p, FastRng& rng) { return rng.uniform() < p ? 1.0 : 0.0; }

double normal(double mu, double sigma, FastRng& rng) { return mu + sigma * rng.normal(); }

// Category 1..k from unnormalized probabilities; negatives count as zero.
template <std::size_t K>
double multinomial(std::array<double, K> p, FastRng& rng) {
  double total = 0.0;
  for (auto& v : p) {
    v = std::max(v, 0.0);
    total += v;
  }
  double u = rng.uniform() * total;
  for (std::size_t k = 0; k + 1 < K; ++k) {
    if (u < p[k]) return static_cast<double>(k + 1);
    u -= p[k];
  }
  return static_cast<double>(K);
}

// Unit simulators write cells in schema order. `forced` (length T+1) sets the
// treatments and switches censoring off; `expected` receives E(Y_t | parents).
using UnitSim = void (*)(FastRng&, const double*, double*, double*);

void unit_sim1(FastRng& rng, const double* forced, double* x, double* expected) {
  for (int t = 0; t <= 2; ++t) {
    double* cur = x + 4 * t;
    const double* prev = t > 0 ? x + 4 * (t - 1) : nullptr;
    double mu_a = 0.0;
    if (t == 0) {
      cur[0] = bernoulli(0.3, rng);
      cur[1] = normal(-1.0 + 2.0 * cur[0], 1.0, rng);
      mu_a = 7.0 + cur[0] + 0.7 * cur[1];
    } else {
      cur[0] = bernoulli(expit(-4.0 + prev[0] + 0.15 * prev[1] + 0.15 * prev[2]), rng);
      cur[1] = normal(0.5 * cur[0] + 0.25 * prev[1] + 0.5 * prev[2], 1.0, rng);
      mu_a = prev[2] + cur[0] - 0.1 * cur[1];
    }
    const double a = normal(mu_a, t == 0 ? 1.0 : 0.5, rng);
    cur[2] = forced ? forced[t] : a;
    const double mu_y = t == 0 ? -1.0 + 0.5 * cur[2] + 0.5 * cur[1] : -2.0 + 0.25 * cur[2] - 0.2 * cur[0] + cur[1];
    cur[3] = normal(mu_y, t == 0 ? 1.0 : 0.5, rng);
    if (expected) expected[t] = mu_y;
  }
}

void unit_sim2(FastRng& rng, const double* forced, double* x, double* expected) {
  // offsets of L1, L2, A, C, Y at time t
  auto base = [](int t) { return t == 0 ? 0 : 4 + 5 * (t - 1); };
  bool event = false;
  int censored_at = -1;
  for (int t = 0; t <= 4; ++t) {
    double* cur = x + base(t);
    double& l1 = cur[0];
    double& l2 = cur[1];
    double& a = cur[2];
    double mu_a = 0.0;
    if (t == 0) {
      l1 = bernoulli(0.3, rng);
      l2 = normal(-1.0 + 2.0 * l1, 1.0, rng);
      mu_a = 7.0 + l1 + 0.7 * l2;
    } else {
      const double* prev = x + base(t - 1);
      l1 = bernoulli(expit(-4.0 + prev[0] + 0.15 * prev[1] + 0.15 * prev[2]), rng);
      l2 = normal(0.5 * l1 + 0.25 * prev[1] + 0.5 * prev[2], 1.0, rng);
      mu_a = -2.0 + 0.5 * prev[2] + 0.75 * l1 + 0.35 * l2;
    }
    const double draw = normal(mu_a, t == 0 ? 1.0 : 0.5, rng);
    a = forced ? forced[t] : draw;
    double* y = t == 0 ? cur + 3 : cur + 4;
    if (t > 0) {
      double c = bernoulli(expit(-2.0 + 0.5 * l1 + 0.2 * a), rng);
      if (forced || event) c = 0.0;
      cur[3] = c;
      if (c == 1.0 && censored_at < 0) censored_at = t;
    }
    const double p = expit(-4.0 + 0.2 * a + 0.5 * l2);
    const double yd = bernoulli(p, rng);
    if (expected) expected[t] = event ? 1.0 : p;
    *y = event ? 1.0 : yd;
    event = event || *y == 1.0;
  }
  if (censored_at > 0) {
    x[base(censored_at) + 4] = nan;
    for (int t = censored_at + 1; t <= 4; ++t) {
      for (int k = 0; k < 5; ++k) x[base(t) + k] = nan;
    }
  }
}

const TruncSpec age_spec{0.693, 0.693, 1.0, 2.8, 2.7, 2.8};
const TruncSpec weight0_spec{2.26, 2.26, 2.67, 3.37, 3.02, 3.37};
const TruncSpec weight_spec{2.26, 2.26, 2.473, 3.37, 3.2, 3.37};
const TruncSpec efv0_spec{0.2032, 0.2032, 0.88, 21.0, 8.376, 21.0};
const TruncSpec efv_spec{0.2032, 0.2032, 0.88, 21.84, 8.37, 21.84};

void unit_sim3(FastRng& rng, const double* forced, double* x, double* expected) {
  enum { sex, genotype, age, nrti, weight0, cm0, dose0, efv0, vl0 };
  auto base = [](int t) { return 9 + 6 * (t - 1); };  // mems, weight, cm, dose, efv, vl
  x[sex] = bernoulli(0.5, rng);
  const bool male = x[sex] == 1.0;
  x[genotype] = multinomial<3>({expit(-0.103 + (male ? 0.223 : 0.173)), expit(-0.086 + (male ? 0.198 : 0.214)),
                                expit(-0.090 + (male ? 0.082 : 1.070))},
                               rng);
  x[age] = sample_trunc_normal(age_spec, 1.501, 0.369, rng);
  x[weight0] = sample_trunc_normal(weight0_spec, (1.5 + 0.2 * x[sex] + 0.774 * x[age]) * 0.94, 0.369, rng);
  const double ag = x[age];
  const bool older = ag > 1.4563;
  const double p12 = expit(-0.006 + (older ? ag * 0.1735 : ag * 0.1570));
  // the third level's lower branch uses the 0.14563 threshold as printed
  const double p3 = expit(-0.006 + (older ? ag * 0.1570 : 0.0) + (ag <= 0.14563 ? ag * 0.1818 : 0.0));
  x[nrti] = multinomial<3>({p12, p12, p3}, rng);
  x[cm0] = bernoulli(0.15, rng);
  {
    const double sw = std::sqrt(x[weight0]);
    const double q1 = expit(5.0 + sw * 8.0 - ag * 10.0);
    const double q2 = expit(4.0 + sw * 8.768 - ag * 9.06);
    const double q3 = expit(3.0 + sw * 6.562 - ag * 8.325);
    x[dose0] = multinomial<4>({q1, q2, q3, 1.0 - (q1 + q2 + q3)}, rng);
  }
  const double g = x[genotype];
  const double g_shift = (g <= 2.0 ? 2.66 : 0.0) + (g == 3.0 ? 4.6 : 0.0);
  const double e0 =
      sample_trunc_normal(efv0_spec, -8.0 + ag * 0.1 + g * 4.66 + x[dose0] * 0.1 + g_shift, 4.06, rng);
  x[efv0] = forced ? forced[0] : e0;
  {
    const double p = 1.0 - expit(0.4 + 1.9 * std::sqrt(x[efv0]));
    x[vl0] = bernoulli(p, rng);
    if (expected) expected[0] = p;
  }
  for (int t = 1; t <= 4; ++t) {
    double* cur = x + base(t);
    const double mems_prev = t >= 2 ? x[base(t - 1)] : 0.0;
    const double w_prev = t >= 2 ? x[base(t - 1) + 1] : x[weight0];
    const double cm_prev = t >= 2 ? x[base(t - 1) + 2] : x[cm0];
    const double dose_prev = t >= 2 ? x[base(t - 1) + 3] : x[dose0];
    cur[0] = bernoulli(expit(0.71 + cm_prev * 0.31 + (t >= 2 ? mems_prev * 0.31 : 0.0)), rng);
    cur[1] = sample_trunc_normal(weight_spec, w_prev * 1.04 - (cm_prev == 1.0 ? 0.05 : 0.0), 0.4, rng);
    cur[2] = bernoulli(1.0 - expit((cm_prev == 1.0 ? 0.5 : 0.0) + ag * 0.1 + w_prev * 0.1), rng);
    const double sw = std::sqrt(cur[1]);
    const double q1 = expit(4.0 + dose_prev * 0.5 + sw * 4.0 - ag * 10.0);
    const double q2 = expit(-8.0 + dose_prev * 0.5 + sw * 8.568 - ag * 9.06);
    const double q3 = expit(20.0 + dose_prev * 0.5 + sw * 6.562 - ag * 18.325);
    cur[3] = multinomial<4>({q1, q2, q3, 1.0 - (q1 + q2 + q3)}, rng);
    const double e = sample_trunc_normal(efv_spec, 0.1 * cur[3] + 0.1 * cur[0] + g_shift, 4.06, rng);
    cur[4] = forced ? forced[t] : e;
    const double lin = 1.0 - (t == 1 ? 0.6 : 0.0) - (t == 4 ? 1.2 : 0.0) + 0.1 * cm_prev +
                       (2.0 - (t == 3 ? 0.2 : 0.0)) * std::sqrt(cur[4]);
    const double p = 1.0 - expit(lin);
    cur[5] = bernoulli(p, rng);
    if (expected) expected[t] = p;
  }
}

UnitSim unit_simulator(SystemId id) {
  switch (id) {
    case SystemId::sim1: return unit_sim1;
    case SystemId::sim2: return unit_sim2;
    case SystemId::sim3: return unit_sim3;
  }
  throw ArgumentError("unknown system");
}

constexpr std::uint64_t unit_stream = 0x756e6974ULL;
constexpr std::uint64_t truth_stream = 0x7472757468ULL;

FastRng unit_rng(std::uint64_t seed, std::size_t i) { return FastRng(derive_seed(derive_seed(seed, unit_stream), i)); }

Dataset assemble(SystemId id, std::size_t n, const std::vector<double>& cells) {
  auto schema = system_schema(id);
  const std::size_t p = schema.size();
  std::vector<Dataset::Column> columns(p);
  for (std::size_t j = 0; j < p; ++j) {
    auto& col = columns[j];
    col.values.resize(n);
    for (std::size_t i = 0; i < n; ++i) col.values[i] = cells[i * p + j];
    if (schema[j].kind != ValueKind::categorical) continue;
    // level codes by first appearance, matching what reading the CSV back gives
    std::vector<double> seen;
    for (double& v : col.values) {
      if (std::isnan(v)) continue;
      auto it = std::find(seen.begin(), seen.end(), v);
      if (it == seen.end()) {
        seen.push_back(v);
        col.levels.push_back(std::to_string(static_cast<int>(v)));
        it = seen.end() - 1;
      }
      v = static_cast<double>(it - seen.begin());
    }
  }
  return Dataset(std::move(schema), std::move(columns));
}

}  // namespace

std::string_view to_string(SystemId id) {
  switch (id) {
    case SystemId::sim1: return "sim1";
    case SystemId::sim2: return "sim2";
    case SystemId::sim3: return "sim3";
  }
  return "?";
}

SystemId parse_system(std::string_view text) {
  if (text == "sim1") return SystemId::sim1;
  if (text == "sim2") return SystemId::sim2;
  if (text == "sim3") return SystemId::sim3;
  throw ArgumentError("unknown system '" + std::string(text) + "' (valid: sim1, sim2, sim3)");
}

double sample_trunc_normal(const TruncSpec& spec, double mu, double sigma, FastRng& rng) {
  const double x = normal(mu, sigma, rng);
  const double u = rng.uniform();
  if (x < spec.a) return spec.a1 + u * (spec.a2 - spec.a1);
  if (x > spec.b) return spec.b1 + u * (spec.b2 - spec.b1);
  return x;
}

std::vector<ColumnRole> system_schema(SystemId id) {
  std::vector<ColumnRole> s;
  auto add = [&s](std::string name, Role role, std::optional<int> t, ValueKind kind) {
    s.push_back({std::move(name), role, t, kind});
  };
  const auto tc = Role::time_covariate;
  const auto cont = ValueKind::continuous;
  const auto bin = ValueKind::binary;
  const auto cat = ValueKind::categorical;
  switch (id) {
    case SystemId::sim1:
    case SystemId::sim2: {
      const int T = system_horizon(id);
      const auto y_kind = id == SystemId::sim1 ? cont : bin;
      for (int t = 0; t <= T; ++t) {
        const auto k = std::to_string(t);
        add("L1." + k, tc, t, bin);
        add("L2." + k, tc, t, cont);
        add("A." + k, Role::treatment, t, cont);
        if (id == SystemId::sim2 && t > 0) add("C." + k, Role::censoring, t, bin);
        add("Y." + k, Role::outcome, t, y_kind);
      }
      break;
    }
    case SystemId::sim3: {
      add("sex", Role::baseline_covariate, std::nullopt, bin);
      add("genotype", Role::baseline_covariate, std::nullopt, cat);
      add("age", Role::baseline_covariate, std::nullopt, cont);
      add("nrti", Role::baseline_covariate, std::nullopt, cat);
      add("weight.0", tc, 0, cont);
      add("cm.0", tc, 0, bin);
      add("dose.0", tc, 0, cat);
      add("efv.0", Role::treatment, 0, cont);
      add("vl.0", Role::outcome, 0, bin);
      for (int t = 1; t <= 4; ++t) {
        const auto k = std::to_string(t);
        add("mems." + k, tc, t, bin);
        add("weight." + k, tc, t, cont);
        add("cm." + k, tc, t, bin);
        add("dose." + k, tc, t, cat);
        add("efv." + k, Role::treatment, t, cont);
        add("vl." + k, Role::outcome, t, bin);
      }
      break;
    }
  }
  return s;
}

int system_horizon(SystemId id) { return id == SystemId::sim1 ? 2 : 4; }

InterventionGrid default_grid(SystemId id) {
  switch (id) {
    case SystemId::sim1: return parse_grid_spec("2:11:1", 2);
    case SystemId::sim2: return parse_grid_spec("-7:13:1", 4);
    case SystemId::sim3: return parse_grid_spec("0:10:1", 4);
  }
  throw ArgumentError("unknown system");
}

Dataset simulate(SystemId id, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw ArgumentError("n must be at least 1");
  const UnitSim sim = unit_simulator(id);
  const std::size_t p = system_schema(id).size();
  std::vector<double> cells(n * p);
  for (std::size_t i = 0; i < n; ++i) {
    FastRng rng = unit_rng(seed, i);
    sim(rng, nullptr, cells.data() + i * p, nullptr);
  }
  return assemble(id, n, cells);
}

Dataset simulate_intervened(SystemId id, std::span<const std::vector<double>> forced, std::uint64_t seed) {
  if (forced.empty()) throw ArgumentError("n must be at least 1");
  const UnitSim sim = unit_simulator(id);
  const std::size_t p = system_schema(id).size();
  const auto len = static_cast<std::size_t>(system_horizon(id)) + 1;
  std::vector<double> cells(forced.size() * p);
  for (std::size_t i = 0; i < forced.size(); ++i) {
    if (forced[i].size() != len) throw ArgumentError("forced trajectory has the wrong length");
    FastRng rng = unit_rng(seed, i);
    sim(rng, forced[i].data(), cells.data() + i * p, nullptr);
  }
  return assemble(id, forced.size(), cells);
}

CurveEstimate counterfactual_truth(SystemId id, const InterventionGrid& grid, std::size_t n_mc, std::uint64_t seed,
                                   unsigned threads) {
  const int T = system_horizon(id);
  const auto len = static_cast<std::size_t>(T) + 1;
  if (grid.length() != len) throw ArgumentError("grid length does not match the system's time points");
  if (n_mc == 0) throw ArgumentError("n_mc must be at least 1");
  const UnitSim sim = unit_simulator(id);
  const std::size_t p = system_schema(id).size();

  // Fixed chunking keeps the summation order independent of the thread count.
  const std::size_t chunks = std::min<std::size_t>(n_mc, 64);
  std::vector<std::vector<double>> partial(grid.size() * chunks, std::vector<double>(len, 0.0));
  parallel_for(grid.size() * chunks, threads, [&](std::size_t task) {
    const std::size_t j = task / chunks;
    const std::size_t k = task % chunks;
    const std::size_t begin = n_mc * k / chunks;
    const std::size_t end = n_mc * (k + 1) / chunks;
    const auto traj = grid.trajectory(j);
    std::vector<double> cells(p);
    std::vector<double> expected(len);
    auto& sum = partial[task];
    for (std::size_t i = begin; i < end; ++i) {
      FastRng rng = FastRng(derive_seed(derive_seed(seed, truth_stream), i));
      sim(rng, traj.data(), cells.data(), expected.data());
      for (std::size_t t = 0; t < len; ++t) sum[t] += expected[t];
    }
  });

  CurveEstimate truth;
  truth.estimand = Estimand::cdrc_sequential;
  truth.labels = grid.labels();
  truth.meta = {n_mc, seed, "truth"};
  for (std::size_t j = 0; j < grid.size(); ++j) {
    for (std::size_t t = 0; t < len; ++t) {
      double total = 0.0;
      for (std::size_t k = 0; k < chunks; ++k) total += partial[j * chunks + k][t];
      truth.points.push_back({j, static_cast<int>(t), total / static_cast<double>(n_mc), false});
    }
  }
  return truth;
}

double ExperimentReport::failure_rate(std::size_t arm) const {
  return replicates == 0 ? 0.0 : static_cast<double>(failures.at(arm)) / static_cast<double>(replicates);
}

const ExperimentRow& ExperimentReport::row(std::string_view arm, std::size_t trajectory, int time) const {
  for (const auto& r : rows) {
    if (r.arm == arm && r.trajectory == trajectory && r.time == time) return r;
  }
  throw ArgumentError("no experiment row for " + std::string(arm) + " at trajectory " + std::to_string(trajectory) +
                      ", time " + std::to_string(time));
}

ExperimentReport run_experiment(SystemId id, const InterventionGrid& grid, std::span<const ExperimentArm> arms,
                                const ExperimentOptions& options) {
  if (options.replicates == 0) throw ArgumentError("at least one replicate is required");
  if (arms.empty()) throw ArgumentError("no estimators to evaluate");
  if (grid.length() != static_cast<std::size_t>(system_horizon(id)) + 1) {
    throw ArgumentError("grid length does not match the system's time points");
  }
  for (const auto& arm : arms) arm.config.validate();

  ExperimentReport report;
  report.system = id;
  report.n = options.n;
  report.replicates = options.replicates;
  report.seed = options.seed;
  report.labels = grid.labels();
  report.truth = counterfactual_truth(id, grid, options.truth_draws, derive_seed(options.seed, truth_stream),
                                      options.threads);

  std::vector<std::vector<std::optional<CurveEstimate>>> fits(arms.size(),
                                                              std::vector<std::optional<CurveEstimate>>(options.replicates));
  parallel_for(options.replicates, options.threads, [&](std::size_t r) {
    const std::uint64_t rep_seed = derive_seed(options.seed, r);
    const Dataset data = simulate(id, options.n, rep_seed);
    for (std::size_t a = 0; a < arms.size(); ++a) {
      EstimatorConfig config = arms[a].config;
      config.seed = derive_seed(rep_seed, a);
      config.threads = 1;
      config.keep_weights = false;
      try {
        fits[a][r] = estimate(data, grid, config).curve;
      } catch (const FitError&) {
      } catch (const SchemaError&) {
      }
    }
  });

  for (std::size_t a = 0; a < arms.size(); ++a) {
    std::size_t failed = 0;
    const CurveEstimate* first = nullptr;
    for (const auto& f : fits[a]) {
      if (!f) ++failed;
      else if (!first) first = &*f;
    }
    report.failures.push_back(failed);
    if (first) {
      for (const auto& point : first->points) {
        ExperimentRow row;
        row.arm = arms[a].label;
        row.arm_index = a;
        row.trajectory = point.trajectory;
        row.time = point.time;
        row.truth = report.truth.value(point.trajectory, point.time);
        std::vector<double> values;
        for (const auto& f : fits[a]) {
          if (!f) continue;
          const auto& p = f->at(point.trajectory, point.time);
          if (p.undefined) ++row.undefined;
          values.push_back(p.value);
        }
        row.used = values.size();
        if (values.empty()) {
          row.mean = row.bias = row.sd = nan;
        } else {
          double sum = 0.0;
          for (double v : values) sum += v;
          row.mean = sum / static_cast<double>(values.size());
          row.bias = row.mean - row.truth;
          double ss = 0.0;
          for (double v : values) ss += (v - row.mean) * (v - row.mean);
          row.sd = values.size() > 1 ? std::sqrt(ss / static_cast<double>(values.size() - 1)) : nan;
        }
        report.rows.push_back(row);
      }
    }
    if (options.keep_estimates) {
      std::vector<CurveEstimate> kept;
      for (auto& f : fits[a]) kept.push_back(f ? std::move(*f) : CurveEstimate{});
      report.estimates.push_back(std::move(kept));
    }
  }
  return report;
}

void write_experiment_csv(const ExperimentReport& report, std::ostream& out) {
  out << "system,n,arm,trajectory_label,time,truth,mean,bias,sd,used,undefined,failure_rate\n";
  for (const auto& row : report.rows) {
    out << to_string(report.system) << ',' << report.n << ',' << csv::escape(row.arm) << ','
        << csv::escape(report.labels.at(row.trajectory)) << ',' << row.time << ',' << csv::format_number(row.truth)
        << ',' << csv::format_number(row.mean) << ',' << csv::format_number(row.bias) << ','
        << csv::format_number(row.sd) << ',' << row.used << ',' << row.undefined << ','
        << csv::format_number(report.failure_rate(row.arm_index)) << '\n';
  }
}

}  // namespace cdrc
