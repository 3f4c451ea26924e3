#include "cli/cli.hpp"

#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cdrc/csv.hpp"
#include "cdrc/data.hpp"
#include "cdrc/diagnostics.hpp"
#include "cdrc/error.hpp"
#include "cdrc/gcomp.hpp"
#include "cdrc/inference.hpp"
#include "cdrc/simulation.hpp"
#include "cli/manifest.hpp"
#include "cli/settings.hpp"

namespace cdrc::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Command {
  explicit Command(CLI::App* sub) : app(sub) {}

  CLI::App* app = nullptr;
  json defaults;
  std::map<std::string, std::string> values;
  std::map<std::string, bool> switches;
  std::vector<std::pair<std::string, CLI::Option*>> options;
  std::string config;

  void option(const std::string& key, const std::string& help) {
    std::string flag = "--" + key;
    for (auto& ch : flag) {
      if (ch == '_') ch = '-';
    }
    options.emplace_back(key, app->add_option(flag, values[key], help));
  }
  void flag(const std::string& key, const std::string& help) {
    std::string flag = "--" + key;
    for (auto& ch : flag) {
      if (ch == '_') ch = '-';
    }
    options.emplace_back(key, app->add_flag(flag, switches[key], help));
  }

  Settings settings(const std::string& name) const {
    Settings s(defaults);
    if (!config.empty()) s.overlay_file(config, name);
    s.overlay_environment();
    for (const auto& [key, opt] : options) {
      if (opt->count() == 0) continue;
      if (switches.count(key)) s.set(key, switches.at(key));
      else s.set(key, values.at(key));
    }
    return s;
  }
};

void add_common(Command& cmd, const char* out_help = "output directory") {
  cmd.app->add_option("--config", cmd.config, "JSON file with option values");
  cmd.option("seed", "random seed (env CDRC_SEED)");
  cmd.option("threads", "worker threads (env CDRC_THREADS)");
  cmd.option("out", out_help);
}

void add_estimator_options(Command& cmd) {
  cmd.option("estimand", "cdrc_sequential | cdrc_parametric | weighted");
  cmd.option("c", "comma-separated truncation constants for the weighted estimand ('auto' = default rule)");
  cmd.option("variant", "weight function: fallback | simple");
  cmd.option("placement", "stage weight placement: outcome | prediction");
  cmd.option("denominator", "weight denominators: density | regression");
  cmd.option("stage0_mean", "time-zero weighted mean: hajek | population");
  cmd.option("learners", "comma-separated outcome learners (mean_only, ols, ridge, lasso, logistic, polynomial_ols, stumps)");
  cmd.option("folds", "cross-validation folds of the learner stack");
  cmd.option("loss", "stacking loss: squared | log");
  cmd.option("screening", "none | lasso_path | association_screen");
  cmd.option("screen_threshold", "association screening threshold");
  cmd.option("basis", "outcome model basis: linear | polynomial | interactions | saturated");
  cmd.option("degree", "polynomial degree");
  cmd.option("density", "treatment density: gaussian_regression | binning");
  cmd.option("density_basis", "density model basis");
  cmd.option("bins", "bins of the binning density");
  cmd.option("min_rows", "minimum rows for a density fit");
  cmd.flag("survival", "event outcome with censoring");
  cmd.option("times", "comma-separated target times (default: all)");
  cmd.option("mc_draws", "Monte-Carlo draws of parametric g-computation");
}

json estimator_defaults() {
  return {{"seed", 0},          {"threads", 1},         {"out", "."},
          {"estimand", "cdrc_sequential"},               {"c", "0.01"},
          {"variant", "fallback"}, {"placement", "outcome"}, {"denominator", "density"}, {"stage0_mean", "hajek"}, {"learners", "ols"},  {"folds", 10},
          {"loss", "squared"},  {"screening", "none"},  {"screen_threshold", 0.1},
          {"basis", "linear"},  {"degree", 2},          {"density", "gaussian_regression"},
          {"density_basis", "linear"},                   {"bins", 20},
          {"min_rows", 20},     {"survival", false},    {"times", ""},
          {"mc_draws", 10000}};
}

unsigned threads_of(const Settings& s) {
  const std::size_t t = s.count("threads");
  return static_cast<unsigned>(std::max<std::size_t>(t, 1));
}

EstimatorConfig make_config(const Settings& s) {
  EstimatorConfig config;
  config.estimand = parse_estimand(s.text("estimand"));
  config.seed = s.seed();
  config.threads = threads_of(s);
  config.survival = s.flag("survival");
  config.placement = parse_weight_placement(s.text("placement"));
  config.denominator = parse_denominator_source(s.text("denominator"));
  config.stage0_mean = parse_stage0_mean(s.text("stage0_mean"));
  config.monte_carlo_draws = s.count("mc_draws");
  for (double t : s.numbers("times")) config.times.push_back(static_cast<int>(t));
  config.outcome.basis = parse_basis(s.text("basis"));
  config.outcome.degree = static_cast<int>(s.count("degree"));
  auto& stack = config.outcome.stack;
  stack.kinds.clear();
  for (const auto& k : s.texts("learners")) stack.kinds.push_back(parse_learner_kind(k));
  stack.folds = static_cast<int>(s.count("folds"));
  stack.loss = parse_loss(s.text("loss"));
  stack.screening = parse_screening(s.text("screening"));
  stack.screen_threshold = s.number("screen_threshold");
  config.density.strategy = parse_density_strategy(s.text("density"));
  config.density.basis = parse_basis(s.text("density_basis"));
  config.density.bins = static_cast<int>(s.count("bins"));
  config.density.min_rows = s.count("min_rows");
  return config;
}

std::vector<double> c_values(const Settings& s, std::size_t n) {
  std::vector<double> out;
  for (const auto& token : s.texts("c")) {
    out.push_back(token == "auto" ? default_c(n) : parse_double(token, "--c"));
  }
  if (out.empty()) throw ArgumentError("the weighted estimand needs at least one c");
  return out;
}

WeightPlan make_plan(const Settings& s, double c) {
  WeightPlan plan;
  plan.c = c;
  plan.variant = parse_weight_variant(s.text("variant"));
  return plan;
}

struct Inputs {
  Dataset data;
  InterventionGrid grid;
};

Inputs load_inputs(const Settings& s, Manifest& manifest) {
  const fs::path data_path = s.text("data");
  const fs::path schema_path = s.text("schema");
  if (!fs::exists(data_path)) throw ArgumentError("data file not found: " + data_path.string());
  if (!fs::exists(schema_path)) throw ArgumentError("schema file not found: " + schema_path.string());
  Dataset data = load_dataset(data_path, load_schema(schema_path));
  manifest.add_input("data", data_path);
  manifest.add_input("schema", schema_path);
  const std::string spec = s.text("grid");
  if (fs::is_regular_file(spec)) {
    manifest.add_input("grid", spec);
    return {std::move(data), load_grid_csv(spec)};
  }
  InterventionGrid grid = parse_grid_spec(spec, data.horizon());
  return {std::move(data), std::move(grid)};
}

fs::path output_dir(const Settings& s) {
  fs::path dir = s.text("out");
  fs::create_directories(dir);
  return dir;
}

template <typename Writer>
void write_file(const fs::path& path, Manifest& manifest, Writer&& writer) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArgumentError("cannot write " + path.string());
  writer(out);
  out.close();
  manifest.add_output(path);
}

std::string curve_stem(Estimand estimand, std::optional<double> c) {
  std::string stem(to_string(estimand));
  if (c) stem += "_c" + csv::format_number(*c);
  return stem;
}

std::size_t report_undefined(const CurveEstimate& curve, std::ostream& err) {
  std::size_t count = 0;
  for (const auto& p : curve.points) {
    if (!p.undefined) continue;
    ++count;
    err << "undefined: " << curve_stem(curve.estimand, curve.c) << " trajectory " << curve.labels.at(p.trajectory)
        << " time " << p.time << '\n';
  }
  return count;
}

int cmd_simulate(const Settings& s, std::ostream& out) {
  const SystemId id = parse_system(s.text("system"));
  const std::size_t n = s.count("n");
  const Dataset data = simulate(id, n, s.seed());
  const fs::path path = s.text("out");
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path schema_path = s.has("schema_out") ? fs::path(s.text("schema_out")) : fs::path(path).replace_extension(".schema.json");
  Manifest manifest("simulate", s.effective());
  save_dataset(data, path);
  manifest.add_output(path);
  write_file(schema_path, manifest, [&](std::ostream& o) { o << schema_to_json(data.schema()) << '\n'; });
  manifest.note("seed", s.seed());
  manifest.write(fs::path(path).replace_extension(".manifest.json"));
  out << "wrote " << data.rows() << " rows x " << data.cols() << " columns to " << path.string() << '\n';
  return ok;
}

int cmd_estimate(const Settings& s, std::size_t replicates, std::ostream& out, std::ostream& err) {
  const fs::path dir = output_dir(s);
  Manifest manifest(replicates > 0 ? "bootstrap" : "estimate", s.effective());
  const Inputs in = load_inputs(s, manifest);
  EstimatorConfig base = make_config(s);
  std::vector<std::optional<double>> cs{std::nullopt};
  if (base.estimand == Estimand::weighted) {
    cs.clear();
    for (double c : c_values(s, in.data.rows())) cs.emplace_back(c);
  }
  const bool keep_weights = s.flag("weights");
  std::size_t undefined = 0;
  for (const auto& c : cs) {
    EstimatorConfig config = base;
    if (c) config.weights = make_plan(s, *c);
    config.keep_weights = keep_weights && c.has_value();
    config.validate();
    const std::string stem = curve_stem(config.estimand, c);
    EstimateResult result = estimate(in.data, in.grid, config);
    for (const auto& w : result.warnings) err << "warning: " << w << '\n';
    write_file(dir / ("curve_" + stem + ".csv"), manifest, [&](std::ostream& o) { write_curve_csv(result.curve, o); });
    if (config.keep_weights) {
      write_file(dir / ("weights_" + stem + ".csv"), manifest,
                 [&](std::ostream& o) { write_weight_csv(result.weights, in.grid.labels(), *c, o); });
    }
    undefined += report_undefined(result.curve, err);
    if (replicates > 0) {
      BootstrapOptions options;
      options.replicates = replicates;
      options.level = s.number("level");
      options.seed = derive_seed(config.seed, 0x626f6f74ULL);
      options.threads = config.threads;
      const BootstrapResult boot = bootstrap(in.data, in.grid, config, options);
      if (!boot.failed.empty()) err << "warning: " << boot.failed.size() << " bootstrap replicates failed\n";
      write_file(dir / ("bands_" + stem + ".csv"), manifest, [&](std::ostream& o) { write_bands_csv(boot, o); });
    }
    out << "estimated " << stem << '\n';
  }
  manifest.note("seed", base.seed);
  manifest.write(dir / "manifest.json");
  return undefined > 0 ? undefined_cells : ok;
}

int cmd_diagnose(const Settings& s, std::ostream& out) {
  const fs::path dir = output_dir(s);
  Manifest manifest("diagnose", s.effective());
  const Inputs in = load_inputs(s, manifest);
  EstimatorConfig config = make_config(s);
  config.estimand = Estimand::weighted;
  const std::vector<double> c_grid = s.numbers("c_grid");
  if (c_grid.empty()) throw ArgumentError("empty --c-grid");
  config.weights = make_plan(s, c_grid.front());
  const auto records = weight_records(in.data, in.grid, config);
  const auto surface = weight_proportion_surface(records, c_grid);
  const auto average = visit_average(surface);
  SupportOptions support;
  support.small_sample = s.count("small_sample");
  support.covariate_adjusted = s.flag("covariate_adjusted");
  const auto cells = binned_support(in.data, in.grid, support);
  const auto& labels = in.grid.labels();
  write_file(dir / "weight_proportion.csv", manifest, [&](std::ostream& o) { write_proportion_csv(surface, labels, o); });
  write_file(dir / "weight_proportion_avg.csv", manifest,
             [&](std::ostream& o) { write_proportion_csv(average, labels, o); });
  write_file(dir / "binned_support.csv", manifest, [&](std::ostream& o) { write_support_csv(cells, labels, o); });
  manifest.note("seed", config.seed);
  manifest.write(dir / "manifest.json");
  out << "wrote diagnostics to " << dir.string() << '\n';
  return ok;
}

std::vector<ExperimentArm> make_arms(const Settings& s, std::size_t n) {
  const EstimatorConfig base = make_config(s);
  std::vector<ExperimentArm> arms;
  for (const auto& token : s.texts("estimators")) {
    ExperimentArm arm;
    arm.label = token;
    arm.config = base;
    const auto colon = token.find(':');
    arm.config.estimand = parse_estimand(token.substr(0, colon));
    if (arm.config.estimand == Estimand::weighted) {
      if (colon == std::string::npos) throw ArgumentError("weighted estimator needs a c, e.g. weighted:0.01");
      const std::string c = token.substr(colon + 1);
      arm.config.weights = make_plan(s, c == "auto" ? default_c(n) : parse_double(c, "estimator " + token));
    } else if (colon != std::string::npos) {
      throw ArgumentError("only the weighted estimator takes a c: '" + token + "'");
    }
    arms.push_back(std::move(arm));
  }
  if (arms.empty()) throw ArgumentError("empty estimator set");
  return arms;
}

int cmd_experiment(const Settings& s, std::ostream& out) {
  const SystemId id = parse_system(s.text("system"));
  const fs::path dir = output_dir(s);
  Manifest manifest("experiment", s.effective());
  Settings effective = s;
  if (!s.has("survival_set")) effective.set("survival", s.flag("survival") || id == SystemId::sim2);
  const InterventionGrid grid = s.has("grid") ? parse_grid_spec(s.text("grid"), system_horizon(id)) : default_grid(id);
  const std::vector<double> ns = s.numbers("n");
  if (ns.empty()) throw ArgumentError("missing --n");
  ExperimentOptions options;
  options.replicates = s.count("R");
  options.seed = s.seed();
  options.truth_draws = s.count("truth_draws");
  options.threads = threads_of(s);
  json per_n = json::array();
  bool truth_written = false;
  for (double nv : ns) {
    if (!(nv >= 1) || nv != std::floor(nv)) throw ArgumentError("--n must list positive integers");
    options.n = static_cast<std::size_t>(nv);
    const auto arms = make_arms(effective, options.n);
    const ExperimentReport report = run_experiment(id, grid, arms, options);
    const std::string name = "experiment_" + std::string(to_string(id)) + "_n" + std::to_string(options.n) + ".csv";
    write_file(dir / name, manifest, [&](std::ostream& o) { write_experiment_csv(report, o); });
    if (!truth_written) {
      write_file(dir / ("truth_" + std::string(to_string(id)) + ".csv"), manifest,
                 [&](std::ostream& o) { write_curve_csv(report.truth, o); });
      truth_written = true;
    }
    json failures = json::object();
    for (std::size_t a = 0; a < arms.size(); ++a) failures[arms[a].label] = report.failure_rate(a);
    per_n.push_back({{"n", options.n}, {"replicates", options.replicates}, {"failure_rate", failures}});
    out << "experiment " << to_string(id) << " n=" << options.n << " done\n";
  }
  manifest.note("system", std::string(to_string(id)));
  manifest.note("runs", per_n);
  manifest.note("seed", options.seed);
  manifest.write(dir / "manifest.json");
  return ok;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Causal dose-response curves for longitudinal continuous interventions"};
  app.require_subcommand(1);
  app.set_version_flag("--version", CDRC_VERSION);

  Command sim{app.add_subcommand("simulate", "draw a dataset from a built-in system")};
  sim.option("system", "sim1 | sim2 | sim3");
  sim.option("n", "number of units");
  sim.option("schema_out", "schema JSON path (default: next to --out)");
  add_common(sim, "data CSV path");
  sim.defaults = {{"seed", 0}, {"threads", 1}, {"out", "data.csv"}};

  auto data_options = [](Command& cmd) {
    cmd.option("data", "wide-format CSV");
    cmd.option("schema", "column-role JSON");
    cmd.option("grid", "grid spec 'from:to[:step]', 'v1,v2,...' or a grid CSV");
  };

  Command est{app.add_subcommand("estimate", "estimate a curve")};
  data_options(est);
  add_common(est);
  add_estimator_options(est);
  est.option("bootstrap", "bootstrap replicates (0 = none)");
  est.option("level", "confidence level of bootstrap bands");
  est.flag("weights", "also write the per-unit weights");
  est.defaults = estimator_defaults();
  est.defaults["bootstrap"] = 0;
  est.defaults["level"] = 0.95;

  Command boot{app.add_subcommand("bootstrap", "estimate a curve with percentile bootstrap bands")};
  data_options(boot);
  add_common(boot);
  add_estimator_options(boot);
  boot.option("B", "bootstrap replicates");
  boot.option("level", "confidence level");
  boot.flag("weights", "also write the per-unit weights");
  boot.defaults = estimator_defaults();
  boot.defaults["B"] = 200;
  boot.defaults["level"] = 0.95;

  Command diag{app.add_subcommand("diagnose", "conditional support diagnostics")};
  data_options(diag);
  add_common(diag);
  add_estimator_options(diag);
  diag.option("c_grid", "comma-separated c values of the weight-proportion surface");
  diag.option("small_sample", "followers below which a support cell is flagged");
  diag.flag("covariate_adjusted", "adjust binned support for history");
  diag.defaults = estimator_defaults();
  diag.defaults["c_grid"] = "0.001,0.01,0.025,0.2,1";
  diag.defaults["small_sample"] = 10;
  diag.defaults["covariate_adjusted"] = false;

  Command exp{app.add_subcommand("experiment", "Monte-Carlo bias study on a built-in system")};
  exp.option("system", "sim1 | sim2 | sim3");
  exp.option("estimators", "comma-separated: cdrc_sequential, cdrc_parametric, weighted:<c>");
  exp.option("R", "replications");
  exp.option("n", "comma-separated sample sizes");
  exp.option("grid", "grid spec (default: the system's grid)");
  exp.option("truth_draws", "Monte-Carlo units of the counterfactual truth");
  add_common(exp);
  add_estimator_options(exp);
  exp.defaults = estimator_defaults();
  exp.defaults["estimators"] = "";
  exp.defaults["R"] = 50;
  exp.defaults["truth_draws"] = 1000000;

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return ok;
  } catch (const CLI::CallForVersion& e) {
    out << CDRC_VERSION << '\n';
    return ok;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    if (e.get_exit_code() == 0) return ok;
    return argument_error;
  }

  try {
    if (sim.app->parsed()) return cmd_simulate(sim.settings("simulate"), out);
    if (est.app->parsed()) {
      const Settings s = est.settings("estimate");
      return cmd_estimate(s, s.count("bootstrap"), out, err);
    }
    if (boot.app->parsed()) {
      const Settings s = boot.settings("bootstrap");
      const std::size_t B = s.count("B");
      if (B == 0) throw ArgumentError("--B must be positive");
      return cmd_estimate(s, B, out, err);
    }
    if (diag.app->parsed()) return cmd_diagnose(diag.settings("diagnose"), out);
    if (exp.app->parsed()) {
      Settings s = exp.settings("experiment");
      bool survival_given = false;
      for (const auto& [key, opt] : exp.options) {
        if (key == "survival" && opt->count() > 0) survival_given = true;
      }
      if (survival_given) s.set("survival_set", true);
      return cmd_experiment(s, out);
    }
  } catch (const ArgumentError& e) {
    err << "argument error: " << e.what() << '\n';
    return argument_error;
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << '\n';
    return argument_error;
  } catch (const SchemaError& e) {
    err << "schema error: " << e.what() << '\n';
    return argument_error;
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << '\n';
    return argument_error;
  } catch (const FitError& e) {
    err << "fit error: " << e.what() << '\n';
    return internal_error;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return internal_error;
  }
  return internal_error;
}

}  // namespace cdrc::cli
