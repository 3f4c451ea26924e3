#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cdrc/data.hpp"
#include "cdrc/gcomp.hpp"
#include "cdrc/random.hpp"

namespace cdrc {

enum class SystemId { sim1, sim2, sim3 };
std::string_view to_string(SystemId id);
SystemId parse_system(std::string_view text);  // ArgumentError listing the valid ids

/// N_[a,a1,a2,b,b1,b2]: draws below a are replaced by U(a1,a2), draws above b by U(b1,b2).
struct TruncSpec {
  double a = 0.0, a1 = 0.0, a2 = 0.0;
  double b = 0.0, b1 = 0.0, b2 = 0.0;
};

/// Always consumes one normal and one uniform so streams stay aligned.
double sample_trunc_normal(const TruncSpec& spec, double mu, double sigma, FastRng& rng);

std::vector<ColumnRole> system_schema(SystemId id);
int system_horizon(SystemId id);
/// Constant strategies over the intervention range studied for each system.
InterventionGrid default_grid(SystemId id);

/// Draws n units. Unit i uses its own stream derived from (seed, i), so the
/// first m units of a larger sample equal a sample of size m.
///
/// sim2: Y_t is absorbing, and once C_t = 1 the outcome at t and every later
/// column are missing.
Dataset simulate(SystemId id, std::size_t n, std::uint64_t seed);

/// As simulate, but unit i's treatments are set to forced[i] and censoring to 0.
/// With forced[i] equal to unit i's observed path this reproduces simulate().
Dataset simulate_intervened(SystemId id, std::span<const std::vector<double>> forced, std::uint64_t seed);

/// Mean of E(Y_t | parents) over n_mc units simulated with treatments set to
/// each trajectory and censoring set to 0. Units share random numbers across
/// trajectories.
CurveEstimate counterfactual_truth(SystemId id, const InterventionGrid& grid, std::size_t n_mc, std::uint64_t seed,
                                   unsigned threads = 1);

struct ExperimentArm {
  std::string label;
  EstimatorConfig config;
};

struct ExperimentOptions {
  std::size_t replicates = 50;
  std::size_t n = 1000;
  std::uint64_t seed = 0;
  std::size_t truth_draws = 1000000;
  unsigned threads = 1;
  bool keep_estimates = false;
};

struct ExperimentRow {
  std::string arm;
  std::size_t arm_index = 0;
  std::size_t trajectory = 0;
  int time = 0;
  double truth = 0.0;
  double mean = 0.0;
  double bias = 0.0;
  double sd = 0.0;
  std::size_t used = 0;       // replicates that returned a value (flagged ones included)
  std::size_t undefined = 0;  // of those, replicates whose cell is flagged undefined
};

struct ExperimentReport {
  SystemId system = SystemId::sim1;
  std::size_t n = 0;
  std::size_t replicates = 0;
  std::uint64_t seed = 0;
  CurveEstimate truth;
  std::vector<std::string> labels;
  std::vector<ExperimentRow> rows;
  std::vector<std::size_t> failures;  // per arm: replicates whose estimator threw
  std::vector<std::vector<CurveEstimate>> estimates;  // [arm][replicate], when kept; failed replicates are empty

  double failure_rate(std::size_t arm) const;
  const ExperimentRow& row(std::string_view arm, std::size_t trajectory, int time) const;
};

/// Replicate r simulates with derive_seed(seed, r) and fits every arm with
/// estimator seed derive_seed(derive_seed(seed, r), arm). Estimator errors are
/// counted per arm and the replicate is left out of that arm's summaries.
ExperimentReport run_experiment(SystemId id, const InterventionGrid& grid, std::span<const ExperimentArm> arms,
                                 const ExperimentOptions& options);

/// system,n,arm,trajectory_label,time,truth,mean,bias,sd,used,undefined,failure_rate
void write_experiment_csv(const ExperimentReport& report, std::ostream& out);

}  // namespace cdrc
