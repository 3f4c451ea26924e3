#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cdrc/data.hpp"
#include "cdrc/density.hpp"
#include "cdrc/design.hpp"
#include "cdrc/learners.hpp"
#include "cdrc/weights.hpp"

namespace cdrc {

struct OutcomeModel {
  StackOptions stack;
  Basis basis = Basis::linear;
  int degree = 2;
};

/// Where the stage weight enters a weighted stage regression: multiplied into
/// the regressed outcome, E(w Y~ | A, H), or applied to the predictions of an
/// unweighted fit, w * E(Y~ | A, H). Both target the same quantity because w is
/// evaluated on the intervened history.
enum class WeightPlacement { outcome, prediction };
std::string_view to_string(WeightPlacement placement);
WeightPlacement parse_weight_placement(std::string_view text);

/// Source of the weight denominators g(A_s | A_{s*}, H_{s*}) and g(A_s):
/// their own fitted density models, or the numerator density evaluated at a_s
/// and regressed on (H_{s*}, A_{s*}) with the outcome learners (its mean for
/// the marginal).
enum class DenominatorSource { density, regression };
std::string_view to_string(DenominatorSource source);
DenominatorSource parse_denominator_source(std::string_view text);

/// Time-zero average of the weighted iterated outcome: divided by the weight
/// total (hajek) or by the number of units (population).
enum class Stage0Mean { hajek, population };
std::string_view to_string(Stage0Mean mean);
Stage0Mean parse_stage0_mean(std::string_view text);

struct EstimatorConfig {
  Estimand estimand = Estimand::cdrc_sequential;
  std::optional<WeightPlan> weights;  // required for the weighted estimand
  WeightPlacement placement = WeightPlacement::outcome;
  DenominatorSource denominator = DenominatorSource::density;
  Stage0Mean stage0_mean = Stage0Mean::hajek;
  DensityOptions density;
  std::map<int, DensityOptions> density_at;  // per-time overrides
  OutcomeModel outcome;
  std::uint64_t seed = 0;
  std::size_t monte_carlo_draws = 10000;
  /// Event-indicator outcome with censoring: restrict fits to uncensored,
  /// event-free units and carry events forward.
  bool survival = false;
  std::vector<int> times;  // target times; empty means 0..T
  unsigned threads = 1;
  bool keep_weights = false;
  /// Columns (time covariates and outcomes) given a parametric conditional
  /// model; absent means "all of them".
  std::optional<std::vector<std::string>> parametric_models;

  void validate() const;  // throws ConfigError
  const DensityOptions& density_for(int time) const;
};

/// Per (target time, trajectory) bookkeeping of the recursion.
struct StageAudit {
  int time = 0;
  std::size_t trajectory = 0;
  int outcome_regressions = 0;
  int weight_computations = 0;
};

struct EstimateResult {
  CurveEstimate curve;
  std::vector<WeightRecord> weights;  // filled when keep_weights is set
  std::vector<StageAudit> audit;
  std::size_t density_fits = 0;
  std::vector<std::string> warnings;
};

/// Dispatches on config.estimand (the weighted estimand switches to its
/// survival form when config.survival is set).
EstimateResult estimate(const Dataset& data, const InterventionGrid& grid, const EstimatorConfig& config);

CurveEstimate estimate_cdrc_sequential(const Dataset& data, const InterventionGrid& grid, EstimatorConfig config);
CurveEstimate estimate_weighted(const Dataset& data, const InterventionGrid& grid, EstimatorConfig config);
CurveEstimate estimate_weighted_survival(const Dataset& data, const InterventionGrid& grid, EstimatorConfig config);
CurveEstimate estimate_cdrc_parametric(const Dataset& data, const InterventionGrid& grid, EstimatorConfig config);

/// Weights at every time point for every trajectory, without any outcome
/// regression. Records carry the numerator density, so branches for another
/// c can be recomputed from them.
std::vector<WeightRecord> weight_records(const Dataset& data, const InterventionGrid& grid,
                                         const EstimatorConfig& config);

/// Parametric g-formula backend (defined in parametric.cpp).
EstimateResult estimate_parametric(const Dataset& data, const InterventionGrid& grid, const EstimatorConfig& config);

/// Rows eligible for fits at stage s: C_s = 0 where a censoring column exists
/// and, in survival mode, Y_{s-1} = 0.
std::vector<std::size_t> stage_rows(const Dataset& data, int s, bool survival);

}  // namespace cdrc
