#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "cdrc/data.hpp"
#include "cdrc/gcomp.hpp"

namespace cdrc {

struct BootstrapOptions {
  std::size_t replicates = 200;
  double level = 0.95;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  std::size_t min_replicates = 50;
  double unreliable_rate = 0.2;  // undefined share above which a band is flagged
};

struct BandCell {
  std::size_t trajectory = 0;
  int time = 0;
  double estimate = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double undefined_rate = 0.0;
  bool unreliable = false;
};

struct BootstrapResult {
  std::size_t replicates = 0;
  CurveEstimate point;
  std::vector<CurveEstimate> draws;  // one per successful replicate, in replicate order
  std::vector<std::size_t> failed;   // replicate indices whose estimator threw
  std::vector<BandCell> bands;
};

/// Type-7 (linear interpolation) sample quantile.
double quantile(std::vector<double> values, double p);

/// Rows drawn with replacement for replicate r; depends only on (seed, r).
std::vector<std::size_t> resample_rows(std::size_t n, std::uint64_t seed, std::size_t r);

/// Reruns the whole estimator (densities, weights, regressions) on row
/// resamples and forms percentile bands from replicates that are defined.
BootstrapResult bootstrap(const Dataset& data, const InterventionGrid& grid, const EstimatorConfig& config,
                          const BootstrapOptions& options);

/// trajectory_label,time,estimate,lower,upper,undefined_rate
void write_bands_csv(const BootstrapResult& result, std::ostream& out);

}  // namespace cdrc
