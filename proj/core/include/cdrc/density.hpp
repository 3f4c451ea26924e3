#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "cdrc/data.hpp"
#include "cdrc/design.hpp"
#include "cdrc/learners.hpp"

namespace cdrc {

enum class DensityStrategy { gaussian_regression, binning };

std::string_view to_string(DensityStrategy strategy);
DensityStrategy parse_density_strategy(std::string_view text);

struct DensityOptions {
  DensityStrategy strategy = DensityStrategy::gaussian_regression;
  Basis basis = Basis::linear;
  int degree = 2;
  int bins = 20;               // equal-frequency bins when `edges` is empty
  std::vector<double> edges;   // explicit ascending bin edges (binning)
  std::size_t min_rows = 20;
};

/// Fitted conditional density g(target | conditioning) evaluable at any a.
class DensityModel {
 public:
  static constexpr double point_mass_cap = 1e12;

  DensityModel(const Dataset& data, const RawFrame& raw, std::size_t target, std::vector<std::size_t> conditioning,
               std::span<const std::size_t> rows, const DensityOptions& options);

  /// Density at `a` for each listed row of `raw` (conditioning cells read from raw).
  std::vector<double> evaluate(const RawFrame& raw, std::span<const std::size_t> rows, double a) const;
  /// Gaussian: fitted means per row. Binning: not available.
  Eigen::VectorXd means(const RawFrame& raw, std::span<const std::size_t> rows) const;
  /// Binning: normalized bin probabilities, one row per listed row.
  Eigen::MatrixXd bin_probabilities(const RawFrame& raw, std::span<const std::size_t> rows) const;

  DensityStrategy strategy() const noexcept { return options_.strategy; }
  std::size_t target() const noexcept { return target_; }
  const std::vector<std::size_t>& conditioning() const noexcept { return conditioning_; }
  double sigma() const noexcept { return sigma_; }
  bool point_mass() const noexcept { return point_mass_; }
  const std::vector<double>& edges() const noexcept { return edges_; }
  double support_min() const noexcept { return support_min_; }
  double support_max() const noexcept { return support_max_; }
  bool outside_support(double a) const noexcept { return a < support_min_ || a > support_max_; }
  std::size_t bin_of(double a) const;

  /// Strategy, conditioning names, coefficients and bin edges as JSON text.
  std::string to_json(const Dataset& data) const;

 private:
  DensityOptions options_;
  std::size_t target_;
  std::vector<std::size_t> conditioning_;
  Design design_;
  double support_min_ = 0.0;
  double support_max_ = 0.0;
  // gaussian_regression
  LinearFit linear_;
  double sigma_ = 0.0;
  bool point_mass_ = false;
  // binning
  std::vector<double> edges_;
  struct BinModel {
    enum class Kind { logistic, zero, one } kind = Kind::zero;
    LogisticFit fit;
  };
  std::vector<BinModel> bins_;
};

double normal_pdf(double x, double mean, double sd);

}  // namespace cdrc
