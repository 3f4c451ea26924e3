#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "cdrc/data.hpp"

namespace cdrc {

/// Row-major copy of every dataset cell (NaN for missing). Estimators take a
/// copy, overwrite treatment or outcome columns, and rebuild design matrices
/// from it.
using RawFrame = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

RawFrame raw_frame(const Dataset& data);

enum class Basis { linear, polynomial, interactions, saturated };
std::string_view to_string(Basis basis);
Basis parse_basis(std::string_view text);

struct ModelMatrixSpec {
  std::vector<std::size_t> columns;  // dataset column indices, in temporal order
  Basis basis = Basis::linear;
  int degree = 2;  // polynomial only
  std::vector<std::size_t> protected_columns;  // never screened out (treatment)
};

/// Expansion of raw dataset columns into a numeric design matrix (no
/// intercept column; learners add their own). The expansion is frozen at
/// construction from the fitting rows so that predictions use identical
/// features.
class Design {
 public:
  Design(const Dataset& data, ModelMatrixSpec spec, const RawFrame& raw,
         std::span<const std::size_t> fit_rows);

  Eigen::MatrixXd expand(const RawFrame& raw, std::span<const std::size_t> rows) const;
  Eigen::MatrixXd expand(const RawFrame& raw) const;

  std::size_t width() const noexcept { return features_.size(); }
  const std::vector<std::string>& names() const noexcept { return names_; }
  /// Flags features derived from a protected source column.
  const std::vector<bool>& protected_mask() const noexcept { return protected_; }
  const ModelMatrixSpec& spec() const noexcept { return spec_; }

 private:
  struct Feature {
    enum class Op { value, level, power, product, cell } op = Op::value;
    std::size_t source = 0;  // raw column (value, level, power)
    double level = 0;        // level code or exponent
    std::size_t left = 0, right = 0;  // base-feature indices for products
    std::size_t cell = 0;
  };

  double base_value(const Feature& f, const double* row) const;
  std::vector<double> cell_key(const double* row) const;

  ModelMatrixSpec spec_;
  std::vector<Feature> base_;
  std::vector<Feature> features_;
  std::vector<std::string> names_;
  std::vector<bool> protected_;
  std::map<std::vector<double>, std::size_t> cells_;
};

}  // namespace cdrc
