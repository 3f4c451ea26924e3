#include "cdrc/density.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <nlohmann/json.hpp>

#include "cdrc/error.hpp"

namespace cdrc {

std::string_view to_string(DensityStrategy strategy) {
  switch (strategy) {
    case DensityStrategy::gaussian_regression: return "gaussian_regression";
    case DensityStrategy::binning: return "binning";
  }
  return "?";
}

DensityStrategy parse_density_strategy(std::string_view text) {
  for (auto s : {DensityStrategy::gaussian_regression, DensityStrategy::binning}) {
    if (to_string(s) == text) return s;
  }
  throw ArgumentError("unknown density strategy '" + std::string(text) + "'");
}

double normal_pdf(double x, double mean, double sd) {
  const double z = (x - mean) / sd;
  return std::exp(-0.5 * z * z) / (sd * std::sqrt(2.0 * std::numbers::pi));
}

namespace {

double quantile7(const std::vector<double>& sorted, double p) {
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

bool at_mass(double a, double center) {
  return std::abs(a - center) <= 1e-9 * (1.0 + std::abs(center));
}

}  // namespace

DensityModel::DensityModel(const Dataset& data, const RawFrame& raw, std::size_t target,
                           std::vector<std::size_t> conditioning, std::span<const std::size_t> rows,
                           const DensityOptions& options)
    : options_(options),
      target_(target),
      conditioning_(std::move(conditioning)),
      design_(data, ModelMatrixSpec{conditioning_, options.basis, options.degree, {}}, raw, rows) {
  const std::string label = "density of '" + data.schema(target).name + "'";
  if (rows.size() < options.min_rows) {
    throw FitError(label + " needs at least " + std::to_string(options.min_rows) + " rows (have " +
                   std::to_string(rows.size()) + ")");
  }
  Eigen::VectorXd a(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    a(static_cast<Eigen::Index>(r)) = raw(static_cast<Eigen::Index>(rows[r]), static_cast<Eigen::Index>(target));
  }
  if (!a.allFinite()) throw FitError(label + ": missing treatment values among fitting rows");
  support_min_ = a.minCoeff();
  support_max_ = a.maxCoeff();
  const Eigen::MatrixXd X = design_.expand(raw, rows);

  if (options.strategy == DensityStrategy::gaussian_regression) {
    linear_ = fit_ols(X, a);
    sigma_ = linear_.residual_scale;
    point_mass_ = !(sigma_ > 1e-12 * (1.0 + a.cwiseAbs().maxCoeff()));
    return;
  }

  if (!options.edges.empty()) {
    edges_ = options.edges;
    if (edges_.size() < 2 || !std::is_sorted(edges_.begin(), edges_.end()) ||
        std::adjacent_find(edges_.begin(), edges_.end()) != edges_.end()) {
      throw ConfigError(label + ": bin edges must be strictly ascending with at least two entries");
    }
  } else {
    if (options.bins < 1) throw ConfigError(label + ": bin count must be >= 1");
    std::vector<double> sorted(a.data(), a.data() + a.size());
    std::sort(sorted.begin(), sorted.end());
    for (int k = 0; k <= options.bins; ++k) {
      const double e = quantile7(sorted, static_cast<double>(k) / options.bins);
      if (edges_.empty() || e > edges_.back()) edges_.push_back(e);
    }
    if (edges_.size() < 2) {
      point_mass_ = true;  // constant treatment
      return;
    }
  }

  const std::size_t B = edges_.size() - 1;
  bins_.resize(B);
  std::vector<std::size_t> membership(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) membership[r] = bin_of(a(static_cast<Eigen::Index>(r)));
  for (std::size_t b = 0; b < B; ++b) {
    Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) y(static_cast<Eigen::Index>(r)) = membership[r] == b ? 1.0 : 0.0;
    if ((y.array() == 0).all()) {
      bins_[b].kind = BinModel::Kind::zero;
    } else if ((y.array() == 1).all()) {
      bins_[b].kind = BinModel::Kind::one;
    } else {
      bins_[b].kind = BinModel::Kind::logistic;
      bins_[b].fit = fit_logistic(X, y);
    }
  }
}

std::size_t DensityModel::bin_of(double a) const {
  if (edges_.size() < 2) return 0;
  // Half-open [e_k, e_{k+1}); values outside the edges clamp to the outer bins.
  const auto it = std::upper_bound(edges_.begin(), edges_.end(), a);
  const auto k = static_cast<std::ptrdiff_t>(it - edges_.begin()) - 1;
  return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(k, 0, static_cast<std::ptrdiff_t>(edges_.size()) - 2));
}

Eigen::VectorXd DensityModel::means(const RawFrame& raw, std::span<const std::size_t> rows) const {
  if (options_.strategy != DensityStrategy::gaussian_regression) throw ConfigError("binning density has no mean");
  return linear_.predict(design_.expand(raw, rows));
}

Eigen::MatrixXd DensityModel::bin_probabilities(const RawFrame& raw, std::span<const std::size_t> rows) const {
  if (options_.strategy != DensityStrategy::binning) throw ConfigError("gaussian density has no bins");
  const auto n = static_cast<Eigen::Index>(rows.size());
  if (bins_.empty()) return Eigen::MatrixXd::Ones(n, 1);
  const Eigen::MatrixXd X = design_.expand(raw, rows);
  Eigen::MatrixXd P(n, static_cast<Eigen::Index>(bins_.size()));
  for (std::size_t b = 0; b < bins_.size(); ++b) {
    const auto col = static_cast<Eigen::Index>(b);
    switch (bins_[b].kind) {
      case BinModel::Kind::zero: P.col(col).setZero(); break;
      case BinModel::Kind::one: P.col(col).setOnes(); break;
      case BinModel::Kind::logistic: P.col(col) = bins_[b].fit.predict(X); break;
    }
  }
  const Eigen::VectorXd total = P.rowwise().sum();
  for (Eigen::Index i = 0; i < n; ++i) P.row(i) /= total(i);
  return P;
}

std::vector<double> DensityModel::evaluate(const RawFrame& raw, std::span<const std::size_t> rows, double a) const {
  std::vector<double> out(rows.size());
  if (options_.strategy == DensityStrategy::gaussian_regression) {
    const Eigen::VectorXd mu = means(raw, rows);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const double m = mu(static_cast<Eigen::Index>(r));
      out[r] = point_mass_ ? (at_mass(a, m) ? point_mass_cap : 0.0) : normal_pdf(a, m, sigma_);
    }
    return out;
  }
  if (point_mass_) {
    std::fill(out.begin(), out.end(), at_mass(a, support_min_) ? point_mass_cap : 0.0);
    return out;
  }
  const std::size_t b = bin_of(a);
  const double width = edges_[b + 1] - edges_[b];
  const Eigen::MatrixXd P = bin_probabilities(raw, rows);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out[r] = P(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(b)) / width;
  }
  return out;
}

std::string DensityModel::to_json(const Dataset& data) const {
  nlohmann::json doc;
  doc["strategy"] = std::string(to_string(options_.strategy));
  doc["target"] = data.schema(target_).name;
  nlohmann::json cond = nlohmann::json::array();
  for (std::size_t c : conditioning_) cond.push_back(data.schema(c).name);
  doc["conditioning"] = cond;
  doc["features"] = design_.names();
  doc["support"] = {support_min_, support_max_};
  doc["point_mass"] = point_mass_;
  auto coefficients = [](double intercept, const Eigen::VectorXd& coef) {
    std::vector<double> out{intercept};
    out.insert(out.end(), coef.data(), coef.data() + coef.size());
    return out;
  };
  if (options_.strategy == DensityStrategy::gaussian_regression) {
    doc["coefficients"] = coefficients(linear_.intercept, linear_.coef);
    doc["sigma"] = sigma_;
  } else {
    doc["edges"] = edges_;
    nlohmann::json bins = nlohmann::json::array();
    for (const auto& b : bins_) {
      if (b.kind == BinModel::Kind::logistic) bins.push_back(coefficients(b.fit.intercept, b.fit.coef));
      else bins.push_back(b.kind == BinModel::Kind::zero ? "zero" : "one");
    }
    doc["bins"] = bins;
  }
  return doc.dump(2);
}

}  // namespace cdrc
