#include "cdrc/learners.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cdrc/error.hpp"

namespace cdrc {
namespace {

Eigen::MatrixXd with_intercept(const Eigen::MatrixXd& X) {
  Eigen::MatrixXd A(X.rows(), X.cols() + 1);
  A.col(0).setOnes();
  A.rightCols(X.cols()) = X;
  return A;
}

// Indices of a maximal linearly independent column subset of A (sorted),
// always containing column 0 when it is nonzero.
std::vector<Eigen::Index> independent_columns(const Eigen::MatrixXd& A) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
  qr.setThreshold(1e-10);
  const Eigen::Index r = qr.rank();
  std::vector<Eigen::Index> keep;
  for (Eigen::Index k = 0; k < r; ++k) keep.push_back(qr.colsPermutation().indices()(k));
  std::sort(keep.begin(), keep.end());
  return keep;
}

Eigen::MatrixXd select_columns(const Eigen::MatrixXd& A, const std::vector<Eigen::Index>& cols) {
  Eigen::MatrixXd out(A.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = A.col(cols[k]);
  return out;
}

double sigmoid(double eta) {
  eta = std::clamp(eta, -35.0, 35.0);
  return 1.0 / (1.0 + std::exp(-eta));
}

double log1pexp(double eta) {
  return eta > 0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta));
}

void check_shapes(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  if (X.rows() != y.size()) throw FitError("design rows and response length differ");
  if (y.size() == 0) throw FitError("no rows to fit");
  if (!X.allFinite() || !y.allFinite()) throw FitError("non-finite values in design or response");
}

}  // namespace

std::string_view to_string(LearnerKind kind) {
  switch (kind) {
    case LearnerKind::mean_only: return "mean_only";
    case LearnerKind::median_only: return "median_only";
    case LearnerKind::ols: return "ols";
    case LearnerKind::ridge: return "ridge";
    case LearnerKind::lasso: return "lasso";
    case LearnerKind::logistic: return "logistic";
    case LearnerKind::polynomial_ols: return "polynomial_ols";
    case LearnerKind::stumps: return "stumps";
  }
  return "?";
}

LearnerKind parse_learner_kind(std::string_view text) {
  for (LearnerKind k : {LearnerKind::mean_only, LearnerKind::median_only, LearnerKind::ols, LearnerKind::ridge,
                        LearnerKind::lasso, LearnerKind::logistic, LearnerKind::polynomial_ols,
                        LearnerKind::stumps}) {
    if (to_string(k) == text) return k;
  }
  throw ArgumentError("unknown learner '" + std::string(text) + "'");
}

Eigen::VectorXd LinearFit::predict(const Eigen::MatrixXd& X) const {
  return (X * coef).array() + intercept;
}

LinearFit fit_ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  check_shapes(X, y);
  const Eigen::MatrixXd A = with_intercept(X);
  const auto keep = independent_columns(A);
  const auto n = static_cast<std::size_t>(y.size());
  if (n <= keep.size()) {
    throw FitError("ols needs more rows than parameters (n=" + std::to_string(n) +
                   ", p=" + std::to_string(keep.size()) + ")");
  }
  const Eigen::MatrixXd Ak = select_columns(A, keep);
  const Eigen::VectorXd b = Ak.householderQr().solve(y);

  LinearFit fit;
  fit.coef = Eigen::VectorXd::Zero(X.cols());
  fit.aliased.assign(static_cast<std::size_t>(X.cols()), true);
  for (std::size_t k = 0; k < keep.size(); ++k) {
    if (keep[k] == 0) {
      fit.intercept = b(static_cast<Eigen::Index>(k));
    } else {
      fit.coef(keep[k] - 1) = b(static_cast<Eigen::Index>(k));
      fit.aliased[static_cast<std::size_t>(keep[k] - 1)] = false;
    }
  }
  fit.rank = keep.size();
  const double rss = (y - Ak * b).squaredNorm();
  fit.residual_scale = std::sqrt(rss / static_cast<double>(n - keep.size()));
  return fit;
}

LinearFit fit_ridge(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double penalty) {
  check_shapes(X, y);
  if (!(penalty >= 0)) throw FitError("ridge penalty must be >= 0");
  const auto n = static_cast<double>(y.size());
  const Eigen::RowVectorXd mean = X.colwise().mean();
  Eigen::MatrixXd Z = X.rowwise() - mean;
  Eigen::VectorXd sd = (Z.array().square().colwise().sum() / n).sqrt();
  for (Eigen::Index j = 0; j < sd.size(); ++j) {
    if (sd(j) > 0) Z.col(j) /= sd(j);
  }
  const double ybar = y.mean();
  Eigen::MatrixXd G = Z.transpose() * Z / n;
  G.diagonal().array() += penalty;
  for (Eigen::Index j = 0; j < sd.size(); ++j) {
    if (!(sd(j) > 0)) {
      G.row(j).setZero();
      G.col(j).setZero();
      G(j, j) = 1.0;
    }
  }
  const Eigen::VectorXd b = G.ldlt().solve(Z.transpose() * (y.array() - ybar).matrix() / n);

  LinearFit fit;
  fit.coef = Eigen::VectorXd::Zero(X.cols());
  fit.aliased.assign(static_cast<std::size_t>(X.cols()), false);
  for (Eigen::Index j = 0; j < sd.size(); ++j) {
    if (sd(j) > 0) fit.coef(j) = b(j) / sd(j);
    else fit.aliased[static_cast<std::size_t>(j)] = true;
  }
  fit.intercept = ybar - mean.dot(fit.coef);
  fit.rank = static_cast<std::size_t>(std::count(fit.aliased.begin(), fit.aliased.end(), false)) + 1;
  const double rss = (y - fit.predict(X)).squaredNorm();
  const double dof = std::max(1.0, n - static_cast<double>(fit.rank));
  fit.residual_scale = std::sqrt(rss / dof);
  return fit;
}

Eigen::VectorXd LogisticFit::predict(const Eigen::MatrixXd& X) const {
  Eigen::VectorXd eta = (X * coef).array() + intercept;
  return eta.unaryExpr([](double v) { return sigmoid(v); });
}

namespace {

LogisticFit irls(const Eigen::MatrixXd& A, const Eigen::VectorXd& y, const LogisticOptions& options) {
  const Eigen::Index p = A.cols();
  const auto n = static_cast<double>(y.size());
  const double ybar = std::clamp(y.mean(), 1e-6, 1.0 - 1e-6);
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  beta(0) = std::log(ybar / (1.0 - ybar));
  const double lambda = options.ridge * n;

  auto objective = [&](const Eigen::VectorXd& b) {
    const Eigen::VectorXd eta = A * b;
    double ll = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) ll += y(i) * eta(i) - log1pexp(eta(i));
    return ll - 0.5 * lambda * b.tail(p - 1).squaredNorm();
  };

  LogisticFit fit;
  double ll = objective(beta);
  fit.loglik_trace.push_back(ll);
  for (int iter = 0; iter < options.max_iter; ++iter) {
    const Eigen::VectorXd eta = A * beta;
    Eigen::VectorXd prob(eta.size()), w(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
      prob(i) = sigmoid(eta(i));
      w(i) = std::max(prob(i) * (1.0 - prob(i)), 1e-12);
    }
    Eigen::VectorXd score = A.transpose() * (y - prob);
    score.tail(p - 1) -= lambda * beta.tail(p - 1);
    if (score.lpNorm<Eigen::Infinity>() < options.tolerance) {
      fit.converged = true;
      break;
    }
    Eigen::MatrixXd H = A.transpose() * w.asDiagonal() * A;
    H.diagonal().tail(p - 1).array() += lambda;
    const Eigen::VectorXd step = H.ldlt().solve(score);
    // Step halving keeps the log-likelihood nondecreasing.
    double scale = 1.0;
    bool moved = false;
    for (int half = 0; half < 50; ++half) {
      const Eigen::VectorXd candidate = beta + scale * step;
      const double next = objective(candidate);
      if (std::isfinite(next) && next >= ll) {
        moved = next > ll;
        beta = candidate;
        ll = next;
        break;
      }
      scale *= 0.5;
    }
    fit.iterations = iter + 1;
    fit.loglik_trace.push_back(ll);
    if (!moved) {
      fit.converged = true;  // no ascent direction left at machine precision
      break;
    }
  }
  fit.intercept = beta(0);
  fit.coef = beta.tail(p - 1);
  return fit;
}

}  // namespace

LogisticFit fit_logistic(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, LogisticOptions options) {
  check_shapes(X, y);
  if ((y.array() < 0).any() || (y.array() > 1).any()) throw FitError("logistic target outside [0,1]");
  if ((y.array() == 0).all() || (y.array() == 1).all()) throw FitError("logistic target has a single class");
  const Eigen::MatrixXd A = with_intercept(X);
  const auto keep = independent_columns(A);
  if (keep.empty() || keep.front() != 0) throw FitError("logistic design lost its intercept");
  const Eigen::MatrixXd Ak = select_columns(A, keep);

  LogisticFit core = irls(Ak, y, options);
  const double max_eta = (Ak * (Eigen::VectorXd(Ak.cols()) << core.intercept, core.coef).finished())
                             .lpNorm<Eigen::Infinity>();
  bool separation = false;
  if ((!core.converged || max_eta > 30.0) && options.ridge == 0.0) {
    LogisticOptions stabilized = options;
    stabilized.ridge = 1e-6;
    core = irls(Ak, y, stabilized);
    separation = true;
  }

  LogisticFit fit = core;
  fit.separation = separation;
  fit.coef = Eigen::VectorXd::Zero(X.cols());
  fit.aliased.assign(static_cast<std::size_t>(X.cols()), true);
  for (std::size_t k = 1; k < keep.size(); ++k) {
    fit.coef(keep[k] - 1) = core.coef(static_cast<Eigen::Index>(k - 1));
    fit.aliased[static_cast<std::size_t>(keep[k] - 1)] = false;
  }
  return fit;
}

Eigen::VectorXd StumpFit::predict(const Eigen::MatrixXd& X) const {
  Eigen::VectorXd out = Eigen::VectorXd::Constant(X.rows(), base);
  for (const auto& s : stumps) {
    const auto f = static_cast<Eigen::Index>(s.feature);
    for (Eigen::Index i = 0; i < X.rows(); ++i) out(i) += shrinkage * (X(i, f) <= s.threshold ? s.left : s.right);
  }
  return out;
}

StumpFit fit_stumps(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, StumpOptions options) {
  check_shapes(X, y);
  const Eigen::Index n = X.rows();
  StumpFit fit;
  fit.base = y.mean();
  fit.shrinkage = options.shrinkage;
  Eigen::VectorXd resid = y.array() - fit.base;

  // Presort every feature once; ties keep a value-only order so splits never
  // depend on row order.
  std::vector<std::vector<Eigen::Index>> order(static_cast<std::size_t>(X.cols()));
  for (Eigen::Index f = 0; f < X.cols(); ++f) {
    auto& o = order[static_cast<std::size_t>(f)];
    o.resize(static_cast<std::size_t>(n));
    std::iota(o.begin(), o.end(), Eigen::Index{0});
    std::stable_sort(o.begin(), o.end(), [&](Eigen::Index a, Eigen::Index b) { return X(a, f) < X(b, f); });
  }

  for (int round = 0; round < options.rounds; ++round) {
    const double total = resid.sum();
    double best_gain = 0.0;
    StumpFit::Stump best;
    bool found = false;
    for (Eigen::Index f = 0; f < X.cols(); ++f) {
      const auto& o = order[static_cast<std::size_t>(f)];
      double left_sum = 0.0;
      for (Eigen::Index k = 0; k + 1 < n; ++k) {
        left_sum += resid(o[static_cast<std::size_t>(k)]);
        const double here = X(o[static_cast<std::size_t>(k)], f);
        const double next = X(o[static_cast<std::size_t>(k + 1)], f);
        if (!(next > here)) continue;
        const auto nl = static_cast<double>(k + 1);
        const auto nr = static_cast<double>(n - k - 1);
        const double right_sum = total - left_sum;
        // Reduction in SSE from splitting: sum_l^2/n_l + sum_r^2/n_r - total^2/n.
        const double gain = left_sum * left_sum / nl + right_sum * right_sum / nr - total * total / static_cast<double>(n);
        if (gain > best_gain * (1.0 + 1e-12) + 1e-300) {
          best_gain = gain;
          best = {static_cast<std::size_t>(f), 0.5 * (here + next), left_sum / nl, right_sum / nr};
          found = true;
        }
      }
    }
    if (!found) break;
    fit.stumps.push_back(best);
    const auto f = static_cast<Eigen::Index>(best.feature);
    for (Eigen::Index i = 0; i < n; ++i) {
      resid(i) -= options.shrinkage * (X(i, f) <= best.threshold ? best.left : best.right);
    }
  }
  return fit;
}

namespace {

class ConstantLearner final : public FittedLearner {
 public:
  ConstantLearner(LearnerKind kind, double value, double scale) : kind_(kind), value_(value), scale_(scale) {}
  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const override {
    return Eigen::VectorXd::Constant(X.rows(), value_);
  }
  LearnerKind kind() const noexcept override { return kind_; }
  double residual_scale() const noexcept override { return scale_; }

 private:
  LearnerKind kind_;
  double value_;
  double scale_;
};

class LinearLearner final : public FittedLearner {
 public:
  LinearLearner(LearnerKind kind, LinearFit fit) : kind_(kind), fit_(std::move(fit)) {}
  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const override { return fit_.predict(X); }
  LearnerKind kind() const noexcept override { return kind_; }
  double residual_scale() const noexcept override { return fit_.residual_scale; }

 private:
  LearnerKind kind_;
  LinearFit fit_;
};

class LassoLearner final : public FittedLearner {
 public:
  explicit LassoLearner(LassoFit fit) : fit_(std::move(fit)) {}
  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const override { return fit_.predict(X); }
  LearnerKind kind() const noexcept override { return LearnerKind::lasso; }

 private:
  LassoFit fit_;
};

class LogisticLearner final : public FittedLearner {
 public:
  explicit LogisticLearner(LogisticFit fit) : fit_(std::move(fit)) {}
  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const override { return fit_.predict(X); }
  LearnerKind kind() const noexcept override { return LearnerKind::logistic; }

 private:
  LogisticFit fit_;
};

class StumpLearner final : public FittedLearner {
 public:
  explicit StumpLearner(StumpFit fit) : fit_(std::move(fit)) {}
  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const override { return fit_.predict(X); }
  LearnerKind kind() const noexcept override { return LearnerKind::stumps; }

 private:
  StumpFit fit_;
};

// OLS on X plus squares of every column taking more than two distinct values.
class PolynomialLearner final : public FittedLearner {
 public:
  PolynomialLearner(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
      std::vector<double> distinct;
      for (Eigen::Index i = 0; i < X.rows() && distinct.size() < 3; ++i) {
        if (std::find(distinct.begin(), distinct.end(), X(i, j)) == distinct.end()) distinct.push_back(X(i, j));
      }
      if (distinct.size() > 2) squared_.push_back(j);
    }
    fit_ = fit_ols(augment(X), y);
  }
  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const override { return fit_.predict(augment(X)); }
  LearnerKind kind() const noexcept override { return LearnerKind::polynomial_ols; }
  double residual_scale() const noexcept override { return fit_.residual_scale; }

 private:
  Eigen::MatrixXd augment(const Eigen::MatrixXd& X) const {
    Eigen::MatrixXd out(X.rows(), X.cols() + static_cast<Eigen::Index>(squared_.size()));
    out.leftCols(X.cols()) = X;
    for (std::size_t k = 0; k < squared_.size(); ++k) {
      out.col(X.cols() + static_cast<Eigen::Index>(k)) = X.col(squared_[k]).array().square();
    }
    return out;
  }

  std::vector<Eigen::Index> squared_;
  LinearFit fit_;
};

}  // namespace

std::unique_ptr<FittedLearner> fit_learner(LearnerKind kind, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                           const LearnerOptions& options) {
  check_shapes(X, y);
  const auto n = static_cast<double>(y.size());
  switch (kind) {
    case LearnerKind::mean_only: {
      const double mean = y.mean();
      const double scale = n > 1 ? std::sqrt((y.array() - mean).square().sum() / (n - 1)) : 0.0;
      return std::make_unique<ConstantLearner>(kind, mean, scale);
    }
    case LearnerKind::median_only: {
      std::vector<double> v(y.data(), y.data() + y.size());
      const std::size_t mid = v.size() / 2;
      std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
      double median = v[mid];
      if (v.size() % 2 == 0) {
        median = 0.5 * (median + *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid)));
      }
      return std::make_unique<ConstantLearner>(kind, median, 0.0);
    }
    case LearnerKind::ols:
      return std::make_unique<LinearLearner>(kind, fit_ols(X, y));
    case LearnerKind::ridge:
      return std::make_unique<LinearLearner>(kind, fit_ridge(X, y, options.ridge_penalty));
    case LearnerKind::lasso: {
      LassoOptions lo;
      lo.folds = options.lasso_folds;
      lo.seed = options.seed;
      return std::make_unique<LassoLearner>(fit_lasso(X, y, lo));
    }
    case LearnerKind::logistic:
      return std::make_unique<LogisticLearner>(fit_logistic(X, y));
    case LearnerKind::polynomial_ols:
      return std::make_unique<PolynomialLearner>(X, y);
    case LearnerKind::stumps:
      return std::make_unique<StumpLearner>(fit_stumps(X, y, options.stumps));
  }
  throw FitError("unknown learner kind");
}

}  // namespace cdrc
