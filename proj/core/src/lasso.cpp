#include <algorithm>
#include <cmath>
#include <numeric>

#include "cdrc/error.hpp"
#include "cdrc/learners.hpp"

namespace cdrc {
namespace {

double soft_threshold(double z, double lambda) {
  if (z > lambda) return z - lambda;
  if (z < -lambda) return z + lambda;
  return 0.0;
}

// Standardized problem: Gram matrix G = Z'Z/n and correlations c = Z'(y - ybar)/n.
struct Standardized {
  Eigen::RowVectorXd mean;
  Eigen::VectorXd sd;
  double ybar = 0.0;
  Eigen::MatrixXd gram;
  Eigen::VectorXd corr;
};

Standardized standardize(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  Standardized s;
  const auto n = static_cast<double>(y.size());
  s.mean = X.colwise().mean();
  Eigen::MatrixXd Z = X.rowwise() - s.mean;
  s.sd = (Z.array().square().colwise().sum() / n).sqrt();
  for (Eigen::Index j = 0; j < Z.cols(); ++j) {
    if (s.sd(j) > 0) Z.col(j) /= s.sd(j);
    else Z.col(j).setZero();
  }
  s.ybar = y.mean();
  s.gram = Z.transpose() * Z / n;
  s.corr = Z.transpose() * (y.array() - s.ybar).matrix() / n;
  return s;
}

// Covariance-update coordinate descent at one lambda, warm-started from beta.
void descend(const Standardized& s, double lambda, Eigen::VectorXd& beta, const LassoOptions& options) {
  const Eigen::Index p = beta.size();
  Eigen::VectorXd grad = s.corr - s.gram * beta;  // c - G beta
  for (int sweep = 0; sweep < options.max_sweeps; ++sweep) {
    double max_change = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      const double gjj = s.gram(j, j);
      if (!(gjj > 0)) continue;
      const double old = beta(j);
      const double updated = soft_threshold(grad(j) + gjj * old, lambda) / gjj;
      const double delta = updated - old;
      if (delta != 0.0) {
        beta(j) = updated;
        grad -= s.gram.col(j) * delta;
        max_change = std::max(max_change, std::abs(delta));
      }
    }
    if (max_change < options.tolerance) break;
  }
}

std::vector<double> lambda_path(double lambda_max, const LassoOptions& options) {
  std::vector<double> path;
  const int k = std::max(2, options.n_lambda);
  for (int i = 0; i < k; ++i) {
    const double frac = static_cast<double>(i) / static_cast<double>(k - 1);
    path.push_back(lambda_max * std::pow(options.lambda_ratio, frac));
  }
  return path;
}

void unstandardize(const Standardized& s, const Eigen::VectorXd& beta, double& intercept, Eigen::VectorXd& coef) {
  coef = Eigen::VectorXd::Zero(beta.size());
  for (Eigen::Index j = 0; j < beta.size(); ++j) {
    if (s.sd(j) > 0) coef(j) = beta(j) / s.sd(j);
  }
  intercept = s.ybar - s.mean.dot(coef);
}

}  // namespace

Eigen::VectorXd LassoFit::predict(const Eigen::MatrixXd& X) const {
  return (X * coef).array() + intercept;
}

std::vector<std::size_t> LassoFit::nonzero() const {
  std::vector<std::size_t> out;
  for (Eigen::Index j = 0; j < coef.size(); ++j) {
    if (coef(j) != 0.0) out.push_back(static_cast<std::size_t>(j));
  }
  return out;
}

LassoFit fit_lasso(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, LassoOptions options) {
  if (X.rows() != y.size() || y.size() == 0) throw FitError("lasso: design rows and response length differ");
  const Standardized full = standardize(X, y);
  const Eigen::Index p = X.cols();
  LassoFit fit;
  const double lambda_max = p > 0 ? full.corr.lpNorm<Eigen::Infinity>() : 0.0;

  if (p == 0 || !(lambda_max > 0)) {
    // Constant response (or no columns): intercept-only.
    fit.intercept = full.ybar;
    fit.coef = Eigen::VectorXd::Zero(p);
    fit.coef_1se = fit.coef;
    fit.lambda = fit.lambda_1se = lambda_max;
    return fit;
  }

  if (options.lambda) {
    const double target = std::max(0.0, *options.lambda);
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    for (double l : lambda_path(lambda_max, options)) {
      if (l <= target) break;
      descend(full, l, beta, options);
    }
    descend(full, target, beta, options);
    unstandardize(full, beta, fit.intercept, fit.coef);
    fit.coef_1se = fit.coef;
    fit.lambda = fit.lambda_1se = target;
    fit.lambdas = {target};
    return fit;
  }

  fit.lambdas = lambda_path(lambda_max, options);
  const std::size_t L = fit.lambdas.size();
  const int K = std::clamp(options.folds, 2, static_cast<int>(y.size()));
  const auto folds = assign_folds(X, y, K, options.seed);

  Eigen::MatrixXd fold_mse = Eigen::MatrixXd::Zero(K, static_cast<Eigen::Index>(L));
  for (int k = 0; k < K; ++k) {
    std::vector<Eigen::Index> train, test;
    for (Eigen::Index i = 0; i < y.size(); ++i) (folds[static_cast<std::size_t>(i)] == k ? test : train).push_back(i);
    if (train.empty() || test.empty()) continue;
    Eigen::MatrixXd Xt(static_cast<Eigen::Index>(train.size()), p);
    Eigen::VectorXd yt(static_cast<Eigen::Index>(train.size()));
    for (std::size_t r = 0; r < train.size(); ++r) {
      Xt.row(static_cast<Eigen::Index>(r)) = X.row(train[r]);
      yt(static_cast<Eigen::Index>(r)) = y(train[r]);
    }
    const Standardized s = standardize(Xt, yt);
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    for (std::size_t l = 0; l < L; ++l) {
      descend(s, fit.lambdas[l], beta, options);
      double intercept;
      Eigen::VectorXd coef;
      unstandardize(s, beta, intercept, coef);
      double sse = 0.0;
      for (Eigen::Index i : test) {
        const double r = y(i) - intercept - X.row(i).dot(coef);
        sse += r * r;
      }
      fold_mse(k, static_cast<Eigen::Index>(l)) = sse / static_cast<double>(test.size());
    }
  }

  fit.cv_mse.resize(L);
  std::vector<double> se(L);
  std::size_t best = 0;
  for (std::size_t l = 0; l < L; ++l) {
    const auto col = fold_mse.col(static_cast<Eigen::Index>(l));
    const double mean = col.mean();
    const double var = K > 1 ? (col.array() - mean).square().sum() / (K - 1) : 0.0;
    fit.cv_mse[l] = mean;
    se[l] = std::sqrt(var / K);
    if (mean < fit.cv_mse[best]) best = l;  // ties keep the larger penalty
  }
  std::size_t one_se = best;
  for (std::size_t l = 0; l <= best; ++l) {
    if (fit.cv_mse[l] <= fit.cv_mse[best] + se[best]) {
      one_se = l;
      break;
    }
  }

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  for (std::size_t l = 0; l <= best; ++l) {
    descend(full, fit.lambdas[l], beta, options);
    if (l == one_se) {
      double ignored;
      unstandardize(full, beta, ignored, fit.coef_1se);
    }
  }
  unstandardize(full, beta, fit.intercept, fit.coef);
  fit.lambda = fit.lambdas[best];
  fit.lambda_1se = fit.lambdas[one_se];
  return fit;
}

}  // namespace cdrc
