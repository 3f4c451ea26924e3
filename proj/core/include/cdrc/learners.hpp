#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace cdrc {

enum class LearnerKind { mean_only, median_only, ols, ridge, lasso, logistic, polynomial_ols, stumps };

std::string_view to_string(LearnerKind kind);
LearnerKind parse_learner_kind(std::string_view text);

// ---- individual learners -------------------------------------------------

/// y ~ intercept + X beta. Aliased (linearly dependent) columns get a zero
/// coefficient and are reported in `aliased`.
struct LinearFit {
  double intercept = 0.0;
  Eigen::VectorXd coef;
  std::vector<bool> aliased;
  double residual_scale = 0.0;  // sqrt(RSS / (n - p)), p counts the intercept
  std::size_t rank = 0;         // including the intercept

  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const;
};

LinearFit fit_ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y);

/// Ridge on standardized columns: (1/2n)|y - b0 - Zb|^2 + (penalty/2)|b|^2.
LinearFit fit_ridge(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double penalty);

struct LogisticOptions {
  int max_iter = 100;
  double tolerance = 1e-8;  // on max |score|
  double ridge = 0.0;       // penalty on slopes, scaled by n
};

struct LogisticFit {
  double intercept = 0.0;
  Eigen::VectorXd coef;
  std::vector<bool> aliased;
  bool converged = false;
  bool separation = false;  // refit with a small ridge penalty
  int iterations = 0;
  std::vector<double> loglik_trace;

  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const;  // probabilities in (0,1)
};

/// IRLS for targets in [0,1] (fractional targets give the quasi-binomial fit).
LogisticFit fit_logistic(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, LogisticOptions options = {});

struct LassoOptions {
  std::optional<double> lambda;  // fixed penalty; otherwise chosen by CV
  int n_lambda = 100;
  double lambda_ratio = 1e-4;
  int folds = 5;
  std::uint64_t seed = 0;
  int max_sweeps = 100000;
  double tolerance = 1e-12;
};

struct LassoFit {
  double intercept = 0.0;
  Eigen::VectorXd coef;
  double lambda = 0.0;
  double lambda_1se = 0.0;
  std::vector<double> lambdas;
  std::vector<double> cv_mse;
  Eigen::VectorXd coef_1se;

  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const;
  std::vector<std::size_t> nonzero() const;
};

/// Coordinate descent on standardized columns with objective
/// (1/2n)|y - b0 - Zb|^2 + lambda |b|_1.
LassoFit fit_lasso(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, LassoOptions options = {});

struct StumpOptions {
  int rounds = 100;
  double shrinkage = 0.1;
};

struct StumpFit {
  struct Stump {
    std::size_t feature = 0;
    double threshold = 0.0;  // x <= threshold goes left
    double left = 0.0;
    double right = 0.0;
  };
  double base = 0.0;
  double shrinkage = 0.1;
  std::vector<Stump> stumps;

  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const;
};

/// L2 boosting of depth-one regression trees.
StumpFit fit_stumps(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, StumpOptions options = {});

// ---- uniform interface ---------------------------------------------------

class FittedLearner {
 public:
  virtual ~FittedLearner() = default;
  virtual Eigen::VectorXd predict(const Eigen::MatrixXd& X) const = 0;
  virtual LearnerKind kind() const noexcept = 0;
  virtual double residual_scale() const noexcept { return 0.0; }
};

struct LearnerOptions {
  double ridge_penalty = 0.1;
  int lasso_folds = 5;
  std::uint64_t seed = 0;
  StumpOptions stumps;
};

/// Throws FitError when the learner cannot be fitted (too few rows,
/// single-class logistic target, ...).
std::unique_ptr<FittedLearner> fit_learner(LearnerKind kind, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                           const LearnerOptions& options = {});

// ---- stacking ------------------------------------------------------------

enum class Loss { squared, log };
enum class Screening { none, lasso_path, association_screen };

std::string_view to_string(Loss loss);
Loss parse_loss(std::string_view text);
std::string_view to_string(Screening screening);
Screening parse_screening(std::string_view text);

/// Fold labels 0..folds-1 that depend only on row contents and the seed, so
/// permuting rows permutes labels with them.
std::vector<int> assign_folds(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, int folds, std::uint64_t seed);

/// Column subset to keep. Columns flagged in `keep` are always retained.
std::vector<std::size_t> screen(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, Screening method,
                                double threshold, const std::vector<bool>& keep, std::uint64_t seed = 0);

struct StackOptions {
  std::vector<LearnerKind> kinds{LearnerKind::ols};
  int folds = 10;
  Loss loss = Loss::squared;
  std::uint64_t seed = 0;
  Screening screening = Screening::none;
  double screen_threshold = 0.1;
  std::vector<bool> keep;  // columns exempt from screening
  LearnerOptions learner;
};

class StackedLearner {
 public:
  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const;

  const std::vector<LearnerKind>& kinds() const noexcept { return kinds_; }
  const std::vector<double>& weights() const noexcept { return weights_; }
  const std::vector<double>& cv_risk() const noexcept { return cv_risk_; }  // NaN for excluded members
  double stack_risk() const noexcept { return stack_risk_; }
  const std::vector<std::size_t>& selected() const noexcept { return selected_; }
  const std::vector<std::string>& warnings() const noexcept { return warnings_; }
  /// Residual scale of the dominant member (0 if it has none).
  double residual_scale() const noexcept;
  /// Out-of-fold predictions per member (empty when CV was skipped).
  const Eigen::MatrixXd& oof() const noexcept { return oof_; }

 private:
  friend StackedLearner fit_stack(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const StackOptions& options);

  std::vector<LearnerKind> kinds_;
  std::vector<double> weights_;
  std::vector<double> cv_risk_;
  double stack_risk_ = 0.0;
  std::vector<std::size_t> selected_;
  bool all_columns_ = true;
  std::vector<std::shared_ptr<const FittedLearner>> members_;  // null when weight is 0
  std::vector<std::string> warnings_;
  Eigen::MatrixXd oof_;
};

StackedLearner fit_stack(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const StackOptions& options);

/// Minimizes the mean loss of Z w over the probability simplex by projected
/// gradient descent started at the best vertex; never worse than that vertex.
std::vector<double> simplex_weights(const Eigen::MatrixXd& Z, const Eigen::VectorXd& y, Loss loss);

double mean_loss(const Eigen::VectorXd& prediction, const Eigen::VectorXd& y, Loss loss);

}  // namespace cdrc
