#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>

#include "cdrc/error.hpp"
#include "cdrc/learners.hpp"
#include "cdrc/random.hpp"

namespace cdrc {
namespace {

constexpr double kProbFloor = 1e-15;

std::uint64_t row_hash(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, Eigen::Index i, std::uint64_t seed) {
  std::uint64_t h = mix64(seed ^ 0x51afd7ed558ccd00ULL);
  auto absorb = [&h](double v) {
    if (v == 0.0) v = 0.0;  // fold -0 into +0
    h = mix64(h ^ std::bit_cast<std::uint64_t>(v));
  };
  for (Eigen::Index j = 0; j < X.cols(); ++j) absorb(X(i, j));
  absorb(y(i));
  return h;
}

// Euclidean projection onto the probability simplex.
Eigen::VectorXd project_simplex(const Eigen::VectorXd& v) {
  std::vector<double> u(v.data(), v.data() + v.size());
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumsum = 0.0, theta = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    cumsum += u[k];
    const double t = (cumsum - 1.0) / static_cast<double>(k + 1);
    if (u[k] - t > 0) theta = t;
  }
  return (v.array() - theta).max(0.0);
}

}  // namespace

std::string_view to_string(Screening screening) {
  switch (screening) {
    case Screening::none: return "none";
    case Screening::lasso_path: return "lasso_path";
    case Screening::association_screen: return "association_screen";
  }
  return "?";
}

std::string_view to_string(Loss loss) { return loss == Loss::log ? "log" : "squared"; }

Loss parse_loss(std::string_view text) {
  if (text == "squared") return Loss::squared;
  if (text == "log") return Loss::log;
  throw ArgumentError("unknown loss '" + std::string(text) + "'");
}

Screening parse_screening(std::string_view text) {
  for (Screening s : {Screening::none, Screening::lasso_path, Screening::association_screen}) {
    if (to_string(s) == text) return s;
  }
  throw ArgumentError("unknown screening method '" + std::string(text) + "'");
}

std::vector<int> assign_folds(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, int folds, std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(y.size());
  std::vector<std::uint64_t> hash(n);
  for (std::size_t i = 0; i < n; ++i) hash[i] = row_hash(X, y, static_cast<Eigen::Index>(i), seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  // Hash collisions fall back to comparing row contents; identical rows are
  // interchangeable so their relative order cannot matter.
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (hash[a] != hash[b]) return hash[a] < hash[b];
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
      const auto ia = static_cast<Eigen::Index>(a), ib = static_cast<Eigen::Index>(b);
      if (X(ia, j) != X(ib, j)) return X(ia, j) < X(ib, j);
    }
    return y(static_cast<Eigen::Index>(a)) < y(static_cast<Eigen::Index>(b));
  });
  std::vector<int> label(n);
  for (std::size_t r = 0; r < n; ++r) label[order[r]] = static_cast<int>(r % static_cast<std::size_t>(folds));
  return label;
}

std::vector<std::size_t> screen(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, Screening method,
                                double threshold, const std::vector<bool>& keep, std::uint64_t seed) {
  const auto p = static_cast<std::size_t>(X.cols());
  std::vector<bool> chosen(p, false);
  for (std::size_t j = 0; j < p && j < keep.size(); ++j) chosen[j] = keep[j];
  switch (method) {
    case Screening::none:
      std::fill(chosen.begin(), chosen.end(), true);
      break;
    case Screening::lasso_path: {
      LassoOptions options;
      options.seed = seed;
      const LassoFit fit = fit_lasso(X, y, options);
      for (Eigen::Index j = 0; j < fit.coef_1se.size(); ++j) {
        if (fit.coef_1se(j) != 0.0) chosen[static_cast<std::size_t>(j)] = true;
      }
      break;
    }
    case Screening::association_screen: {
      // |Pearson r|; for two binary columns this is the phi coefficient,
      // which equals Cramer's V of the 2x2 table.
      const Eigen::VectorXd yc = y.array() - y.mean();
      const double syy = yc.squaredNorm();
      for (std::size_t j = 0; j < p; ++j) {
        const Eigen::VectorXd xc = X.col(static_cast<Eigen::Index>(j)).array() - X.col(static_cast<Eigen::Index>(j)).mean();
        const double sxx = xc.squaredNorm();
        if (!(sxx > 0) || !(syy > 0)) continue;
        const double r = xc.dot(yc) / std::sqrt(sxx * syy);
        if (std::abs(r) > threshold) chosen[j] = true;
      }
      break;
    }
  }
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < p; ++j) {
    if (chosen[j]) out.push_back(j);
  }
  return out;
}

double mean_loss(const Eigen::VectorXd& prediction, const Eigen::VectorXd& y, Loss loss) {
  const auto n = static_cast<double>(y.size());
  if (loss == Loss::squared) return (prediction - y).squaredNorm() / n;
  double total = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double p = std::clamp(prediction(i), kProbFloor, 1.0 - kProbFloor);
    total -= y(i) * std::log(p) + (1.0 - y(i)) * std::log1p(-p);
  }
  return total / n;
}

std::vector<double> simplex_weights(const Eigen::MatrixXd& Z, const Eigen::VectorXd& y, Loss loss) {
  const Eigen::Index m = Z.cols();
  if (m == 0) throw FitError("no members to weight");
  Eigen::VectorXd w = Eigen::VectorXd::Zero(m);
  Eigen::Index best = 0;
  double best_loss = std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < m; ++k) {
    const double l = mean_loss(Z.col(k), y, loss);
    if (l < best_loss) {  // strict: ties go to the earlier member
      best_loss = l;
      best = k;
    }
  }
  w(best) = 1.0;
  if (m == 1) return {1.0};

  const auto n = static_cast<double>(y.size());
  auto gradient = [&](const Eigen::VectorXd& weights) {
    const Eigen::VectorXd pred = Z * weights;
    Eigen::VectorXd g(pred.size());
    if (loss == Loss::squared) {
      g = 2.0 * (pred - y) / n;
    } else {
      for (Eigen::Index i = 0; i < pred.size(); ++i) {
        const double p = std::clamp(pred(i), kProbFloor, 1.0 - kProbFloor);
        g(i) = (-(y(i) / p) + (1.0 - y(i)) / (1.0 - p)) / n;
      }
    }
    return Eigen::VectorXd(Z.transpose() * g);
  };

  double current = best_loss;
  double step = 1.0;
  for (int iter = 0; iter < 2000; ++iter) {
    const Eigen::VectorXd g = gradient(w);
    bool improved = false;
    for (int tries = 0; tries < 60; ++tries) {
      const Eigen::VectorXd candidate = project_simplex(w - step * g);
      const double l = mean_loss(Z * candidate, y, loss);
      if (l < current) {
        const double gain = current - l;
        w = candidate;
        current = l;
        improved = gain > 1e-15 * std::max(1.0, std::abs(l));
        step *= 2.0;
        break;
      }
      step *= 0.5;
    }
    if (!improved) break;
  }
  return {w.data(), w.data() + w.size()};
}

double StackedLearner::residual_scale() const noexcept {
  std::size_t top = 0;
  for (std::size_t k = 1; k < weights_.size(); ++k) {
    if (weights_[k] > weights_[top]) top = k;
  }
  return members_.empty() || !members_[top] ? 0.0 : members_[top]->residual_scale();
}

Eigen::VectorXd StackedLearner::predict(const Eigen::MatrixXd& X) const {
  Eigen::MatrixXd Xs;
  const Eigen::MatrixXd* source = &X;
  if (!all_columns_) {
    Xs.resize(X.rows(), static_cast<Eigen::Index>(selected_.size()));
    for (std::size_t k = 0; k < selected_.size(); ++k) {
      Xs.col(static_cast<Eigen::Index>(k)) = X.col(static_cast<Eigen::Index>(selected_[k]));
    }
    source = &Xs;
  }
  Eigen::VectorXd out = Eigen::VectorXd::Zero(X.rows());
  for (std::size_t k = 0; k < members_.size(); ++k) {
    if (weights_[k] > 0 && members_[k]) out += weights_[k] * members_[k]->predict(*source);
  }
  return out;
}

StackedLearner fit_stack(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const StackOptions& options) {
  if (options.kinds.empty()) throw ConfigError("stack needs at least one learner");
  if (X.rows() != y.size()) throw FitError("design rows and response length differ");
  const Eigen::Index n = y.size();

  StackedLearner stack;
  stack.kinds_ = options.kinds;
  const std::size_t m = options.kinds.size();

  stack.selected_ = screen(X, y, options.screening, options.screen_threshold, options.keep, options.seed);
  stack.all_columns_ = stack.selected_.size() == static_cast<std::size_t>(X.cols());
  Eigen::MatrixXd Xs(n, static_cast<Eigen::Index>(stack.selected_.size()));
  for (std::size_t k = 0; k < stack.selected_.size(); ++k) {
    Xs.col(static_cast<Eigen::Index>(k)) = X.col(static_cast<Eigen::Index>(stack.selected_[k]));
  }

  LearnerOptions learner = options.learner;
  learner.seed = derive_seed(options.seed, 1);
  stack.members_.assign(m, nullptr);
  stack.cv_risk_.assign(m, std::numeric_limits<double>::quiet_NaN());

  if (m == 1) {
    stack.weights_ = {1.0};
    stack.members_[0] = fit_learner(options.kinds[0], Xs, y, learner);
    return stack;
  }

  if (options.folds < 2 || options.folds > n) {
    throw ConfigError("stack folds must lie between 2 and n (got " + std::to_string(options.folds) + ")");
  }
  const auto folds = assign_folds(Xs, y, options.folds, options.seed);
  stack.oof_ = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(m));
  std::vector<bool> ok(m, true);
  for (int k = 0; k < options.folds; ++k) {
    std::vector<Eigen::Index> train, test;
    for (Eigen::Index i = 0; i < n; ++i) (folds[static_cast<std::size_t>(i)] == k ? test : train).push_back(i);
    Eigen::MatrixXd Xt(static_cast<Eigen::Index>(train.size()), Xs.cols());
    Eigen::VectorXd yt(static_cast<Eigen::Index>(train.size()));
    Eigen::MatrixXd Xv(static_cast<Eigen::Index>(test.size()), Xs.cols());
    for (std::size_t r = 0; r < train.size(); ++r) {
      Xt.row(static_cast<Eigen::Index>(r)) = Xs.row(train[r]);
      yt(static_cast<Eigen::Index>(r)) = y(train[r]);
    }
    for (std::size_t r = 0; r < test.size(); ++r) Xv.row(static_cast<Eigen::Index>(r)) = Xs.row(test[r]);
    for (std::size_t j = 0; j < m; ++j) {
      if (!ok[j]) continue;
      try {
        const Eigen::VectorXd pred = fit_learner(options.kinds[j], Xt, yt, learner)->predict(Xv);
        for (std::size_t r = 0; r < test.size(); ++r) stack.oof_(test[r], static_cast<Eigen::Index>(j)) = pred(static_cast<Eigen::Index>(r));
      } catch (const FitError& e) {
        ok[j] = false;
        stack.warnings_.push_back(std::string(to_string(options.kinds[j])) + " excluded: " + e.what());
      }
    }
  }

  std::vector<Eigen::Index> alive;
  for (std::size_t j = 0; j < m; ++j) {
    if (ok[j]) {
      alive.push_back(static_cast<Eigen::Index>(j));
      stack.cv_risk_[j] = mean_loss(stack.oof_.col(static_cast<Eigen::Index>(j)), y, options.loss);
    }
  }
  if (alive.empty()) throw FitError("every stack member failed to fit");
  Eigen::MatrixXd Z(n, static_cast<Eigen::Index>(alive.size()));
  for (std::size_t k = 0; k < alive.size(); ++k) Z.col(static_cast<Eigen::Index>(k)) = stack.oof_.col(alive[k]);
  const auto w = simplex_weights(Z, y, options.loss);
  stack.weights_.assign(m, 0.0);
  for (std::size_t k = 0; k < alive.size(); ++k) stack.weights_[static_cast<std::size_t>(alive[k])] = w[k];
  stack.stack_risk_ = mean_loss(Z * Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size())), y, options.loss);

  for (std::size_t j = 0; j < m; ++j) {
    if (stack.weights_[j] > 0) stack.members_[j] = fit_learner(options.kinds[j], Xs, y, learner);
  }
  return stack;
}

}  // namespace cdrc
