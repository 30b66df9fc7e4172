#pragma once

#include "grridge/ridge_core.hpp"
#include "grridge/types.hpp"

#include <optional>

namespace grridge {

// Deterministic fold assignment; sizes differ by at most one. With labels,
// each class is dealt round-robin so every fold keeps both classes whenever
// the class counts allow it. k = n gives leave-one-out folds.
FoldPlan make_folds(int n, int k, const std::optional<Eigen::VectorXd>& labels,
                    std::uint64_t seed);

// Cross-validated log-likelihood at fixed lambda and multipliers: the model is
// refit on each training fold and the held-out log-likelihood is summed in
// fold order (Bernoulli for binary, Gaussian with the training-fold sigma2 for
// continuous responses).
double cvl(const DesignMatrix& X, const Response& y, double lambda,
           const Eigen::VectorXd& multipliers, const FoldPlan& folds,
           const IrlsOptions& irls = {}, int threads = 1);

// Grid maximum of cvl with one golden-section refinement pass between the best
// grid point's neighbors; ties resolve to the larger lambda.
double tune_lambda(const DesignMatrix& X, const Response& y, const FoldPlan& folds,
                   const std::vector<double>& grid,
                   const Eigen::VectorXd& multipliers = Eigen::VectorXd(),
                   const IrlsOptions& irls = {}, int threads = 1);

// AUC as the Mann-Whitney statistic (ties count 1/2) plus the ROC polyline
// with one point per distinct threshold, from (0,0) to (1,1).
std::pair<double, std::vector<RocPoint>> roc_auc(const Eigen::VectorXd& scores,
                                                 const Eigen::VectorXd& labels);

// (1/m) sum (y_i - p_i)^2 for probabilities in [0,1].
double brier(const Eigen::VectorXd& scores, const Eigen::VectorXd& labels);

// count log-spaced values over [lo, hi].
std::vector<double> log_spaced_grid(double lo, double hi, int count);

// Held-out Bernoulli log-likelihood of probability predictions.
double bernoulli_loglik(const Eigen::VectorXd& probs, const Eigen::VectorXd& labels);

}  // namespace grridge
