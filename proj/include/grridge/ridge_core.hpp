#pragma once

#include "grridge/types.hpp"

namespace grridge {

struct IrlsOptions {
  double tol = 1e-6;   // max absolute coefficient change
  int max_iter = 25;
  bool include_intercept = true;
  double prob_clip = 1e-10;  // fitted probabilities clipped to [clip, 1-clip]
};

// argmin_b ||z - Xw b||^2 + 2*lambda*sum_k mult_k b_k^2.
//
// Columns are scaled by mult_k^{-1/2}, the uniform-penalty problem is solved
// through the thin SVD of the scaled design (only an n x n core is inverted),
// and the solution is scaled back.
Eigen::VectorXd ridge_solve(const Eigen::MatrixXd& Xw, const Eigen::VectorXd& z,
                            const PenaltyConfig& penalty);

// Penalized logistic regression by IRLS: W = diag(p~(1-p~))^{1/2},
// z_i = eta_i + (y_i - p~_i)/(p~_i(1-p~_i)), weighted penalized solve, until
// the max coefficient change drops below tol or max_iter is hit.
RidgeFit irls_fit(const DesignMatrix& X, const Response& y, const PenaltyConfig& penalty,
                  const IrlsOptions& opts = {});

// Penalized linear regression: one weighted solve with W = I, z = y. Stores
// sigma2 = RSS/(n - tr(H)).
RidgeFit linear_fit(const DesignMatrix& X, const Response& y, const PenaltyConfig& penalty,
                    bool include_intercept = true);

// Variance approximations v_k = noise_variance * diag(M X^T X M) with
// M = (Xw^T Xw + 2*lambda I)^{-1}, plus the factor pair
// L = diag(1/sqrt(v)) M Xw^T and R = Xw, all through the thin SVD of Xw so no
// p x p matrix is formed. noise_variance is 1 for the logistic case (the IRLS
// weights absorb it) and sigma2 for Gaussian responses.
//
// v_k below 1e-12 * median(v) are floored and reported in `floored`.
MomentFactors moment_factors(const Eigen::MatrixXd& Xw, double lambda,
                             double noise_variance = 1.0);

// alpha[g][h] = sum_{k in g, l in h} d_kl^2 for D = left*right, computed as
// [(L_g^T L_g) o (R_h R_h^T)]_Sigma without materializing D. Row groups index
// rows of `left`, column groups index columns of `right`.
Eigen::MatrixXd alpha_matrix(const MomentFactors& factors, const Partition& row_partition,
                             const Partition& col_partition);

// IRLS working state (W^2 diagonal and working response z) at the fitted
// coefficients; identity weights and z = y for continuous responses.
struct WorkingState {
  Eigen::VectorXd weights2;
  Eigen::VectorXd response;
};
WorkingState working_state(const DesignMatrix& X, const Response& y, const RidgeFit& fit,
                           double prob_clip = 1e-10);

double expit(double x);

// Bernoulli log-likelihood minus lambda * sum_k mult_k beta_k^2 (plus the
// intercept term when it is penalized).
double penalized_loglik_binary(const DesignMatrix& X, const Eigen::VectorXd& y,
                               const Eigen::VectorXd& beta, double intercept,
                               const PenaltyConfig& penalty, bool include_intercept);

struct LoglikGradient {
  Eigen::VectorXd beta;
  double intercept = 0.0;
};
LoglikGradient penalized_loglik_gradient_binary(const DesignMatrix& X, const Eigen::VectorXd& y,
                                                const Eigen::VectorXd& beta, double intercept,
                                                const PenaltyConfig& penalty,
                                                bool include_intercept);

}  // namespace grridge
