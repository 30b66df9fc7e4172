#include "grridge/ridge_core.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace grridge {

namespace {

// Core solve for unit multipliers: b = V diag(s/(s^2+2*lambda)) U^T z from the
// thin SVD A = U S V^T. Optionally returns the singular values.
Eigen::VectorXd core_solve(const Eigen::MatrixXd& A, const Eigen::VectorXd& z, double lambda,
                           Eigen::VectorXd* singular_values = nullptr) {
  Eigen::BDCSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& s = svd.singularValues();
  if (singular_values) *singular_values = s;
  const Eigen::VectorXd uz = svd.matrixU().transpose() * z;
  const Eigen::VectorXd shrunk =
      (s.array() * uz.array() / (s.array().square() + 2.0 * lambda)).matrix();
  Eigen::VectorXd b = svd.matrixV() * shrunk;
  if (!b.allFinite()) {
    const double smax2 = s.size() > 0 ? s[0] * s[0] : 0.0;
    std::ostringstream msg;
    msg << "ridge core solve produced non-finite result (condition estimate "
        << (smax2 + 2.0 * lambda) / (2.0 * lambda) << ")";
    throw std::runtime_error(msg.str());
  }
  return b;
}

struct WlsSolution {
  Eigen::VectorXd beta;
  double intercept = 0.0;
  Eigen::VectorXd singular_values;  // of the processed (scaled, centered) design
};

// Penalized weighted least squares with an optional intercept column u = W*1.
// An unpenalized intercept is eliminated exactly by weighted centering; a
// penalized one is appended as a regular column with multiplier 1.
WlsSolution solve_penalized_wls(const Eigen::MatrixXd& Xw, const Eigen::VectorXd& zw,
                                const Eigen::VectorXd* u, const PenaltyConfig& penalty) {
  WlsSolution sol;
  const Eigen::Index p = Xw.cols();
  const Eigen::ArrayXd inv_sqrt_mult = penalty.multipliers.array().rsqrt();
  if (u == nullptr) {
    Eigen::MatrixXd Xs = Xw * inv_sqrt_mult.matrix().asDiagonal();
    Eigen::VectorXd bs = core_solve(Xs, zw, penalty.lambda_global, &sol.singular_values);
    sol.beta = (bs.array() * inv_sqrt_mult).matrix();
    return sol;
  }
  if (penalty.intercept_penalized) {
    Eigen::MatrixXd Xa(Xw.rows(), p + 1);
    Xa.col(0) = *u;
    Xa.rightCols(p) = Xw * inv_sqrt_mult.matrix().asDiagonal();
    Eigen::VectorXd ba = core_solve(Xa, zw, penalty.lambda_global, &sol.singular_values);
    sol.intercept = ba[0];
    sol.beta = (ba.tail(p).array() * inv_sqrt_mult).matrix();
    return sol;
  }
  const double uu = u->squaredNorm();
  if (!(uu > 0.0)) throw std::runtime_error("degenerate intercept weights");
  const Eigen::RowVectorXd col_means = (u->transpose() * Xw) / uu;
  Eigen::MatrixXd Xc = Xw - (*u) * col_means;
  Xc *= inv_sqrt_mult.matrix().asDiagonal();
  const Eigen::VectorXd zc = zw - (*u) * (u->dot(zw) / uu);
  Eigen::VectorXd bs = core_solve(Xc, zc, penalty.lambda_global, &sol.singular_values);
  sol.beta = (bs.array() * inv_sqrt_mult).matrix();
  sol.intercept = (u->dot(zw) - u->dot(Xw * sol.beta)) / uu;
  return sol;
}

Eigen::ArrayXd clipped_probs(const Eigen::VectorXd& eta, double clip) {
  return eta.unaryExpr([](double v) { return expit(v); }).array().max(clip).min(1.0 - clip);
}

double effective_df(const Eigen::VectorXd& s, double lambda, bool unpenalized_intercept) {
  double tr = unpenalized_intercept ? 1.0 : 0.0;
  for (Eigen::Index j = 0; j < s.size(); ++j) {
    tr += s[j] * s[j] / (s[j] * s[j] + 2.0 * lambda);
  }
  return tr;
}

}  // namespace

double expit(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Eigen::VectorXd ridge_solve(const Eigen::MatrixXd& Xw, const Eigen::VectorXd& z,
                            const PenaltyConfig& penalty) {
  if (Xw.rows() != z.size()) throw std::invalid_argument("ridge_solve: dimension mismatch");
  penalty.validate(Xw.cols());
  if (!Xw.allFinite() || !z.allFinite()) throw std::invalid_argument("ridge_solve: non-finite input");
  return solve_penalized_wls(Xw, z, nullptr, penalty).beta;
}

RidgeFit irls_fit(const DesignMatrix& X, const Response& y, const PenaltyConfig& penalty,
                  const IrlsOptions& opts) {
  X.validate();
  y.validate();
  if (y.kind != ResponseKind::binary) throw std::invalid_argument("irls_fit: binary response required");
  if (y.values.size() != X.n()) throw std::invalid_argument("irls_fit: response length does not match n");
  penalty.validate(X.p());
  if (!(opts.tol > 0.0)) throw std::invalid_argument("irls_fit: tol must be positive");
  if (opts.max_iter < 1) throw std::invalid_argument("irls_fit: max_iter must be >= 1");

  const Eigen::Index p = X.p();
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  double b0 = 0.0;
  bool converged = false;
  int iterations = 0;

  for (int iter = 0; iter < opts.max_iter; ++iter) {
    Eigen::VectorXd eta = X.values * beta;
    if (opts.include_intercept) eta.array() += b0;
    const Eigen::ArrayXd ph = clipped_probs(eta, opts.prob_clip);
    const Eigen::ArrayXd w2 = ph * (1.0 - ph);
    const Eigen::ArrayXd w = w2.sqrt();
    const Eigen::VectorXd z = (eta.array() + (y.values.array() - ph) / w2).matrix();
    const Eigen::MatrixXd Xw = w.matrix().asDiagonal() * X.values;
    const Eigen::VectorXd zw = (w * z.array()).matrix();

    WlsSolution sol;
    if (opts.include_intercept) {
      const Eigen::VectorXd u = w.matrix();
      sol = solve_penalized_wls(Xw, zw, &u, penalty);
    } else {
      sol = solve_penalized_wls(Xw, zw, nullptr, penalty);
    }
    ++iterations;
    if (!sol.beta.allFinite() || !std::isfinite(sol.intercept)) {
      converged = false;  // divergence: keep the last finite iterate
      break;
    }
    double delta = (sol.beta - beta).cwiseAbs().maxCoeff();
    if (opts.include_intercept) delta = std::max(delta, std::abs(sol.intercept - b0));
    beta = sol.beta;
    if (opts.include_intercept) b0 = sol.intercept;
    if (delta < opts.tol) {
      converged = true;
      break;
    }
  }

  RidgeFit fit;
  fit.coefficients = beta;
  fit.intercept = opts.include_intercept ? b0 : 0.0;
  fit.penalty = penalty;
  fit.converged = converged;
  fit.iterations = iterations;
  fit.penalized_loglik =
      penalized_loglik_binary(X, y.values, beta, fit.intercept, penalty, opts.include_intercept);
  return fit;
}

RidgeFit linear_fit(const DesignMatrix& X, const Response& y, const PenaltyConfig& penalty,
                    bool include_intercept) {
  X.validate();
  y.validate();
  if (y.kind != ResponseKind::continuous) throw std::invalid_argument("linear_fit: continuous response required");
  if (y.values.size() != X.n()) throw std::invalid_argument("linear_fit: response length does not match n");
  penalty.validate(X.p());

  const Eigen::Index n = X.n();
  WlsSolution sol;
  if (include_intercept) {
    const Eigen::VectorXd u = Eigen::VectorXd::Ones(n);
    sol = solve_penalized_wls(X.values, y.values, &u, penalty);
  } else {
    sol = solve_penalized_wls(X.values, y.values, nullptr, penalty);
  }

  const Eigen::VectorXd resid =
      y.values - (X.values * sol.beta + Eigen::VectorXd::Constant(n, sol.intercept));
  const double rss = resid.squaredNorm();
  const double df = effective_df(sol.singular_values, penalty.lambda_global,
                                 include_intercept && !penalty.intercept_penalized);
  const double sigma2 = rss / std::max(1.0, static_cast<double>(n) - df);

  RidgeFit fit;
  fit.coefficients = sol.beta;
  fit.intercept = include_intercept ? sol.intercept : 0.0;
  fit.penalty = penalty;
  fit.converged = true;
  fit.iterations = 1;
  fit.sigma2 = sigma2;
  double pen = penalty.lambda_global *
               (penalty.multipliers.array() * fit.coefficients.array().square()).sum();
  if (penalty.intercept_penalized && include_intercept) {
    pen += penalty.lambda_global * fit.intercept * fit.intercept;
  }
  fit.penalized_loglik = -0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi * sigma2) -
                         rss / (2.0 * sigma2) - pen;
  return fit;
}

MomentFactors moment_factors(const Eigen::MatrixXd& Xw, double lambda, double noise_variance) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("moment_factors: lambda must be positive");
  if (!(noise_variance > 0.0) || !std::isfinite(noise_variance)) {
    throw std::invalid_argument("moment_factors: noise variance must be positive");
  }
  if (!Xw.allFinite()) throw std::invalid_argument("moment_factors: non-finite design");

  Eigen::BDCSVD<Eigen::MatrixXd> svd(Xw, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& s = svd.singularValues();
  // t_j = s_j / (s_j^2 + 2*lambda); v_k = nv * sum_j V_kj^2 t_j^2
  const Eigen::ArrayXd t = s.array() / (s.array().square() + 2.0 * lambda);
  const Eigen::MatrixXd Vt = svd.matrixV() * t.matrix().asDiagonal();
  Eigen::VectorXd v = noise_variance * Vt.rowwise().squaredNorm();

  MomentFactors f;
  std::vector<double> sorted(v.data(), v.data() + v.size());
  std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
  double median = sorted[sorted.size() / 2];
  if (sorted.size() % 2 == 0) {
    const double upper = median;
    std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2 - 1, sorted.end());
    median = 0.5 * (sorted[sorted.size() / 2 - 1] + upper);
  }
  if (!(median > 0.0)) throw std::runtime_error("moment_factors: degenerate variance spectrum");
  const double floor = 1e-12 * median;
  for (Eigen::Index k = 0; k < v.size(); ++k) {
    if (v[k] < floor) {
      v[k] = floor;
      f.floored.push_back(static_cast<int>(k));
    }
  }

  f.variances = v;
  f.left = v.array().rsqrt().matrix().asDiagonal() * (Vt * svd.matrixU().transpose());
  f.right = Xw;
  return f;
}

Eigen::MatrixXd alpha_matrix(const MomentFactors& factors, const Partition& row_partition,
                             const Partition& col_partition) {
  row_partition.validate();
  col_partition.validate();
  if (row_partition.p() != factors.left.rows()) {
    throw std::invalid_argument("alpha_matrix: row partition does not cover the variables");
  }
  if (col_partition.p() != factors.right.cols()) {
    throw std::invalid_argument("alpha_matrix: column partition does not cover the variables");
  }
  if (factors.left.cols() != factors.right.rows()) {
    throw std::invalid_argument("alpha_matrix: factor inner dimensions disagree");
  }

  const auto row_groups = row_partition.group_members();
  const auto col_groups = col_partition.group_members();
  const int G1 = row_partition.num_groups();
  const int G2 = col_partition.num_groups();

  std::vector<Eigen::MatrixXd> lgram(static_cast<std::size_t>(G1));
  for (int g = 0; g < G1; ++g) {
    const Eigen::MatrixXd Lg = factors.left(row_groups[static_cast<std::size_t>(g)], Eigen::all);
    lgram[static_cast<std::size_t>(g)] = Lg.transpose() * Lg;
  }
  std::vector<Eigen::MatrixXd> rgram(static_cast<std::size_t>(G2));
  for (int h = 0; h < G2; ++h) {
    const Eigen::MatrixXd Rh = factors.right(Eigen::all, col_groups[static_cast<std::size_t>(h)]);
    rgram[static_cast<std::size_t>(h)] = Rh * Rh.transpose();
  }

  Eigen::MatrixXd alpha(G1, G2);
  for (int g = 0; g < G1; ++g) {
    for (int h = 0; h < G2; ++h) {
      const double a = (lgram[static_cast<std::size_t>(g)].array() *
                        rgram[static_cast<std::size_t>(h)].array())
                           .sum();
      alpha(g, h) = std::max(0.0, a);
    }
  }
  return alpha;
}

WorkingState working_state(const DesignMatrix& X, const Response& y, const RidgeFit& fit,
                           double prob_clip) {
  WorkingState ws;
  const Eigen::Index n = X.n();
  if (y.kind == ResponseKind::continuous) {
    ws.weights2 = Eigen::VectorXd::Ones(n);
    ws.response = y.values;
    return ws;
  }
  Eigen::VectorXd eta = X.values * fit.coefficients;
  eta.array() += fit.intercept;
  const Eigen::ArrayXd ph = clipped_probs(eta, prob_clip);
  ws.weights2 = (ph * (1.0 - ph)).matrix();
  ws.response = (eta.array() + (y.values.array() - ph) / ws.weights2.array()).matrix();
  return ws;
}

double penalized_loglik_binary(const DesignMatrix& X, const Eigen::VectorXd& y,
                               const Eigen::VectorXd& beta, double intercept,
                               const PenaltyConfig& penalty, bool include_intercept) {
  Eigen::VectorXd eta = X.values * beta;
  if (include_intercept) eta.array() += intercept;
  const Eigen::ArrayXd ph = clipped_probs(eta, 1e-12);
  const double ll = (y.array() * ph.log() + (1.0 - y.array()) * (1.0 - ph).log()).sum();
  double pen = penalty.lambda_global * (penalty.multipliers.array() * beta.array().square()).sum();
  if (penalty.intercept_penalized && include_intercept) {
    pen += penalty.lambda_global * intercept * intercept;
  }
  return ll - pen;
}

LoglikGradient penalized_loglik_gradient_binary(const DesignMatrix& X, const Eigen::VectorXd& y,
                                                const Eigen::VectorXd& beta, double intercept,
                                                const PenaltyConfig& penalty,
                                                bool include_intercept) {
  Eigen::VectorXd eta = X.values * beta;
  if (include_intercept) eta.array() += intercept;
  const Eigen::ArrayXd ph = eta.unaryExpr([](double v) { return expit(v); }).array();
  const Eigen::VectorXd resid = (y.array() - ph).matrix();
  LoglikGradient g;
  g.beta = X.values.transpose() * resid -
           2.0 * penalty.lambda_global * (penalty.multipliers.array() * beta.array()).matrix();
  if (include_intercept) {
    g.intercept = resid.sum();
    if (penalty.intercept_penalized) g.intercept -= 2.0 * penalty.lambda_global * intercept;
  }
  return g;
}

}  // namespace grridge
