#include "grridge/eb_penalty.hpp"

#include "grridge/ridge_core.hpp"

#include <cmath>

namespace grridge {

namespace {

// Multiplicative bounds around the global estimate.
Eigen::VectorXd clamp_tau2(Eigen::VectorXd tau2, double tau2_global, std::vector<int>* clamped) {
  const double center = std::max(tau2_global, kTau2Floor);
  const double lo = 1e-4 * center;
  const double hi = 1e6 * center;
  for (Eigen::Index g = 0; g < tau2.size(); ++g) {
    double t = tau2[g];
    if (!std::isfinite(t) || t < lo) {
      t = lo;
    } else if (t > hi) {
      t = hi;
    } else {
      continue;
    }
    tau2[g] = t;
    if (clamped) clamped->push_back(static_cast<int>(g));
  }
  return tau2;
}

Partition single_group(std::string id, Eigen::Index p) {
  return Partition::from_group_of(std::move(id), std::vector<int>(static_cast<std::size_t>(p), 0));
}

void check_beta_v(const Eigen::VectorXd& beta, const Eigen::VectorXd& v) {
  if (beta.size() != v.size()) throw std::invalid_argument("beta/variance length mismatch");
  for (Eigen::Index k = 0; k < v.size(); ++k) {
    if (!(v[k] > 0.0)) throw std::invalid_argument("variances must be positive");
  }
}

}  // namespace

Eigen::VectorXd group_B(const Eigen::VectorXd& beta, const Eigen::VectorXd& v,
                        const Partition& partition) {
  partition.validate();
  check_beta_v(beta, v);
  if (partition.p() != beta.size()) throw std::invalid_argument("group_B: partition does not cover the variables");
  Eigen::VectorXd B = Eigen::VectorXd::Zero(partition.num_groups());
  for (Eigen::Index k = 0; k < beta.size(); ++k) {
    B[partition.group_of[static_cast<std::size_t>(k)]] += beta[k] * beta[k] / v[k] - 1.0;
  }
  return B;
}

Eigen::VectorXd solve_system(const EBSystem& system, std::vector<int>* clamped) {
  const Eigen::Index G = system.B.size();
  if (G < 1) throw std::invalid_argument("solve_system: empty system");
  if (system.alpha.rows() != G || system.alpha.cols() != G) {
    throw std::invalid_argument("solve_system: alpha must be G x G");
  }
  if (!system.B.allFinite() || !system.alpha.allFinite()) {
    throw std::invalid_argument("solve_system: non-finite system");
  }

  Eigen::FullPivLU<Eigen::MatrixXd> lu(system.alpha);
  if (!lu.isInvertible()) {
    throw SingularAlphaError("solve_system: singular coefficient matrix (collinear group structure)");
  }
  const Eigen::VectorXd tau2 = lu.solve(system.B);

  // Global single-group estimate from the same system: collapsing the groups
  // sums the equations, so tau2_glob = sum(B) / sum(alpha).
  const double denom = system.alpha.sum();
  if (!(denom > 0.0)) throw std::invalid_argument("solve_system: non-positive alpha total");
  const double glob = system.B.sum() / denom;
  return clamp_tau2(tau2, glob, clamped);
}

double tau_global(const Eigen::VectorXd& beta, const Eigen::VectorXd& v,
                  const MomentFactors& factors, bool* clamped) {
  check_beta_v(beta, v);
  const Partition rows = single_group("all-rows", factors.left.rows());
  const Partition cols = single_group("all-cols", factors.right.cols());
  const double denom = alpha_matrix(factors, rows, cols)(0, 0);
  if (!(denom > 0.0)) throw std::runtime_error("tau_global: zero denominator");
  const double num = (beta.array().square() / v.array() - 1.0).sum();
  double tau2 = num / denom;
  if (clamped) *clamped = false;
  if (!std::isfinite(tau2) || tau2 < kTau2Floor) {
    tau2 = kTau2Floor;
    if (clamped) *clamped = true;
  }
  return tau2;
}

Eigen::VectorXd tau_group_iterative(const Eigen::VectorXd& beta, const Eigen::VectorXd& v,
                                    const MomentFactors& factors, const Partition& partition,
                                    double tau2_global, std::vector<int>* clamped) {
  if (!(tau2_global >= 0.0)) throw std::invalid_argument("tau_group_iterative: tau2_global must be >= 0");
  const Eigen::VectorXd B = group_B(beta, v, partition);
  const Eigen::MatrixXd alpha = alpha_matrix(factors, partition, partition);
  const int G = partition.num_groups();
  Eigen::VectorXd tau2(G);
  for (int g = 0; g < G; ++g) {
    const double within = alpha(g, g);
    if (!(within > 0.0)) {
      throw std::runtime_error("tau_group_iterative: zero within-group denominator for group " +
                               partition.group_labels[static_cast<std::size_t>(g)]);
    }
    const double cross = alpha.row(g).sum() - within;
    tau2[g] = (B[g] - cross * tau2_global) / within;
  }
  return clamp_tau2(tau2, tau2_global, clamped);
}

MultiplierSet calibrate(const Eigen::VectorXd& tau2, const std::vector<int>& sizes,
                        std::string partition_id) {
  const Eigen::Index G = tau2.size();
  if (G < 1 || static_cast<Eigen::Index>(sizes.size()) != G) {
    throw std::invalid_argument("calibrate: tau2/size length mismatch");
  }
  double p = 0.0;
  for (int K : sizes) {
    if (K < 1) throw std::invalid_argument("calibrate: group sizes must be >= 1");
    p += static_cast<double>(K);
  }
  double C = 0.0;
  for (Eigen::Index g = 0; g < G; ++g) {
    if (!(tau2[g] > 0.0) || !std::isfinite(tau2[g])) {
      throw std::invalid_argument("calibrate: tau2 must be positive after clamping");
    }
    // accumulate as (K_g/p) * tau2_g so a single group calibrates to exactly 1
    C += static_cast<double>(sizes[static_cast<std::size_t>(g)]) / p * tau2[g];
  }
  if (!(C > 0.0)) throw std::invalid_argument("calibrate: all-zero tau2");

  MultiplierSet set;
  set.partition_id = std::move(partition_id);
  set.tau2 = tau2;
  set.group_multipliers = (C / tau2.array()).matrix();
  return set;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> rescale_estimates(const Eigen::VectorXd& beta_prime,
                                                              const Eigen::VectorXd& v_prime,
                                                              const Eigen::VectorXd& multipliers) {
  if (beta_prime.size() != v_prime.size() || beta_prime.size() != multipliers.size()) {
    throw std::invalid_argument("rescale_estimates: length mismatch");
  }
  for (Eigen::Index k = 0; k < multipliers.size(); ++k) {
    if (!(multipliers[k] > 0.0)) throw std::invalid_argument("rescale_estimates: multipliers must be positive");
  }
  return {(beta_prime.array() * multipliers.array().rsqrt()).matrix(),
          (v_prime.array() / multipliers.array()).matrix()};
}

Eigen::VectorXd compose_multipliers(const std::vector<PartitionMultipliers>& sets) {
  if (sets.empty()) throw std::invalid_argument("compose_multipliers: no multiplier sets");
  const Eigen::Index p = sets.front().partition->p();
  Eigen::VectorXd m = Eigen::VectorXd::Ones(p);
  for (const auto& s : sets) {
    if (s.partition == nullptr || s.multipliers == nullptr) {
      throw std::invalid_argument("compose_multipliers: null entry");
    }
    s.partition->validate();
    if (s.partition->p() != p) throw std::invalid_argument("compose_multipliers: partitions cover different variable counts");
    if (s.multipliers->group_multipliers.size() != s.partition->num_groups()) {
      throw std::invalid_argument("compose_multipliers: multiplier count does not match groups");
    }
    for (Eigen::Index k = 0; k < p; ++k) {
      m[k] *= s.multipliers->group_multipliers[s.partition->group_of[static_cast<std::size_t>(k)]];
    }
  }
  return m;
}

Eigen::VectorXd adaptive_ridge_multipliers(const Eigen::VectorXd& beta_init,
                                           std::vector<int>* clamped) {
  const Eigen::Index p = beta_init.size();
  if (p < 1) throw std::invalid_argument("adaptive_ridge_multipliers: empty input");
  const double C = beta_init.squaredNorm() / static_cast<double>(p);
  if (!(C > 0.0)) throw std::invalid_argument("adaptive_ridge_multipliers: all-zero coefficients");
  constexpr double kCeiling = 1e6;
  Eigen::VectorXd m(p);
  for (Eigen::Index k = 0; k < p; ++k) {
    const double b2 = beta_init[k] * beta_init[k];
    double mk = b2 > 0.0 ? C / b2 : std::numeric_limits<double>::infinity();
    if (mk > kCeiling) {
      mk = kCeiling;
      if (clamped) clamped->push_back(static_cast<int>(k));
    }
    m[k] = mk;
  }
  return m;
}

}  // namespace grridge
