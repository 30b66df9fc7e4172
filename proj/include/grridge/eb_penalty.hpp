#pragma once

#include "grridge/types.hpp"

#include <stdexcept>

namespace grridge {

// Thrown by solve_system when the coefficient matrix is numerically singular
// (collinear group structure); callers fall back to the iterative route.
struct SingularAlphaError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Numeric floor for group-variance estimates.
inline constexpr double kTau2Floor = 1e-12;

// B_g = sum_{k in g} (beta_k^2 / v_k - 1).
Eigen::VectorXd group_B(const Eigen::VectorXd& beta, const Eigen::VectorXd& v,
                        const Partition& partition);

// Solves alpha * tau2 = B. Components outside [1e-4, 1e6] times the global
// single-group estimate (computed from the system itself) are clamped; clamped
// group indices are reported through `clamped` when given.
Eigen::VectorXd solve_system(const EBSystem& system, std::vector<int>* clamped = nullptr);

// Single-group estimate: sum_k(beta_k^2/v_k - 1) / sum_{k,l} d_kl^2. Results
// below the numeric floor are clamped to it (flagged via `clamped`).
double tau_global(const Eigen::VectorXd& beta, const Eigen::VectorXd& v,
                  const MomentFactors& factors, bool* clamped = nullptr);

// Per-group estimate holding all other groups at tau2_global:
// tau2_g = (B_g - sum_{h != g} alpha_gh * tau2_global) / alpha_gg,
// clamped around tau2_global like solve_system.
Eigen::VectorXd tau_group_iterative(const Eigen::VectorXd& beta, const Eigen::VectorXd& v,
                                    const MomentFactors& factors, const Partition& partition,
                                    double tau2_global, std::vector<int>* clamped = nullptr);

// lambda'_g = C / tau2_g with C = (1/p) sum_g K_g tau2_g, which enforces
// (1/p) sum_g K_g / lambda'_g = 1.
MultiplierSet calibrate(const Eigen::VectorXd& tau2, const std::vector<int>& sizes,
                        std::string partition_id = {});

// beta_k = mult_k^{-1/2} beta'_k, v_k = mult_k^{-1} v'_k.
std::pair<Eigen::VectorXd, Eigen::VectorXd> rescale_estimates(const Eigen::VectorXd& beta_prime,
                                                              const Eigen::VectorXd& v_prime,
                                                              const Eigen::VectorXd& multipliers);

struct PartitionMultipliers {
  const Partition* partition = nullptr;
  const MultiplierSet* multipliers = nullptr;
};

// Per-variable product of the group multipliers of each partition.
Eigen::VectorXd compose_multipliers(const std::vector<PartitionMultipliers>& sets);

// Adaptive-ridge baseline: lambda'_k = C / beta_k^2 with C = (1/p) sum beta_k^2
// (singleton-group calibration). Multipliers are capped at 1e6; capped
// variables are reported.
Eigen::VectorXd adaptive_ridge_multipliers(const Eigen::VectorXd& beta_init,
                                           std::vector<int>* clamped = nullptr);

}  // namespace grridge
