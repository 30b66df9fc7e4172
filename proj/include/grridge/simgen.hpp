#pragma once

#include "grridge/types.hpp"

namespace grridge {

// Scenario axes: group count and size, sample sizes, within-group
// equicorrelation, spread of the non-null group variances, and the fraction
// of groups without signal.
struct SimScenario {
  int G = 4;
  int p_g = 50;
  int n = 100;
  int n_test = 1000;
  double rho = 0.0;
  double signal_skew = 10.0;  // ratio of largest to smallest non-null tau2
  double sparsity = 0.0;      // fraction of null groups
  std::uint64_t seed = 1;
  // total prior signal sum_g K_g tau2_g, i.e. the expected variance of X*beta
  double signal_total = 4.0;

  void validate() const;
};

struct SimulatedData {
  DesignMatrix train_X;
  Response train_y;
  DesignMatrix test_X;
  Response test_y;
  Eigen::VectorXd beta;         // true coefficients
  double intercept = 0.0;       // calibrated for ~50/50 class balance
  Eigen::VectorXd tau2_groups;  // planted group variances
  Partition partition;
  SimScenario scenario;
};

// Draws X with unit-variance equicorrelated Gaussian blocks (correlation rho
// within groups, independence across groups), beta_k ~ N(0, tau2_g(k)) with
// the first round(sparsity*G) groups null and the rest log-spaced by
// signal_skew, and binary y ~ Bernoulli(expit(c + X beta)) with c tuned by
// bisection against the test pool for ~50% prevalence. Deterministic in seed.
SimulatedData simulate_scenario(const SimScenario& scenario);

}  // namespace grridge
