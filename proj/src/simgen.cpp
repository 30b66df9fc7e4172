#include "grridge/simgen.hpp"

#include "grridge/ridge_core.hpp"
#include "grridge/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace grridge {

namespace {

Eigen::MatrixXd draw_design(Rng& rng, int rows, int G, int p_g, double rho) {
  Eigen::MatrixXd X(rows, G * p_g);
  const double shared_scale = std::sqrt(rho);
  const double own_scale = std::sqrt(1.0 - rho);
  for (int i = 0; i < rows; ++i) {
    for (int g = 0; g < G; ++g) {
      const double shared = rng.normal();
      for (int j = 0; j < p_g; ++j) {
        X(i, g * p_g + j) = shared_scale * shared + own_scale * rng.normal();
      }
    }
  }
  return X;
}

}  // namespace

void SimScenario::validate() const {
  if (G < 1 || p_g < 1) throw std::invalid_argument("scenario: G and p_g must be >= 1");
  if (n < 2 || n_test < 2) throw std::invalid_argument("scenario: n and n_test must be >= 2");
  if (!(rho >= 0.0 && rho < 1.0)) throw std::invalid_argument("scenario: rho must lie in [0,1)");
  if (!(signal_skew > 0.0)) throw std::invalid_argument("scenario: signal_skew must be positive");
  if (!(sparsity >= 0.0 && sparsity <= 1.0)) throw std::invalid_argument("scenario: sparsity must lie in [0,1]");
  if (!(signal_total >= 0.0)) throw std::invalid_argument("scenario: signal_total must be >= 0");
}

SimulatedData simulate_scenario(const SimScenario& scenario) {
  scenario.validate();
  const int G = scenario.G;
  const int p_g = scenario.p_g;
  const int p = G * p_g;

  SimulatedData out;
  out.scenario = scenario;

  // planted group variances: nulls first, then log-spaced up to signal_skew,
  // scaled so sum_g K_g tau2_g = signal_total
  int n_null = static_cast<int>(std::llround(scenario.sparsity * G));
  n_null = std::min(std::max(n_null, 0), G);
  const int n_sig = G - n_null;
  out.tau2_groups = Eigen::VectorXd::Zero(G);
  if (n_sig > 0 && scenario.signal_total > 0.0) {
    double raw_total = 0.0;
    for (int j = 0; j < n_sig; ++j) {
      const double e = n_sig > 1 ? static_cast<double>(j) / (n_sig - 1) : 0.0;
      out.tau2_groups[n_null + j] = std::pow(scenario.signal_skew, e);
      raw_total += out.tau2_groups[n_null + j] * p_g;
    }
    out.tau2_groups.tail(n_sig) *= scenario.signal_total / raw_total;
  }

  std::vector<int> group_of(static_cast<std::size_t>(p));
  for (int k = 0; k < p; ++k) group_of[static_cast<std::size_t>(k)] = k / p_g;
  out.partition = Partition::from_group_of("simulated", std::move(group_of));

  Rng rng(component_seed(scenario.seed, "simgen"));

  out.beta = Eigen::VectorXd::Zero(p);
  for (int k = 0; k < p; ++k) {
    const double t2 = out.tau2_groups[k / p_g];
    if (t2 > 0.0) out.beta[k] = std::sqrt(t2) * rng.normal();
  }

  out.train_X = DesignMatrix::from_matrix(draw_design(rng, scenario.n, G, p_g, scenario.rho));
  out.test_X = DesignMatrix::from_matrix(draw_design(rng, scenario.n_test, G, p_g, scenario.rho));
  for (int i = 0; i < scenario.n; ++i) out.train_X.sample_ids[static_cast<std::size_t>(i)] = "train" + std::to_string(i + 1);
  for (int i = 0; i < scenario.n_test; ++i) out.test_X.sample_ids[static_cast<std::size_t>(i)] = "test" + std::to_string(i + 1);

  // intercept by bisection: mean_i expit(eta_test_i + c) = 1/2 on the test pool
  const Eigen::VectorXd eta_test = out.test_X.values * out.beta;
  const auto prevalence = [&](double c) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < eta_test.size(); ++i) s += expit(eta_test[i] + c);
    return s / static_cast<double>(eta_test.size());
  };
  double lo = -40.0, hi = 40.0;
  for (int it = 0; it < 200 && hi - lo > 1e-12; ++it) {
    const double mid = 0.5 * (lo + hi);
    (prevalence(mid) < 0.5 ? lo : hi) = mid;
  }
  out.intercept = 0.5 * (lo + hi);

  const Eigen::VectorXd eta_train = out.train_X.values * out.beta;
  out.train_y.kind = ResponseKind::binary;
  out.train_y.values.resize(scenario.n);
  for (int i = 0; i < scenario.n; ++i) {
    out.train_y.values[i] = rng.uniform() < expit(eta_train[i] + out.intercept) ? 1.0 : 0.0;
  }
  out.test_y.kind = ResponseKind::binary;
  out.test_y.values.resize(scenario.n_test);
  for (int i = 0; i < scenario.n_test; ++i) {
    out.test_y.values[i] = rng.uniform() < expit(eta_test[i] + out.intercept) ? 1.0 : 0.0;
  }
  return out;
}

}  // namespace grridge
