#include "grridge/simgen.hpp"

#include <doctest.h>

using namespace grridge;

TEST_CASE("simulate_scenario shapes and determinism") {
  SimScenario sc;
  sc.G = 4;
  sc.p_g = 50;
  sc.n = 100;
  sc.n_test = 1000;
  sc.rho = 0.2;
  sc.sparsity = 0.25;
  sc.seed = 5;
  const SimulatedData a = simulate_scenario(sc);

  CHECK(a.train_X.n() == 100);
  CHECK(a.train_X.p() == 200);
  CHECK(a.test_X.n() == 1000);
  CHECK(a.test_X.p() == 200);
  CHECK(a.partition.num_groups() == 4);
  for (int g = 0; g < 4; ++g) CHECK(a.partition.sizes[static_cast<std::size_t>(g)] == 50);
  a.partition.validate();
  a.train_X.validate();
  a.train_y.validate();
  a.test_y.validate();

  const SimulatedData b = simulate_scenario(sc);
  CHECK(a.train_X.values == b.train_X.values);
  CHECK(a.test_X.values == b.test_X.values);
  CHECK(a.train_y.values == b.train_y.values);
  CHECK(a.beta == b.beta);

  SimScenario other = sc;
  other.seed = 6;
  CHECK(simulate_scenario(other).train_X.values != a.train_X.values);
}

TEST_CASE("sparsity one gives a null model") {
  SimScenario sc;
  sc.G = 3;
  sc.p_g = 20;
  sc.n = 50;
  sc.n_test = 100;
  sc.sparsity = 1.0;
  sc.seed = 2;
  const SimulatedData d = simulate_scenario(sc);
  CHECK(d.beta.cwiseAbs().maxCoeff() == 0.0);
  CHECK(d.tau2_groups.cwiseAbs().maxCoeff() == 0.0);
  // balanced classes on average
  CHECK(d.test_y.values.mean() == doctest::Approx(0.5).epsilon(0.1));
}

TEST_CASE("null groups have exactly zero coefficients") {
  SimScenario sc;
  sc.G = 5;
  sc.p_g = 30;
  sc.sparsity = 0.4;  // two null groups
  sc.seed = 11;
  const SimulatedData d = simulate_scenario(sc);
  int n_null = 0;
  for (int g = 0; g < 5; ++g) {
    if (d.tau2_groups[g] == 0.0) ++n_null;
  }
  CHECK(n_null == 2);
  for (int k = 0; k < d.beta.size(); ++k) {
    if (d.tau2_groups[d.partition.group_of[static_cast<std::size_t>(k)]] == 0.0) {
      CHECK(d.beta[k] == 0.0);
    }
  }
}

TEST_CASE("within-group correlation approaches rho") {
  SimScenario sc;
  sc.G = 2;
  sc.p_g = 40;
  sc.n = 10;
  sc.n_test = 1000;
  sc.rho = 0.5;
  sc.seed = 3;
  const SimulatedData d = simulate_scenario(sc);
  // average pairwise correlation of the first group's columns on the test pool
  const Eigen::MatrixXd block = d.test_X.values.leftCols(40);
  const Eigen::RowVectorXd mean = block.colwise().mean();
  const Eigen::MatrixXd centered = block.rowwise() - mean;
  const Eigen::VectorXd sd = (centered.colwise().squaredNorm() / (1000.0 - 1.0)).cwiseSqrt().transpose();
  double corr_sum = 0.0;
  int pairs = 0;
  for (int a = 0; a < 40; ++a) {
    for (int b = a + 1; b < 40; ++b) {
      corr_sum += centered.col(a).dot(centered.col(b)) / (999.0 * sd[a] * sd[b]);
      ++pairs;
    }
  }
  CHECK(corr_sum / pairs == doctest::Approx(0.5).epsilon(0.1));  // within 0.05 absolute
}

TEST_CASE("planted beta variance is near its tau2 for large groups") {
  SimScenario sc;
  sc.G = 3;
  sc.p_g = 80;
  sc.sparsity = 0.0;
  sc.signal_skew = 9.0;
  sc.seed = 7;
  const SimulatedData d = simulate_scenario(sc);
  for (int g = 0; g < 3; ++g) {
    const double tau2 = d.tau2_groups[g];
    double var = 0.0;
    for (int j = 0; j < 80; ++j) var += d.beta[g * 80 + j] * d.beta[g * 80 + j];
    var /= 80.0;
    CHECK(var > tau2 / 3.0);
    CHECK(var < tau2 * 3.0);
  }
  // skew spans the requested range
  CHECK(d.tau2_groups[2] / d.tau2_groups[0] == doctest::Approx(9.0).epsilon(1e-9));
}

TEST_CASE("scenario validation") {
  SimScenario sc;
  sc.rho = 1.0;
  CHECK_THROWS_AS(simulate_scenario(sc), std::invalid_argument);
  sc = SimScenario{};
  sc.sparsity = 1.5;
  CHECK_THROWS_AS(simulate_scenario(sc), std::invalid_argument);
}
