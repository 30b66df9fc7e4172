#include "grridge/model_eval.hpp"

#include "grridge/parallel.hpp"
#include "grridge/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace grridge {

FoldPlan make_folds(int n, int k, const std::optional<Eigen::VectorXd>& labels,
                    std::uint64_t seed) {
  if (k < 2 || k > n) throw std::invalid_argument("make_folds: need 2 <= k <= n");
  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  plan.stratified = labels.has_value();
  plan.assignments.assign(static_cast<std::size_t>(n), 0);

  Rng rng(component_seed(seed, "folds"));
  if (!labels) {
    std::vector<int> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    rng.shuffle(idx);
    for (int i = 0; i < n; ++i) plan.assignments[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])] = i % k;
    return plan;
  }

  if (labels->size() != n) throw std::invalid_argument("make_folds: label length does not match n");
  std::vector<int> idx0, idx1;
  for (int i = 0; i < n; ++i) {
    const double v = (*labels)[i];
    if (v == 1.0) {
      idx1.push_back(i);
    } else if (v == 0.0) {
      idx0.push_back(i);
    } else {
      throw std::invalid_argument("make_folds: stratification labels must be 0/1");
    }
  }
  rng.shuffle(idx0);
  rng.shuffle(idx1);
  // one running counter across classes keeps total fold sizes within one
  int c = 0;
  for (int i : idx0) plan.assignments[static_cast<std::size_t>(i)] = c++ % k;
  for (int i : idx1) plan.assignments[static_cast<std::size_t>(i)] = c++ % k;
  return plan;
}

double cvl(const DesignMatrix& X, const Response& y, double lambda,
           const Eigen::VectorXd& multipliers, const FoldPlan& folds, const IrlsOptions& irls,
           int threads) {
  X.validate();
  y.validate();
  folds.validate(X.n());
  PenaltyConfig penalty;
  penalty.lambda_global = lambda;
  penalty.multipliers = multipliers;
  penalty.validate(X.p());

  const int n = static_cast<int>(X.n());
  std::vector<std::vector<int>> train(static_cast<std::size_t>(folds.k)),
      test(static_cast<std::size_t>(folds.k));
  for (int i = 0; i < n; ++i) {
    for (int f = 0; f < folds.k; ++f) {
      (f == folds.assignments[static_cast<std::size_t>(i)] ? test : train)[static_cast<std::size_t>(f)]
          .push_back(i);
    }
  }
  if (y.kind == ResponseKind::binary) {
    for (int f = 0; f < folds.k; ++f) {
      bool has0 = false, has1 = false;
      for (int i : train[static_cast<std::size_t>(f)]) (y.values[i] == 1.0 ? has1 : has0) = true;
      if (!has0 || !has1) {
        throw std::invalid_argument("cvl: fold plan rejected, training fold " +
                                    std::to_string(f + 1) + " is missing a class");
      }
    }
  }

  std::vector<double> fold_ll(static_cast<std::size_t>(folds.k));
  parallel_for(folds.k, threads, [&](int f) {
    const auto& tr = train[static_cast<std::size_t>(f)];
    const auto& te = test[static_cast<std::size_t>(f)];
    const DesignMatrix Xtr = X.select_rows(tr);
    const DesignMatrix Xte = X.select_rows(te);
    Response ytr{y.kind, Eigen::VectorXd(static_cast<Eigen::Index>(tr.size()))};
    for (std::size_t i = 0; i < tr.size(); ++i) ytr.values[static_cast<Eigen::Index>(i)] = y.values[tr[i]];
    Eigen::VectorXd yte(static_cast<Eigen::Index>(te.size()));
    for (std::size_t i = 0; i < te.size(); ++i) yte[static_cast<Eigen::Index>(i)] = y.values[te[i]];

    if (y.kind == ResponseKind::binary) {
      const RidgeFit fit = irls_fit(Xtr, ytr, penalty, irls);
      Eigen::VectorXd eta = Xte.values * fit.coefficients;
      eta.array() += fit.intercept;
      const Eigen::VectorXd probs = eta.unaryExpr([](double v) { return expit(v); });
      fold_ll[static_cast<std::size_t>(f)] = bernoulli_loglik(probs, yte);
    } else {
      const RidgeFit fit = linear_fit(Xtr, ytr, penalty, irls.include_intercept);
      Eigen::VectorXd eta = Xte.values * fit.coefficients;
      eta.array() += fit.intercept;
      const double s2 = fit.sigma2;
      fold_ll[static_cast<std::size_t>(f)] =
          (-0.5 * std::log(2.0 * std::numbers::pi * s2) -
           (yte.array() - eta.array()).square() / (2.0 * s2))
              .sum();
    }
  });

  double total = 0.0;
  for (double ll : fold_ll) total += ll;  // fixed fold order
  return total;
}

double tune_lambda(const DesignMatrix& X, const Response& y, const FoldPlan& folds,
                   const std::vector<double>& grid, const Eigen::VectorXd& multipliers,
                   const IrlsOptions& irls, int threads) {
  if (grid.empty()) throw std::invalid_argument("tune_lambda: empty grid");
  for (double g : grid) {
    if (!(g > 0.0) || !std::isfinite(g)) throw std::invalid_argument("tune_lambda: grid values must be positive");
  }
  const Eigen::VectorXd mult =
      multipliers.size() > 0 ? multipliers : Eigen::VectorXd::Ones(X.p());

  std::vector<double> lambdas(grid);
  std::sort(lambdas.begin(), lambdas.end());
  const auto eval = [&](double lambda) { return cvl(X, y, lambda, mult, folds, irls, threads); };

  std::vector<std::pair<double, double>> tried;  // (lambda, cvl)
  tried.reserve(lambdas.size() + 20);
  for (double lambda : lambdas) tried.emplace_back(lambda, eval(lambda));

  const auto best_of = [](const std::vector<std::pair<double, double>>& v) {
    int best = -1;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!std::isfinite(v[i].second)) continue;
      if (best < 0 || v[i].second > v[static_cast<std::size_t>(best)].second ||
          (v[i].second == v[static_cast<std::size_t>(best)].second &&
           v[i].first > v[static_cast<std::size_t>(best)].first)) {
        best = static_cast<int>(i);
      }
    }
    return best;
  };

  int best = best_of(tried);
  if (best < 0) throw std::runtime_error("tune_lambda: all cross-validated likelihoods non-finite");
  if (lambdas.size() < 2) return tried[static_cast<std::size_t>(best)].first;

  // one golden-section pass between the best grid point's neighbors, in log scale
  const std::size_t bi = static_cast<std::size_t>(best);
  double a = std::log(lambdas[bi > 0 ? bi - 1 : bi]);
  double b = std::log(lambdas[bi + 1 < lambdas.size() ? bi + 1 : bi]);
  constexpr double invphi = 0.6180339887498949;
  double c = b - invphi * (b - a);
  double d = a + invphi * (b - a);
  double fc = eval(std::exp(c));
  double fd = eval(std::exp(d));
  tried.emplace_back(std::exp(c), fc);
  tried.emplace_back(std::exp(d), fd);
  for (int it = 0; it < 8; ++it) {
    if (!(fc < fd)) {  // maximum is in [a, d]
      b = d;
      d = c;
      fd = fc;
      c = b - invphi * (b - a);
      fc = eval(std::exp(c));
      tried.emplace_back(std::exp(c), fc);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + invphi * (b - a);
      fd = eval(std::exp(d));
      tried.emplace_back(std::exp(d), fd);
    }
  }
  best = best_of(tried);
  return tried[static_cast<std::size_t>(best)].first;
}

std::pair<double, std::vector<RocPoint>> roc_auc(const Eigen::VectorXd& scores,
                                                 const Eigen::VectorXd& labels) {
  const Eigen::Index m = scores.size();
  if (labels.size() != m || m < 2) throw std::invalid_argument("roc_auc: bad input sizes");
  double n1 = 0.0, n0 = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    if (labels[i] == 1.0) {
      n1 += 1.0;
    } else if (labels[i] == 0.0) {
      n0 += 1.0;
    } else {
      throw std::invalid_argument("roc_auc: labels must be 0/1");
    }
  }
  if (n1 == 0.0 || n0 == 0.0) throw std::invalid_argument("roc_auc: single-class labels");

  // rank-sum AUC with average ranks within tie blocks
  std::vector<int> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (scores[a] != scores[b]) return scores[a] < scores[b];
    return a < b;
  });
  double rank_sum_pos = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
    for (std::size_t t = i; t < j; ++t) {
      if (labels[order[t]] == 1.0) rank_sum_pos += avg_rank;
    }
    i = j;
  }
  const double auc = (rank_sum_pos - n1 * (n1 + 1.0) / 2.0) / (n1 * n0);

  // ROC points: sweep thresholds from high to low scores
  std::vector<RocPoint> points;
  points.push_back({0.0, 0.0});
  double tp = 0.0, fp = 0.0;
  for (Eigen::Index i = m - 1; i >= 0;) {
    Eigen::Index j = i;
    while (j >= 0 && scores[order[static_cast<std::size_t>(j)]] ==
                         scores[order[static_cast<std::size_t>(i)]]) {
      if (labels[order[static_cast<std::size_t>(j)]] == 1.0) {
        tp += 1.0;
      } else {
        fp += 1.0;
      }
      --j;
    }
    points.push_back({fp / n0, tp / n1});
    i = j;
  }
  return {auc, points};
}

double brier(const Eigen::VectorXd& scores, const Eigen::VectorXd& labels) {
  const Eigen::Index m = scores.size();
  if (labels.size() != m || m < 1) throw std::invalid_argument("brier: bad input sizes");
  for (Eigen::Index i = 0; i < m; ++i) {
    if (!(scores[i] >= 0.0 && scores[i] <= 1.0)) {
      throw std::invalid_argument("brier: scores must lie in [0,1]");
    }
    if (labels[i] != 0.0 && labels[i] != 1.0) throw std::invalid_argument("brier: labels must be 0/1");
  }
  return (labels - scores).squaredNorm() / static_cast<double>(m);
}

std::vector<double> log_spaced_grid(double lo, double hi, int count) {
  if (!(lo > 0.0) || !(hi > lo) || count < 1) throw std::invalid_argument("log_spaced_grid: bad range");
  std::vector<double> grid;
  grid.reserve(static_cast<std::size_t>(count));
  if (count == 1) {
    grid.push_back(lo);
    return grid;
  }
  const double step = (std::log(hi) - std::log(lo)) / static_cast<double>(count - 1);
  for (int i = 0; i < count; ++i) grid.push_back(std::exp(std::log(lo) + step * i));
  return grid;
}

double bernoulli_loglik(const Eigen::VectorXd& probs, const Eigen::VectorXd& labels) {
  if (probs.size() != labels.size()) throw std::invalid_argument("bernoulli_loglik: size mismatch");
  constexpr double clip = 1e-10;
  const Eigen::ArrayXd p = probs.array().max(clip).min(1.0 - clip);
  return (labels.array() * p.log() + (1.0 - labels.array()) * (1.0 - p).log()).sum();
}

}  // namespace grridge
