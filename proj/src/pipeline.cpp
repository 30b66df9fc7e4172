#include "grridge/pipeline.hpp"

#include "grridge/codata.hpp"
#include "grridge/rng.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace grridge {

namespace {

int param_int(const PartitionSpec& spec, const std::string& key, int fallback) {
  auto it = spec.params.find(key);
  if (it == spec.params.end()) return fallback;
  int v = 0;
  auto [ptr, ec] = std::from_chars(it->second.data(), it->second.data() + it->second.size(), v);
  if (ec != std::errc() || ptr != it->second.data() + it->second.size()) {
    throw std::invalid_argument("partition spec: bad integer for " + key + ": '" + it->second + "'");
  }
  return v;
}

CoDataKind codata_kind(const PartitionSpec& spec) {
  auto it = spec.params.find("kind");
  if (it == spec.params.end()) return CoDataKind::generic;
  if (it->second == "pvalue") return CoDataKind::pvalue;
  if (it->second == "variance") return CoDataKind::variance;
  if (it->second == "generic") return CoDataKind::generic;
  throw std::invalid_argument("partition spec: unknown co-data kind '" + it->second + "'");
}

CoDataVector numeric_codata(const PartitionSpec& spec, const DesignMatrix& X,
                            const CoDataTable* codata) {
  CoDataVector vec;
  vec.variable_ids = X.variable_ids;
  vec.kind = codata_kind(spec);
  if (spec.column == "@variance") {
    const Eigen::RowVectorXd means = X.values.colwise().mean();
    vec.values = ((X.values.rowwise() - means).colwise().squaredNorm() /
                  static_cast<double>(X.n() - 1))
                     .transpose();
    if (vec.kind == CoDataKind::generic) vec.kind = CoDataKind::variance;
    return vec;
  }
  if (!codata) throw std::invalid_argument("partition spec needs co-data column '" + spec.column + "' but no co-data file was given");
  const CoDataColumn col = codata->aligned(spec.column, X.variable_ids);
  if (!col.numeric) throw std::invalid_argument("co-data column '" + spec.column + "' is not numeric");
  vec.values = col.values;
  return vec;
}

}  // namespace

PartitionSpec parse_partition_spec(const std::string& token) {
  PartitionSpec spec;
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = token.find(':', start);
    if (pos == std::string::npos) {
      parts.push_back(token.substr(start));
      break;
    }
    parts.push_back(token.substr(start, pos - start));
    start = pos + 1;
  }
  if (parts.size() < 2) throw std::invalid_argument("partition spec '" + token + "': expected kind:column[:param=value...]");
  spec.kind = parts[0];
  spec.column = parts[1];
  if (spec.kind != "rank" && spec.kind != "rank_nonuniform" && spec.kind != "quantile" &&
      spec.kind != "labels") {
    throw std::invalid_argument("partition spec '" + token + "': unknown kind '" + spec.kind + "'");
  }
  for (std::size_t i = 2; i < parts.size(); ++i) {
    const std::size_t eq = parts[i].find('=');
    if (eq == std::string::npos || eq == 0) {
      throw std::invalid_argument("partition spec '" + token + "': expected param=value, got '" + parts[i] + "'");
    }
    spec.params[parts[i].substr(0, eq)] = parts[i].substr(eq + 1);
  }
  return spec;
}

std::vector<PartitionSpec> parse_partition_specs(const std::string& csv) {
  std::vector<PartitionSpec> specs;
  std::size_t start = 0;
  while (start <= csv.size()) {
    const std::size_t pos = csv.find(',', start);
    const std::string token =
        pos == std::string::npos ? csv.substr(start) : csv.substr(start, pos - start);
    if (!token.empty()) specs.push_back(parse_partition_spec(token));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  if (specs.empty()) throw std::invalid_argument("no partition specs in '" + csv + "'");
  return specs;
}

Partition build_partition(const PartitionSpec& spec, const DesignMatrix& X,
                          const CoDataTable* codata) {
  const std::string id = spec.kind + ":" + spec.column;
  Partition part;
  if (spec.kind == "labels") {
    if (!codata) throw std::invalid_argument("labels partition needs a co-data file");
    const CoDataColumn col = codata->aligned(spec.column, X.variable_ids);
    std::vector<std::string> labels;
    if (col.numeric) {
      for (Eigen::Index i = 0; i < col.values.size(); ++i) labels.push_back(format_double(col.values[i]));
    } else {
      labels = col.labels;
    }
    part = partition_by_labels(labels, id);
  } else {
    const CoDataVector vec = numeric_codata(spec, X, codata);
    if (spec.kind == "quantile") {
      part = partition_by_quantiles(vec, param_int(spec, "G", 8), id);
    } else if (spec.kind == "rank") {
      part = partition_by_rank(vec, param_int(spec, "s", 10), id);
    } else {
      part = partition_by_rank_nonuniform(vec, param_int(spec, "s_min", 10),
                                          param_int(spec, "G_max", 100), id);
    }
  }
  auto it = spec.params.find("monotone");
  if (it != spec.params.end()) part.monotone = monotone_from_string(it->second);
  return part;
}

Eigen::VectorXd standardize_multipliers(const DesignMatrix& X) {
  const Eigen::RowVectorXd means = X.values.colwise().mean();
  Eigen::VectorXd var = ((X.values.rowwise() - means).colwise().squaredNorm() /
                         static_cast<double>(X.n() - 1))
                            .transpose();
  // floor degenerate columns at a fraction of the median variance
  std::vector<double> sorted(var.data(), var.data() + var.size());
  std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
  const double median = sorted[sorted.size() / 2];
  if (!(median > 0.0)) throw std::invalid_argument("standardize: all columns are constant");
  var = var.array().max(1e-12 * median).matrix();
  // calibrate to mean inverse 1: m_k = c * var_k with c = (1/p) sum 1/var_k
  const double c = (1.0 / var.array()).sum() / static_cast<double>(var.size());
  return (c * var.array()).matrix();
}

PipelineResult run_pipeline(const DesignMatrix& X, const Response& y, const CoDataTable* codata,
                            const PipelineConfig& cfg) {
  PipelineResult result;

  result.kept.resize(static_cast<std::size_t>(X.p()));
  std::iota(result.kept.begin(), result.kept.end(), 0);
  DesignMatrix Xf = X;
  if (cfg.filter_fdr) {
    if (y.kind != ResponseKind::binary) throw std::invalid_argument("prior filter requires a binary response");
    result.kept = filter_features(X, y, *cfg.filter_fdr, cfg.filter_meandiff);
    if (result.kept.empty()) throw std::runtime_error("prior filter removed every variable");
    Xf = X.select_columns(result.kept);
  }

  std::vector<Partition> partitions;
  for (const PartitionSpec& spec : cfg.partitions) partitions.push_back(build_partition(spec, Xf, codata));

  GRridgeOptions opts;
  opts.method = cfg.method;
  opts.max_outer_iters = cfg.max_outer_iters;
  opts.cv_folds = cfg.cv_folds > 0 ? cfg.cv_folds : static_cast<int>(Xf.n());
  opts.cv_seed = component_seed(cfg.seed, "cv");
  opts.irls = cfg.irls;
  opts.selection = cfg.selection;
  opts.threads = cfg.threads;
  if (cfg.standardize) opts.base_multipliers = standardize_multipliers(Xf);

  double lambda;
  if (cfg.lambda) {
    lambda = *cfg.lambda;
  } else {
    const std::vector<double> grid =
        cfg.lambda_grid.empty() ? log_spaced_grid(1e-3, 1e6, 25) : cfg.lambda_grid;
    const int k = std::min<int>(opts.cv_folds, static_cast<int>(Xf.n()));
    const std::optional<Eigen::VectorXd> strat =
        y.kind == ResponseKind::binary ? std::optional<Eigen::VectorXd>(y.values) : std::nullopt;
    const FoldPlan folds = make_folds(static_cast<int>(Xf.n()), k, strat, opts.cv_seed);
    Eigen::VectorXd base = cfg.standardize ? opts.base_multipliers : Eigen::VectorXd::Ones(Xf.p());
    lambda = tune_lambda(Xf, y, folds, grid, base, cfg.irls, cfg.threads);
  }
  result.lambda = lambda;
  result.model = grridge(Xf, y, partitions, lambda, opts);
  return result;
}

MetricsReport nested_cv_eval(const DesignMatrix& X, const Response& y, const CoDataTable* codata,
                             const PipelineConfig& cfg, int outer_k,
                             std::vector<std::pair<std::string, double>>* predictions) {
  X.validate();
  y.validate();
  const int n = static_cast<int>(X.n());
  if (outer_k <= 0) outer_k = n;  // leave-one-out
  const std::optional<Eigen::VectorXd> strat =
      y.kind == ResponseKind::binary ? std::optional<Eigen::VectorXd>(y.values) : std::nullopt;
  const FoldPlan outer = make_folds(n, std::min(outer_k, n), strat, component_seed(cfg.seed, "outer-cv"));

  Eigen::VectorXd scores(n);
  for (int f = 0; f < outer.k; ++f) {
    std::vector<int> train, test;
    for (int i = 0; i < n; ++i) {
      (outer.assignments[static_cast<std::size_t>(i)] == f ? test : train).push_back(i);
    }
    if (y.kind == ResponseKind::binary) {
      bool has0 = false, has1 = false;
      for (int i : train) (y.values[i] == 1.0 ? has1 : has0) = true;
      if (!has0 || !has1) throw std::invalid_argument("nested_cv_eval: outer training fold missing a class");
    }
    const DesignMatrix Xtr = X.select_rows(train);
    Response ytr{y.kind, Eigen::VectorXd(static_cast<Eigen::Index>(train.size()))};
    for (std::size_t i = 0; i < train.size(); ++i) ytr.values[static_cast<Eigen::Index>(i)] = y.values[train[i]];

    PipelineConfig fold_cfg = cfg;
    fold_cfg.seed = component_seed(cfg.seed, "outer-fold-" + std::to_string(f));
    fold_cfg.selection.reset();  // selection is a reporting step, not part of the evaluated pipeline
    const PipelineResult fit = run_pipeline(Xtr, ytr, codata, fold_cfg);

    const DesignMatrix Xte = X.select_rows(test);
    const Eigen::VectorXd pred = predict(fit.model, Xte);
    for (std::size_t i = 0; i < test.size(); ++i) scores[test[i]] = pred[static_cast<Eigen::Index>(i)];
  }

  if (predictions) {
    for (int i = 0; i < n; ++i) predictions->emplace_back(X.sample_ids[static_cast<std::size_t>(i)], scores[i]);
  }

  MetricsReport report;
  if (y.kind == ResponseKind::binary) {
    auto [auc, points] = roc_auc(scores, y.values);
    report.auc = auc;
    report.roc_points = std::move(points);
    report.brier = brier(scores, y.values);
    report.cvl = bernoulli_loglik(scores, y.values);
  } else {
    report.brier = (y.values - scores).squaredNorm() / static_cast<double>(n);
    // Gaussian held-out log-likelihood with the pooled residual variance
    const double s2 = report.brier;
    report.cvl = -0.5 * static_cast<double>(n) * (std::log(2.0 * std::numbers::pi * s2) + 1.0);
  }
  return report;
}

}  // namespace grridge
