#pragma once

#include "grridge/engine.hpp"
#include "grridge/io.hpp"
#include "grridge/types.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace grridge {

// One partition request: `kind:column[:param=value...]` with kinds rank,
// rank_nonuniform, quantile, labels. Recognized params: s, s_min, G, G_max,
// kind (pvalue|variance|generic) and monotone (none|increasing|decreasing).
// The pseudo-column `@variance` uses per-variable sample variances of the
// data the pipeline is fit on.
struct PartitionSpec {
  std::string kind;
  std::string column;
  std::map<std::string, std::string> params;
};

PartitionSpec parse_partition_spec(const std::string& token);
std::vector<PartitionSpec> parse_partition_specs(const std::string& csv);

// Full fitting pipeline: optional prior filter, partition construction from
// co-data, optional standardization multipliers, global-lambda tuning, and the
// group-regularized fit. Nested evaluation reruns all of it per outer fold.
struct PipelineConfig {
  std::vector<PartitionSpec> partitions;
  std::optional<double> lambda;       // fixed when set, otherwise tuned on lambda_grid
  std::vector<double> lambda_grid;    // default: 25 points over [1e-3, 1e6]
  std::optional<double> filter_fdr;   // enables the prior filter (binary only)
  double filter_meandiff = 0.0;
  bool standardize = false;           // fold column variances into base multipliers
  EBMethod method = EBMethod::iterative;
  int max_outer_iters = 10;
  int cv_folds = 10;                  // 0 = leave-one-out
  std::uint64_t seed = 1;
  std::optional<SelectionConfig> selection;
  IrlsOptions irls;
  int threads = 1;
};

struct PipelineResult {
  GRridgeModel model;
  std::vector<int> kept;  // filtered variable indices into the input design
  double lambda = 0.0;
};

Partition build_partition(const PartitionSpec& spec, const DesignMatrix& X,
                          const CoDataTable* codata);

// Per-variable multipliers proportional to the column variances, calibrated so
// the mean inverse is 1 (standardization folded into the penalty).
Eigen::VectorXd standardize_multipliers(const DesignMatrix& X);

PipelineResult run_pipeline(const DesignMatrix& X, const Response& y, const CoDataTable* codata,
                            const PipelineConfig& cfg);

// Nested cross-validation: the whole pipeline reruns inside each outer
// training fold and the held-out predictions are pooled into the metrics.
MetricsReport nested_cv_eval(const DesignMatrix& X, const Response& y, const CoDataTable* codata,
                             const PipelineConfig& cfg, int outer_k,
                             std::vector<std::pair<std::string, double>>* predictions = nullptr);

}  // namespace grridge
