#pragma once

#include "grridge/model_eval.hpp"
#include "grridge/ridge_core.hpp"
#include "grridge/types.hpp"

#include <nlohmann/json_fwd.hpp>

#include <optional>

namespace grridge {

enum class EBMethod { system, iterative };

std::string to_string(EBMethod m);
EBMethod eb_method_from_string(const std::string& s);

// Post-hoc selection: smallest top-|beta| subset whose CVL stays within a
// relative margin of the best subset CVL.
struct SelectionConfig {
  int p_max = 100;
  double q_marg = 0.01;   // relative margin, in [0, 1)
  int dense_until = 25;   // schedule: 1..min(dense_until, p_max), then strides
  int stride = 5;
};

struct GRridgeOptions {
  EBMethod method = EBMethod::iterative;
  int max_outer_iters = 10;
  int cv_folds = 10;  // capped at n; n gives leave-one-out
  std::uint64_t cv_seed = 1;
  double cvl_tolerance = 0.0;  // accepted decrease per step; 0 stops on any decrease
  IrlsOptions irls;
  // optional per-variable base multipliers (e.g. standardization); empty = 1
  Eigen::VectorXd base_multipliers;
  std::optional<SelectionConfig> selection;
  int threads = 1;
};

struct CvlTraceEntry {
  int iteration = 0;          // 0 is the initial ridge fit
  std::string partition_id;   // "initial" for the baseline entry
  double cvl = 0.0;
  bool accepted = false;
};

struct PartitionState {
  Partition partition;
  Eigen::VectorXd multipliers;  // accumulated group multipliers over accepted visits
  Eigen::VectorXd tau2;         // from the last accepted visit (zero until then)
  bool active = true;
};

struct AcceptedStep {
  int iteration = 0;
  MultiplierSet multipliers;
};

struct SelectionResult {
  std::vector<int> indices;  // into the model's variables, ascending
  RidgeFit fit;              // refit on the selected columns, full data
  double cvl = 0.0;
  std::vector<std::pair<int, double>> cvl_curve;  // (s, CVL_s)
};

struct GRridgeModel {
  ResponseKind response_kind = ResponseKind::binary;
  double lambda = 1.0;
  std::vector<std::string> variable_ids;
  RidgeFit final_fit;             // group-regularized coefficients, original scale
  Eigen::VectorXd composed;       // per-variable product of partition multipliers
  Eigen::VectorXd base_multipliers;
  std::vector<PartitionState> partitions;
  std::vector<AcceptedStep> history;
  std::vector<CvlTraceEntry> cvl_trace;
  std::optional<SelectionResult> selection;
};

// Adaptive group-regularized ridge: ordinary ridge at lambda, then alternating
// per-partition empirical-Bayes re-penalization. Each step estimates group
// variances on the current scaled design (system or iterative route), applies
// isotonic smoothing for monotone partitions, calibrates multipliers, refits,
// and keeps the step only if the cross-validated likelihood improves; a
// non-improving step is rolled back and deactivates its partition.
GRridgeModel grridge(const DesignMatrix& X, const Response& y,
                     const std::vector<Partition>& partitions, double lambda,
                     const GRridgeOptions& opts = {});

// expit(intercept + X beta) for binary models, the linear predictor otherwise.
// Columns of Xnew are matched to the model variables by id.
Eigen::VectorXd predict(const GRridgeModel& model, const DesignMatrix& Xnew,
                        bool use_selected = false);

// Rank variables by |beta| descending, refit the top-s subset at the model's
// lambda and multipliers for each s in the schedule, and return the smallest s
// with CVL_s >= CVL_max - q_marg * |CVL_max|.
SelectionResult select_posthoc(const GRridgeModel& model, const DesignMatrix& X,
                               const Response& y, const FoldPlan& folds,
                               const SelectionConfig& cfg, const IrlsOptions& irls = {},
                               int threads = 1);

// The margin rule on its own: smallest s in the curve (ordered by s) whose CVL
// is within the relative margin of the curve maximum. Non-finite entries are
// skipped; throws when none is finite.
int select_by_margin(const std::vector<std::pair<int, double>>& cvl_curve, double q_marg);

// Reruns grridge under every partition ordering; returns (ordering, final CVL)
// pairs for order-sensitivity diagnostics.
std::vector<std::pair<std::vector<int>, double>> grridge_order_scan(
    const DesignMatrix& X, const Response& y, const std::vector<Partition>& partitions,
    double lambda, const GRridgeOptions& opts = {});

nlohmann::ordered_json model_to_json(const GRridgeModel& model);
GRridgeModel model_from_json(const nlohmann::ordered_json& j);

}  // namespace grridge
