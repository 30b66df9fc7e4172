#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace grridge {

// n x p covariate matrix, samples as rows, with unique row/column identifiers.
struct DesignMatrix {
  Eigen::MatrixXd values;
  std::vector<std::string> variable_ids;
  std::vector<std::string> sample_ids;

  Eigen::Index n() const { return values.rows(); }
  Eigen::Index p() const { return values.cols(); }

  // Throws std::invalid_argument on shape, identifier or finiteness violations.
  void validate() const;

  // Wraps a raw matrix with generated ids (v1..vp, s1..sn).
  static DesignMatrix from_matrix(Eigen::MatrixXd m);

  DesignMatrix select_columns(const std::vector<int>& cols) const;
  DesignMatrix select_rows(const std::vector<int>& rows) const;
};

enum class ResponseKind { binary, continuous };

struct Response {
  ResponseKind kind = ResponseKind::binary;
  Eigen::VectorXd values;

  // binary: values in {0,1} with both classes present; continuous: finite.
  void validate() const;
};

// Per-variable penalty lambda_global * multipliers[k]; the multipliers are the
// diagonal of Lambda (group multipliers composed across partitions).
struct PenaltyConfig {
  double lambda_global = 1.0;
  Eigen::VectorXd multipliers;
  bool intercept_penalized = false;

  static PenaltyConfig uniform(double lambda, Eigen::Index p);
  void validate(Eigen::Index p) const;
};

struct RidgeFit {
  Eigen::VectorXd coefficients;
  double intercept = 0.0;
  PenaltyConfig penalty;
  bool converged = true;
  int iterations = 0;
  double penalized_loglik = 0.0;
  // Residual-variance estimate RSS/(n - tr(H)); continuous fits only.
  double sigma2 = std::numeric_limits<double>::quiet_NaN();
};

// Factor pair of the bias-coefficient matrix D = left * right, where
// d_kl = c_kl / sqrt(v_k), together with the variance approximations v_k.
struct MomentFactors {
  Eigen::MatrixXd left;              // p x n
  Eigen::MatrixXd right;             // n x p
  Eigen::VectorXd variances;         // v_k, all > 0 after flooring
  Eigen::VectorXd working_weights;   // diag of W^2 (filled by fitting callers)
  Eigen::VectorXd working_response;  // z (filled by fitting callers)
  std::vector<int> floored;          // variables whose v_k hit the numeric floor
};

enum class Monotone { none, increasing, decreasing };

std::string to_string(Monotone m);
Monotone monotone_from_string(const std::string& s);

// Disjoint, exhaustive grouping of the p variables into G groups.
struct Partition {
  std::string id;
  std::vector<int> group_of;  // length p, values in [0, G)
  std::vector<std::string> group_labels;
  std::vector<int> sizes;  // K_g
  Monotone monotone = Monotone::none;

  int num_groups() const { return static_cast<int>(sizes.size()); }
  Eigen::Index p() const { return static_cast<Eigen::Index>(group_of.size()); }
  std::vector<std::vector<int>> group_members() const;
  void validate() const;

  // Derives sizes (and labels g1..gG when none are given) from group_of.
  static Partition from_group_of(std::string id, std::vector<int> group_of,
                                 std::vector<std::string> labels = {},
                                 Monotone monotone = Monotone::none);
};

enum class CoDataKind { pvalue, variance, generic };

struct CoDataVector {
  std::vector<std::string> variable_ids;
  Eigen::VectorXd values;
  CoDataKind kind = CoDataKind::generic;
};

// Group statistics B_g and coefficient matrix alpha_gh of the estimation
// equations; tau2 holds the solved group variances.
struct EBSystem {
  Eigen::VectorXd B;
  Eigen::MatrixXd alpha;
  Eigen::VectorXd tau2;
};

struct MultiplierSet {
  std::string partition_id;
  Eigen::VectorXd group_multipliers;  // lambda'_g, all > 0
  Eigen::VectorXd tau2;
};

struct FoldPlan {
  std::vector<int> assignments;  // length n, values in [0, k)
  int k = 0;
  std::uint64_t seed = 0;
  bool stratified = false;

  void validate(Eigen::Index n) const;
};

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

struct MetricsReport {
  double auc = std::numeric_limits<double>::quiet_NaN();
  std::vector<RocPoint> roc_points;
  double brier = std::numeric_limits<double>::quiet_NaN();
  double cvl = std::numeric_limits<double>::quiet_NaN();
};

}  // namespace grridge
