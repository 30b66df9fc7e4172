#pragma once

#include "grridge/types.hpp"

namespace grridge {

// Variables sorted ascending by co-data value (ties by index), split into G
// contiguous near-equal blocks; the remainder goes to the first groups.
Partition partition_by_quantiles(const CoDataVector& codata, int G, std::string id = {});

// Rank-based groups of size s: group g holds ranks s(g-1)+1..sg ascending; the
// last group may be smaller. p-value co-data marks tau2 as decreasing in g.
Partition partition_by_rank(const CoDataVector& codata, int s, std::string id = {});

// Rank-based groups growing geometrically from s_min, ratio solved so that
// exactly G <= G_max groups cover p. The most extreme (smallest) values get
// the smallest groups. Falls back to uniform size-s_min groups when those
// already fit within G_max.
Partition partition_by_rank_nonuniform(const CoDataVector& codata, int s_min, int G_max,
                                       std::string id = {});

// One group per distinct label, ordered by first appearance.
Partition partition_by_labels(const std::vector<std::string>& labels, std::string id = {});

// Weighted isotonic regression (pool adjacent violators): minimizes
// sum_g w_g (x_g - tau2_init_g)^2 subject to monotonicity in g.
Eigen::VectorXd isotonic_fit(const Eigen::VectorXd& tau2_init, const Eigen::VectorXd& weights,
                             Monotone direction);

// Per-variable Welch t-test with Benjamini-Hochberg adjustment; keeps
// variables with adjusted p <= fdr_max and |mean difference| >= min_meandiff.
// Variables with zero within-class variance get p = 1 and are reported via
// `degenerate`.
std::vector<int> filter_features(const DesignMatrix& X, const Response& y, double fdr_max,
                                 double min_meandiff, std::vector<int>* degenerate = nullptr);

// Benjamini-Hochberg step-up adjustment.
Eigen::VectorXd bh_adjust(const Eigen::VectorXd& pvalues);

}  // namespace grridge
