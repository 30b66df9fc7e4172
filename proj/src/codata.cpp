#include "grridge/codata.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

namespace grridge {

namespace {

std::vector<int> ascending_order(const Eigen::VectorXd& values) {
  std::vector<int> order(static_cast<std::size_t>(values.size()));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (values[a] != values[b]) return values[a] < values[b];
    return a < b;  // stable by variable index
  });
  return order;
}

void check_codata(const CoDataVector& codata) {
  if (codata.values.size() < 1) throw std::invalid_argument("co-data: empty");
  if (!codata.values.allFinite()) throw std::invalid_argument("co-data: non-finite values");
}

Partition from_rank_blocks(const CoDataVector& codata, const std::vector<int>& boundaries,
                           std::string id, const char* label_prefix) {
  const auto order = ascending_order(codata.values);
  std::vector<int> group_of(order.size());
  std::vector<std::string> labels;
  int start = 0;
  for (std::size_t g = 0; g < boundaries.size(); ++g) {
    for (int r = start; r < boundaries[g]; ++r) {
      group_of[static_cast<std::size_t>(order[static_cast<std::size_t>(r)])] = static_cast<int>(g);
    }
    start = boundaries[g];
    labels.push_back(label_prefix + std::to_string(g + 1));
  }
  const Monotone mono = codata.kind == CoDataKind::pvalue ? Monotone::decreasing : Monotone::none;
  return Partition::from_group_of(std::move(id), std::move(group_of), std::move(labels), mono);
}

}  // namespace

Partition partition_by_quantiles(const CoDataVector& codata, int G, std::string id) {
  check_codata(codata);
  const int p = static_cast<int>(codata.values.size());
  if (G < 1 || G > p) throw std::invalid_argument("partition_by_quantiles: need 1 <= G <= p");
  const int base = p / G;
  const int rem = p % G;
  std::vector<int> boundaries;
  int cum = 0;
  for (int g = 0; g < G; ++g) {
    cum += base + (g < rem ? 1 : 0);
    boundaries.push_back(cum);
  }
  if (id.empty()) id = "quantile";
  Partition part = from_rank_blocks(codata, boundaries, std::move(id), "q");
  part.monotone = Monotone::none;
  return part;
}

Partition partition_by_rank(const CoDataVector& codata, int s, std::string id) {
  check_codata(codata);
  const int p = static_cast<int>(codata.values.size());
  if (s < 1 || s > p) throw std::invalid_argument("partition_by_rank: need 1 <= s <= p");
  std::vector<int> boundaries;
  for (int cum = s; cum < p; cum += s) boundaries.push_back(cum);
  boundaries.push_back(p);
  if (id.empty()) id = "rank";
  return from_rank_blocks(codata, boundaries, std::move(id), "r");
}

Partition partition_by_rank_nonuniform(const CoDataVector& codata, int s_min, int G_max,
                                       std::string id) {
  check_codata(codata);
  const int p = static_cast<int>(codata.values.size());
  if (s_min < 1) throw std::invalid_argument("partition_by_rank_nonuniform: s_min must be >= 1");
  if (G_max < 1) throw std::invalid_argument("partition_by_rank_nonuniform: G_max must be >= 1");
  if (p < s_min) throw std::invalid_argument("partition_by_rank_nonuniform: infeasible, p < s_min");
  if (id.empty()) id = "rank_nonuniform";

  // uniform groups of s_min already fit
  if ((p + s_min - 1) / s_min <= G_max) {
    Partition part = partition_by_rank(codata, s_min, id);
    return part;
  }

  const int G = G_max;
  const double pd = static_cast<double>(p);
  const double s0 = static_cast<double>(s_min);
  // ratio r > 1 with s_min * (r^G - 1)/(r - 1) = p
  const auto geo_sum = [&](double r) { return s0 * (std::pow(r, G) - 1.0) / (r - 1.0); };
  double lo = 1.0 + 1e-9;
  double hi = 2.0;
  while (geo_sum(hi) < pd) hi *= 2.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (geo_sum(mid) < pd) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const double r = 0.5 * (lo + hi);

  // integer boundaries from the real cumulative sums; strictly increasing
  std::vector<int> boundaries;
  int prev = 0;
  for (int g = 0; g < G; ++g) {
    double cum = s0 * (std::pow(r, g + 1) - 1.0) / (r - 1.0);
    int b = g + 1 == G ? p : static_cast<int>(std::llround(cum));
    b = std::min(std::max(b, prev + 1), p - (G - 1 - g));
    boundaries.push_back(b);
    prev = b;
  }
  return from_rank_blocks(codata, boundaries, std::move(id), "r");
}

Partition partition_by_labels(const std::vector<std::string>& labels, std::string id) {
  if (labels.empty()) throw std::invalid_argument("partition_by_labels: empty labels");
  std::unordered_map<std::string, int> index;
  std::vector<std::string> distinct;
  std::vector<int> group_of;
  group_of.reserve(labels.size());
  for (const auto& label : labels) {
    auto [it, inserted] = index.emplace(label, static_cast<int>(distinct.size()));
    if (inserted) distinct.push_back(label);
    group_of.push_back(it->second);
  }
  if (id.empty()) id = "labels";
  return Partition::from_group_of(std::move(id), std::move(group_of), std::move(distinct));
}

Eigen::VectorXd isotonic_fit(const Eigen::VectorXd& tau2_init, const Eigen::VectorXd& weights,
                             Monotone direction) {
  const Eigen::Index G = tau2_init.size();
  if (weights.size() != G) throw std::invalid_argument("isotonic_fit: weight length mismatch");
  for (Eigen::Index g = 0; g < G; ++g) {
    if (!(weights[g] > 0.0)) throw std::invalid_argument("isotonic_fit: weights must be positive");
  }
  if (direction == Monotone::none) throw std::invalid_argument("isotonic_fit: direction must be increasing or decreasing");

  const double sign = direction == Monotone::increasing ? 1.0 : -1.0;
  struct Block {
    double mean;
    double weight;
    int count;
  };
  std::vector<Block> blocks;
  blocks.reserve(static_cast<std::size_t>(G));
  for (Eigen::Index g = 0; g < G; ++g) {
    blocks.push_back({sign * tau2_init[g], weights[g], 1});
    while (blocks.size() > 1 && blocks[blocks.size() - 2].mean > blocks.back().mean) {
      const Block b = blocks.back();
      blocks.pop_back();
      Block& a = blocks.back();
      a.mean = (a.mean * a.weight + b.mean * b.weight) / (a.weight + b.weight);
      a.weight += b.weight;
      a.count += b.count;
    }
  }
  Eigen::VectorXd out(G);
  Eigen::Index g = 0;
  for (const Block& b : blocks) {
    for (int i = 0; i < b.count; ++i) out[g++] = sign * b.mean;
  }
  return out;
}

Eigen::VectorXd bh_adjust(const Eigen::VectorXd& pvalues) {
  const Eigen::Index m = pvalues.size();
  std::vector<int> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (pvalues[a] != pvalues[b]) return pvalues[a] < pvalues[b];
    return a < b;
  });
  Eigen::VectorXd adjusted(m);
  double running = 1.0;
  for (Eigen::Index i = m - 1; i >= 0; --i) {
    const int k = order[static_cast<std::size_t>(i)];
    const double scaled = pvalues[k] * static_cast<double>(m) / static_cast<double>(i + 1);
    running = std::min(running, scaled);
    adjusted[k] = running;
  }
  return adjusted;
}

std::vector<int> filter_features(const DesignMatrix& X, const Response& y, double fdr_max,
                                 double min_meandiff, std::vector<int>* degenerate) {
  X.validate();
  y.validate();
  if (y.kind != ResponseKind::binary) throw std::invalid_argument("filter_features: binary response required");
  if (y.values.size() != X.n()) throw std::invalid_argument("filter_features: response length does not match n");
  if (!(fdr_max >= 0.0)) throw std::invalid_argument("filter_features: fdr_max must be >= 0");

  const Eigen::Index p = X.p();
  std::vector<int> idx0, idx1;
  for (Eigen::Index i = 0; i < y.values.size(); ++i) {
    (y.values[i] == 1.0 ? idx1 : idx0).push_back(static_cast<int>(i));
  }
  const double n0 = static_cast<double>(idx0.size());
  const double n1 = static_cast<double>(idx1.size());

  Eigen::VectorXd pvals(p), meandiff(p);
  for (Eigen::Index k = 0; k < p; ++k) {
    double m0 = 0.0, m1 = 0.0;
    for (int i : idx0) m0 += X.values(i, k);
    for (int i : idx1) m1 += X.values(i, k);
    m0 /= n0;
    m1 /= n1;
    meandiff[k] = m1 - m0;
    double s0 = 0.0, s1 = 0.0;
    for (int i : idx0) s0 += (X.values(i, k) - m0) * (X.values(i, k) - m0);
    for (int i : idx1) s1 += (X.values(i, k) - m1) * (X.values(i, k) - m1);
    s0 = n0 > 1.0 ? s0 / (n0 - 1.0) : 0.0;
    s1 = n1 > 1.0 ? s1 / (n1 - 1.0) : 0.0;
    const double a0 = s0 / n0;
    const double a1 = s1 / n1;
    const double se2 = a0 + a1;
    if (!(se2 > 0.0) || n0 < 2.0 || n1 < 2.0) {
      pvals[k] = 1.0;
      if (degenerate) degenerate->push_back(static_cast<int>(k));
      continue;
    }
    const double t = meandiff[k] / std::sqrt(se2);
    // Welch-Satterthwaite degrees of freedom
    const double df = se2 * se2 / (a0 * a0 / (n0 - 1.0) + a1 * a1 / (n1 - 1.0));
    boost::math::students_t dist(df);
    pvals[k] = 2.0 * boost::math::cdf(dist, -std::abs(t));
  }

  const Eigen::VectorXd adjusted = bh_adjust(pvals);
  std::vector<int> kept;
  for (Eigen::Index k = 0; k < p; ++k) {
    if (adjusted[k] <= fdr_max && std::abs(meandiff[k]) >= min_meandiff) {
      kept.push_back(static_cast<int>(k));
    }
  }
  return kept;
}

}  // namespace grridge
