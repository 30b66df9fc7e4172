#include "grridge/types.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace grridge {

namespace {

void check_unique(const std::vector<std::string>& ids, const char* what) {
  std::unordered_set<std::string> seen;
  for (const auto& id : ids) {
    if (!seen.insert(id).second) {
      throw std::invalid_argument(std::string("duplicate ") + what + " id: " + id);
    }
  }
}

}  // namespace

void DesignMatrix::validate() const {
  if (values.rows() < 2) throw std::invalid_argument("design matrix: need n >= 2 samples");
  if (values.cols() < 1) throw std::invalid_argument("design matrix: need p >= 1 variables");
  if (!values.allFinite()) throw std::invalid_argument("design matrix: non-finite entries");
  if (static_cast<Eigen::Index>(variable_ids.size()) != values.cols()) {
    throw std::invalid_argument("design matrix: variable id count does not match p");
  }
  if (static_cast<Eigen::Index>(sample_ids.size()) != values.rows()) {
    throw std::invalid_argument("design matrix: sample id count does not match n");
  }
  check_unique(variable_ids, "variable");
  check_unique(sample_ids, "sample");
}

DesignMatrix DesignMatrix::from_matrix(Eigen::MatrixXd m) {
  DesignMatrix x;
  x.values = std::move(m);
  x.variable_ids.reserve(x.values.cols());
  for (Eigen::Index j = 0; j < x.values.cols(); ++j) x.variable_ids.push_back("v" + std::to_string(j + 1));
  x.sample_ids.reserve(x.values.rows());
  for (Eigen::Index i = 0; i < x.values.rows(); ++i) x.sample_ids.push_back("s" + std::to_string(i + 1));
  return x;
}

DesignMatrix DesignMatrix::select_columns(const std::vector<int>& cols) const {
  DesignMatrix out;
  out.values.resize(values.rows(), static_cast<Eigen::Index>(cols.size()));
  out.variable_ids.reserve(cols.size());
  for (std::size_t j = 0; j < cols.size(); ++j) {
    if (cols[j] < 0 || cols[j] >= values.cols()) throw std::invalid_argument("select_columns: index out of range");
    out.values.col(static_cast<Eigen::Index>(j)) = values.col(cols[j]);
    out.variable_ids.push_back(variable_ids[static_cast<std::size_t>(cols[j])]);
  }
  out.sample_ids = sample_ids;
  return out;
}

DesignMatrix DesignMatrix::select_rows(const std::vector<int>& rows) const {
  DesignMatrix out;
  out.values.resize(static_cast<Eigen::Index>(rows.size()), values.cols());
  out.sample_ids.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= values.rows()) throw std::invalid_argument("select_rows: index out of range");
    out.values.row(static_cast<Eigen::Index>(i)) = values.row(rows[i]);
    out.sample_ids.push_back(sample_ids[static_cast<std::size_t>(rows[i])]);
  }
  out.variable_ids = variable_ids;
  return out;
}

void Response::validate() const {
  if (values.size() < 1) throw std::invalid_argument("response: empty");
  if (kind == ResponseKind::binary) {
    bool has0 = false, has1 = false;
    for (Eigen::Index i = 0; i < values.size(); ++i) {
      if (values[i] == 0.0) {
        has0 = true;
      } else if (values[i] == 1.0) {
        has1 = true;
      } else {
        throw std::invalid_argument("binary response: value not in {0,1} at position " + std::to_string(i + 1));
      }
    }
    if (!has0 || !has1) throw std::invalid_argument("single-class response");
  } else {
    if (!values.allFinite()) throw std::invalid_argument("continuous response: non-finite values");
  }
}

PenaltyConfig PenaltyConfig::uniform(double lambda, Eigen::Index p) {
  PenaltyConfig c;
  c.lambda_global = lambda;
  c.multipliers = Eigen::VectorXd::Ones(p);
  return c;
}

void PenaltyConfig::validate(Eigen::Index p) const {
  if (!(lambda_global > 0.0) || !std::isfinite(lambda_global)) {
    throw std::invalid_argument("penalty: lambda must be positive and finite");
  }
  if (multipliers.size() != p) throw std::invalid_argument("penalty: multiplier count does not match p");
  for (Eigen::Index k = 0; k < p; ++k) {
    if (!(multipliers[k] > 0.0) || !std::isfinite(multipliers[k])) {
      throw std::invalid_argument("penalty: multipliers must be positive and finite");
    }
  }
}

std::string to_string(Monotone m) {
  switch (m) {
    case Monotone::increasing: return "increasing";
    case Monotone::decreasing: return "decreasing";
    default: return "none";
  }
}

Monotone monotone_from_string(const std::string& s) {
  if (s == "none") return Monotone::none;
  if (s == "increasing") return Monotone::increasing;
  if (s == "decreasing") return Monotone::decreasing;
  throw std::invalid_argument("unknown monotone direction: " + s);
}

std::vector<std::vector<int>> Partition::group_members() const {
  std::vector<std::vector<int>> members(sizes.size());
  for (std::size_t g = 0; g < sizes.size(); ++g) members[g].reserve(static_cast<std::size_t>(sizes[g]));
  for (std::size_t k = 0; k < group_of.size(); ++k) members[static_cast<std::size_t>(group_of[k])].push_back(static_cast<int>(k));
  return members;
}

void Partition::validate() const {
  const int G = num_groups();
  if (G < 1) throw std::invalid_argument("partition " + id + ": no groups");
  if (group_of.empty()) throw std::invalid_argument("partition " + id + ": empty");
  if (group_labels.size() != sizes.size()) throw std::invalid_argument("partition " + id + ": label/size count mismatch");
  std::vector<int> counts(static_cast<std::size_t>(G), 0);
  for (int g : group_of) {
    if (g < 0 || g >= G) throw std::invalid_argument("partition " + id + ": group index out of range");
    ++counts[static_cast<std::size_t>(g)];
  }
  long total = 0;
  for (int g = 0; g < G; ++g) {
    if (counts[static_cast<std::size_t>(g)] != sizes[static_cast<std::size_t>(g)]) {
      throw std::invalid_argument("partition " + id + ": stored size disagrees with membership");
    }
    if (sizes[static_cast<std::size_t>(g)] < 1) {
      throw std::invalid_argument("partition " + id + ": empty group " + group_labels[static_cast<std::size_t>(g)]);
    }
    total += sizes[static_cast<std::size_t>(g)];
  }
  if (total != static_cast<long>(group_of.size())) {
    throw std::invalid_argument("partition " + id + ": sizes do not sum to p");
  }
}

Partition Partition::from_group_of(std::string id, std::vector<int> group_of,
                                   std::vector<std::string> labels, Monotone monotone) {
  Partition part;
  part.id = std::move(id);
  part.group_of = std::move(group_of);
  int G = 0;
  for (int g : part.group_of) G = std::max(G, g + 1);
  part.sizes.assign(static_cast<std::size_t>(G), 0);
  for (int g : part.group_of) ++part.sizes[static_cast<std::size_t>(g)];
  if (labels.empty()) {
    for (int g = 0; g < G; ++g) labels.push_back("g" + std::to_string(g + 1));
  }
  part.group_labels = std::move(labels);
  part.monotone = monotone;
  part.validate();
  return part;
}

void FoldPlan::validate(Eigen::Index n) const {
  if (static_cast<Eigen::Index>(assignments.size()) != n) {
    throw std::invalid_argument("fold plan: assignment count does not match n");
  }
  if (k < 2) throw std::invalid_argument("fold plan: k must be >= 2");
  std::vector<int> counts(static_cast<std::size_t>(k), 0);
  for (int f : assignments) {
    if (f < 0 || f >= k) throw std::invalid_argument("fold plan: fold index out of range");
    ++counts[static_cast<std::size_t>(f)];
  }
  for (int f = 0; f < k; ++f) {
    if (counts[static_cast<std::size_t>(f)] == 0) throw std::invalid_argument("fold plan: empty fold");
  }
}

}  // namespace grridge
