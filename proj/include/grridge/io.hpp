#pragma once

#include "grridge/engine.hpp"
#include "grridge/types.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace grridge {

inline constexpr const char* kVersion = "0.1.0";

struct TableParseError : std::runtime_error {
  TableParseError(const std::string& file, int line, int column, const std::string& what);
  int line;
  int column;
};

// Shortest decimal representation that round-trips the exact double.
std::string format_double(double x);

// Design matrix CSV: header `sample_id,<variable ids...>`, one sample per row.
DesignMatrix read_design_csv(const std::string& path);
void write_design_csv(const std::string& path, const DesignMatrix& X);

// Response CSV: header `sample_id,y`.
struct ResponseTable {
  std::vector<std::string> sample_ids;
  std::vector<double> values;
};
ResponseTable read_response_csv(const std::string& path);
void write_response_csv(const std::string& path, const std::vector<std::string>& sample_ids,
                        const Eigen::VectorXd& values);

// Reorders a response table to the design's sample order; every design sample
// must be present. Binary values are checked against {0,1} with the offending
// file line reported.
Response align_response(const ResponseTable& table, const std::string& path,
                        const std::vector<std::string>& sample_ids, ResponseKind kind);

// Co-data TSV: header `variable_id` then one column per source; columns whose
// values all parse as reals are numeric, the rest are string annotations.
struct CoDataColumn {
  std::string name;
  bool numeric = false;
  Eigen::VectorXd values;            // numeric columns
  std::vector<std::string> labels;   // string columns
};
struct CoDataTable {
  std::vector<std::string> variable_ids;
  std::vector<CoDataColumn> columns;

  const CoDataColumn& column(const std::string& name) const;
  // Reorders a column to the given variable order; all ids must be present.
  CoDataColumn aligned(const std::string& name, const std::vector<std::string>& variable_ids) const;
};
CoDataTable read_codata_tsv(const std::string& path);
void write_codata_tsv(const std::string& path, const CoDataTable& table);

void write_roc_csv(const std::string& path, const std::vector<RocPoint>& points);
void write_cvl_trace_csv(const std::string& path, const std::vector<CvlTraceEntry>& trace);
void write_multiplier_csv(const std::string& path, const std::vector<PartitionState>& partitions);
void write_predictions_csv(const std::string& path, const std::vector<std::string>& sample_ids,
                           const Eigen::VectorXd& scores);
void write_selection_csv(const std::string& path, const SelectionResult& selection);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace grridge
