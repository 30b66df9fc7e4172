#include "grridge/io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace grridge {

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

bool parse_double(const std::string& s, double& out) {
  const char* begin = s.data();
  const char* end = begin + s.size();
  auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc() && ptr == end && !s.empty();
}

// Reads all lines, strips trailing \r, drops a trailing empty line.
std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;  // row index -> 1-based file line is index + 2
};

Table read_table(const std::string& path, char sep, const char* expected_first) {
  const auto lines = read_lines(path);
  if (lines.empty()) throw TableParseError(path, 1, 1, "empty file");
  Table t;
  t.header = split(lines[0], sep);
  if (t.header.size() < 2) throw TableParseError(path, 1, 1, "header needs at least two columns");
  if (t.header[0] != expected_first) {
    throw TableParseError(path, 1, 1, std::string("first header column must be '") + expected_first + "'");
  }
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    auto fields = split(lines[i], sep);
    if (fields.size() != t.header.size()) {
      throw TableParseError(path, static_cast<int>(i + 1), 1,
                            "expected " + std::to_string(t.header.size()) + " fields, got " +
                                std::to_string(fields.size()));
    }
    t.rows.push_back(std::move(fields));
  }
  if (t.rows.empty()) throw TableParseError(path, 2, 1, "no data rows");
  return t;
}

}  // namespace

TableParseError::TableParseError(const std::string& file, int line_, int column_,
                                 const std::string& what)
    : std::runtime_error(file + ":" + std::to_string(line_) + ":" + std::to_string(column_) + ": " + what),
      line(line_),
      column(column_) {}

std::string format_double(double x) {
  char buf[40];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, ptr);
}

DesignMatrix read_design_csv(const std::string& path) {
  const Table t = read_table(path, ',', "sample_id");
  DesignMatrix X;
  X.variable_ids.assign(t.header.begin() + 1, t.header.end());
  X.values.resize(static_cast<Eigen::Index>(t.rows.size()),
                  static_cast<Eigen::Index>(X.variable_ids.size()));
  X.sample_ids.reserve(t.rows.size());
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    X.sample_ids.push_back(t.rows[i][0]);
    for (std::size_t j = 1; j < t.rows[i].size(); ++j) {
      double v;
      if (!parse_double(t.rows[i][j], v)) {
        throw TableParseError(path, static_cast<int>(i + 2), static_cast<int>(j + 1),
                              "not a number: '" + t.rows[i][j] + "'");
      }
      X.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j - 1)) = v;
    }
  }
  X.validate();
  return X;
}

void write_design_csv(const std::string& path, const DesignMatrix& X) {
  std::ostringstream out;
  out << "sample_id";
  for (const auto& id : X.variable_ids) out << ',' << id;
  out << '\n';
  for (Eigen::Index i = 0; i < X.n(); ++i) {
    out << X.sample_ids[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < X.p(); ++j) out << ',' << format_double(X.values(i, j));
    out << '\n';
  }
  write_text_file(path, out.str());
}

ResponseTable read_response_csv(const std::string& path) {
  const Table t = read_table(path, ',', "sample_id");
  if (t.header.size() != 2 || t.header[1] != "y") {
    throw TableParseError(path, 1, 2, "response header must be 'sample_id,y'");
  }
  ResponseTable r;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    r.sample_ids.push_back(t.rows[i][0]);
    double v;
    if (!parse_double(t.rows[i][1], v)) {
      throw TableParseError(path, static_cast<int>(i + 2), 2, "not a number: '" + t.rows[i][1] + "'");
    }
    r.values.push_back(v);
  }
  return r;
}

void write_response_csv(const std::string& path, const std::vector<std::string>& sample_ids,
                        const Eigen::VectorXd& values) {
  std::ostringstream out;
  out << "sample_id,y\n";
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    out << sample_ids[static_cast<std::size_t>(i)] << ',' << format_double(values[i]) << '\n';
  }
  write_text_file(path, out.str());
}

Response align_response(const ResponseTable& table, const std::string& path,
                        const std::vector<std::string>& sample_ids, ResponseKind kind) {
  std::unordered_map<std::string, std::size_t> row_of;
  for (std::size_t i = 0; i < table.sample_ids.size(); ++i) row_of.emplace(table.sample_ids[i], i);

  std::vector<std::string> missing;
  Response y;
  y.kind = kind;
  y.values.resize(static_cast<Eigen::Index>(sample_ids.size()));
  for (std::size_t i = 0; i < sample_ids.size(); ++i) {
    auto it = row_of.find(sample_ids[i]);
    if (it == row_of.end()) {
      missing.push_back(sample_ids[i]);
      continue;
    }
    const double v = table.values[it->second];
    if (kind == ResponseKind::binary && v != 0.0 && v != 1.0) {
      throw TableParseError(path, static_cast<int>(it->second + 2), 2,
                            "binary response must be 0 or 1, got '" + format_double(v) + "'");
    }
    y.values[static_cast<Eigen::Index>(i)] = v;
  }
  if (!missing.empty()) {
    std::string msg = "response is missing samples:";
    for (std::size_t i = 0; i < missing.size() && i < 5; ++i) msg += " " + missing[i];
    if (missing.size() > 5) msg += " (+" + std::to_string(missing.size() - 5) + " more)";
    throw std::invalid_argument(msg);
  }
  y.validate();
  return y;
}

const CoDataColumn& CoDataTable::column(const std::string& name) const {
  for (const auto& c : columns) {
    if (c.name == name) return c;
  }
  throw std::invalid_argument("co-data has no column '" + name + "'");
}

CoDataColumn CoDataTable::aligned(const std::string& name,
                                  const std::vector<std::string>& ids) const {
  const CoDataColumn& src = column(name);
  std::unordered_map<std::string, std::size_t> row_of;
  for (std::size_t i = 0; i < variable_ids.size(); ++i) row_of.emplace(variable_ids[i], i);
  CoDataColumn out;
  out.name = src.name;
  out.numeric = src.numeric;
  if (src.numeric) out.values.resize(static_cast<Eigen::Index>(ids.size()));
  std::vector<std::string> missing;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    auto it = row_of.find(ids[i]);
    if (it == row_of.end()) {
      missing.push_back(ids[i]);
      continue;
    }
    if (src.numeric) {
      out.values[static_cast<Eigen::Index>(i)] = src.values[static_cast<Eigen::Index>(it->second)];
    } else {
      out.labels.push_back(src.labels[it->second]);
    }
  }
  if (!missing.empty()) {
    std::string msg = "co-data column '" + name + "' is missing variables:";
    for (std::size_t i = 0; i < missing.size() && i < 5; ++i) msg += " " + missing[i];
    if (missing.size() > 5) msg += " (+" + std::to_string(missing.size() - 5) + " more)";
    throw std::invalid_argument(msg);
  }
  return out;
}

CoDataTable read_codata_tsv(const std::string& path) {
  const Table t = read_table(path, '\t', "variable_id");
  CoDataTable table;
  for (const auto& row : t.rows) table.variable_ids.push_back(row[0]);
  for (std::size_t j = 1; j < t.header.size(); ++j) {
    CoDataColumn col;
    col.name = t.header[j];
    std::vector<double> numbers(t.rows.size());
    col.numeric = true;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
      if (!parse_double(t.rows[i][j], numbers[i])) {
        col.numeric = false;
        break;
      }
    }
    if (col.numeric) {
      col.values = Eigen::Map<const Eigen::VectorXd>(numbers.data(), static_cast<Eigen::Index>(numbers.size()));
    } else {
      for (const auto& row : t.rows) col.labels.push_back(row[j]);
    }
    table.columns.push_back(std::move(col));
  }
  return table;
}

void write_codata_tsv(const std::string& path, const CoDataTable& table) {
  std::ostringstream out;
  out << "variable_id";
  for (const auto& c : table.columns) out << '\t' << c.name;
  out << '\n';
  for (std::size_t i = 0; i < table.variable_ids.size(); ++i) {
    out << table.variable_ids[i];
    for (const auto& c : table.columns) {
      out << '\t'
          << (c.numeric ? format_double(c.values[static_cast<Eigen::Index>(i)]) : c.labels[i]);
    }
    out << '\n';
  }
  write_text_file(path, out.str());
}

void write_roc_csv(const std::string& path, const std::vector<RocPoint>& points) {
  std::ostringstream out;
  out << "fpr,tpr\n";
  for (const RocPoint& pt : points) {
    out << format_double(pt.fpr) << ',' << format_double(pt.tpr) << '\n';
  }
  write_text_file(path, out.str());
}

void write_cvl_trace_csv(const std::string& path, const std::vector<CvlTraceEntry>& trace) {
  std::ostringstream out;
  out << "iteration,partition,cvl,accepted\n";
  for (const CvlTraceEntry& e : trace) {
    out << e.iteration << ',' << e.partition_id << ',' << format_double(e.cvl) << ','
        << (e.accepted ? 1 : 0) << '\n';
  }
  write_text_file(path, out.str());
}

void write_multiplier_csv(const std::string& path, const std::vector<PartitionState>& partitions) {
  std::ostringstream out;
  out << "partition,group,size,tau2,multiplier\n";
  for (const PartitionState& st : partitions) {
    for (int g = 0; g < st.partition.num_groups(); ++g) {
      out << st.partition.id << ',' << st.partition.group_labels[static_cast<std::size_t>(g)] << ','
          << st.partition.sizes[static_cast<std::size_t>(g)] << ',' << format_double(st.tau2[g])
          << ',' << format_double(st.multipliers[g]) << '\n';
    }
  }
  write_text_file(path, out.str());
}

void write_predictions_csv(const std::string& path, const std::vector<std::string>& sample_ids,
                           const Eigen::VectorXd& scores) {
  std::ostringstream out;
  out << "sample_id,score\n";
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    out << sample_ids[static_cast<std::size_t>(i)] << ',' << format_double(scores[i]) << '\n';
  }
  write_text_file(path, out.str());
}

void write_selection_csv(const std::string& path, const SelectionResult& selection) {
  std::ostringstream out;
  out << "s,cvl\n";
  for (const auto& [s, value] : selection.cvl_curve) {
    out << s << ',' << format_double(value) << '\n';
  }
  write_text_file(path, out.str());
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << content;
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

}  // namespace grridge
