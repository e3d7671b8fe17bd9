#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "tlpo/errors.hpp"

namespace tlpo {

using Index = Eigen::Index;

/// One dataset of excess returns. Rows are periods in ascending time order,
/// columns are assets.
struct ReturnMatrix {
  std::string label;
  Eigen::MatrixXd values;               // N x d
  std::vector<std::string> timestamps;  // optional; size N when present

  Index rows() const { return values.rows(); }
  Index cols() const { return values.cols(); }
};

/// Per-period risk-free rates aligned row-for-row with a return matrix.
struct RiskFreeSeries {
  Eigen::VectorXd values;
};

/// A target dataset plus M source datasets whose trailing n_tilde rows
/// refer to the same periods. n_tilde is the smallest row count across
/// the members, so the shortest dataset is covered entirely by the
/// shared window and longer ones carry extra history in front of it.
struct AlignedPanel {
  ReturnMatrix target;
  std::vector<ReturnMatrix> sources;
  Index n_tilde = 0;
  Index dim = 0;

  Index num_sources() const { return static_cast<Index>(sources.size()); }
  Index num_datasets() const { return num_sources() + 1; }

  /// Dataset m: 0 is the target, 1..M are the sources.
  const ReturnMatrix& dataset(Index m) const {
    if (m < 0 || m >= num_datasets())
      throw std::invalid_argument("dataset index out of range");
    return m == 0 ? target : sources[static_cast<std::size_t>(m - 1)];
  }
};

inline void validate_return_matrix(const ReturnMatrix& rm) {
  if (rm.cols() < 1)
    throw std::invalid_argument("return matrix needs at least one asset column");
  if (rm.rows() < 2)
    throw std::invalid_argument("return matrix needs at least two rows");
  if (!rm.values.allFinite())
    throw std::invalid_argument("return matrix contains non-finite entries");
  if (!rm.timestamps.empty() &&
      static_cast<Index>(rm.timestamps.size()) != rm.rows())
    throw std::invalid_argument("timestamp count does not match row count");
}

/// Shared panel time runs t = -(N - n_tilde - 1), ..., n_tilde for a dataset
/// with N rows, where t = 1..n_tilde indexes the aligned trailing window.
/// These two maps convert between panel time and 0-based row index.
inline Index time_to_row(Index n_rows, Index n_tilde, Index t) {
  if (n_tilde < 1 || n_tilde > n_rows)
    throw std::invalid_argument("n_tilde outside dataset row count");
  Index row = t + n_rows - n_tilde - 1;
  if (row < 0 || row >= n_rows)
    throw std::invalid_argument("panel time outside dataset range");
  return row;
}

inline Index row_to_time(Index n_rows, Index n_tilde, Index row) {
  if (n_tilde < 1 || n_tilde > n_rows)
    throw std::invalid_argument("n_tilde outside dataset row count");
  if (row < 0 || row >= n_rows)
    throw std::invalid_argument("row index outside dataset range");
  return row - (n_rows - n_tilde) + 1;
}

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  std::istringstream is(line);
  while (std::getline(is, cur, ',')) fields.push_back(trim(cur));
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

inline double parse_cell(const std::string& cell, std::size_t line_no,
                         const std::string& path) {
  const std::string t = trim(cell);
  if (t.empty())
    throw io_error(path + ": empty cell on line " + std::to_string(line_no));
  const char* begin = t.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end != begin + t.size())
    throw io_error(path + ": non-numeric cell '" + t + "' on line " +
                   std::to_string(line_no));
  if (!std::isfinite(v))
    throw io_error(path + ": non-finite value on line " + std::to_string(line_no));
  return v;
}

inline std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

}  // namespace detail

/// Reads a return matrix from CSV. With a header, a leading "date" column is
/// kept as timestamps; every other column must be numeric. Ragged rows,
/// non-numeric cells, and files with fewer than two data rows are rejected.
inline ReturnMatrix load_returns_csv(const std::filesystem::path& path,
                                     bool has_header = true) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open returns file: " + path.string());

  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::trim(line).empty()) continue;
    lines.push_back(line);
  }
  if (lines.empty()) throw io_error("empty returns file: " + path.string());

  std::size_t first_data = 0;
  bool has_date_col = false;
  std::size_t n_fields = 0;
  if (has_header) {
    const auto header = detail::split_csv_line(lines[0]);
    if (header.empty()) throw io_error(path.string() + ": empty header row");
    has_date_col = detail::lower(header[0]) == "date";
    n_fields = header.size();
    first_data = 1;
  } else {
    n_fields = detail::split_csv_line(lines[0]).size();
  }

  const std::size_t n_rows = lines.size() - first_data;
  const std::size_t date_cols = has_date_col ? 1 : 0;
  if (n_fields <= date_cols)
    throw io_error(path.string() + ": no asset columns");
  if (n_rows < 2)
    throw io_error(path.string() + ": needs at least two data rows");

  ReturnMatrix rm;
  rm.label = path.stem().string();
  rm.values.resize(static_cast<Index>(n_rows), static_cast<Index>(n_fields - date_cols));
  if (has_date_col) rm.timestamps.reserve(n_rows);

  for (std::size_t r = 0; r < n_rows; ++r) {
    const std::size_t line_no = first_data + r + 1;
    const auto fields = detail::split_csv_line(lines[first_data + r]);
    if (fields.size() != n_fields)
      throw io_error(path.string() + ": ragged row on line " + std::to_string(line_no) +
                     " (expected " + std::to_string(n_fields) + " fields, got " +
                     std::to_string(fields.size()) + ")");
    if (has_date_col) rm.timestamps.push_back(fields[0]);
    for (std::size_t c = date_cols; c < n_fields; ++c)
      rm.values(static_cast<Index>(r), static_cast<Index>(c - date_cols)) =
          detail::parse_cell(fields[c], line_no, path.string());
  }
  validate_return_matrix(rm);
  return rm;
}

/// Subtracts the per-period risk-free rate from every asset column.
inline ReturnMatrix to_excess(ReturnMatrix returns, const RiskFreeSeries& rf) {
  validate_return_matrix(returns);
  if (rf.values.size() != returns.rows())
    throw std::invalid_argument("risk-free series length does not match return rows");
  if (!rf.values.allFinite())
    throw std::invalid_argument("risk-free series contains non-finite entries");
  returns.values.colwise() -= rf.values;
  return returns;
}

/// Builds an aligned panel from a target and source datasets. All members
/// must share the asset dimension; the shared window length n_tilde is the
/// minimum row count. Aligning an already aligned panel changes nothing.
inline AlignedPanel align_panel(ReturnMatrix target,
                                std::vector<ReturnMatrix> sources) {
  validate_return_matrix(target);
  for (const auto& s : sources) {
    validate_return_matrix(s);
    if (s.cols() != target.cols())
      throw std::invalid_argument("datasets disagree on asset dimension");
  }
  AlignedPanel panel;
  panel.n_tilde = target.rows();
  for (const auto& s : sources) panel.n_tilde = std::min(panel.n_tilde, s.rows());
  panel.dim = target.cols();
  panel.target = std::move(target);
  panel.sources = std::move(sources);
  return panel;
}

/// Restricts every dataset to rows strictly before shared panel time t,
/// preserving the alignment invariant. The truncated target must keep at
/// least two rows.
inline AlignedPanel truncate_before(const AlignedPanel& panel, Index t) {
  if (t < 2 || t > panel.n_tilde + 1)
    throw std::invalid_argument("truncation time outside shared window");

  auto cut = [&](const ReturnMatrix& rm) {
    const Index keep = (t - 1) + rm.rows() - panel.n_tilde;
    if (keep < 2)
      throw std::invalid_argument("truncation leaves fewer than two rows in '" +
                                  rm.label + "'");
    ReturnMatrix out;
    out.label = rm.label;
    out.values = rm.values.topRows(keep);
    if (!rm.timestamps.empty())
      out.timestamps.assign(rm.timestamps.begin(),
                            rm.timestamps.begin() + static_cast<std::ptrdiff_t>(keep));
    return out;
  };

  ReturnMatrix target = cut(panel.target);
  std::vector<ReturnMatrix> sources;
  sources.reserve(panel.sources.size());
  for (const auto& s : panel.sources) sources.push_back(cut(s));
  return align_panel(std::move(target), std::move(sources));
}

}  // namespace tlpo
