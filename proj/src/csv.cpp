#include <charconv>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "pfcred/design.hpp"

namespace pfcred {

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  return std::string(s.substr(b, e - b));
}

// Splits one record; double quotes may wrap a field and "" escapes a quote.
std::vector<std::string> split_record(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(trim(field));
      field.clear();
    } else {
      field.push_back(c);
    }
  }
  fields.push_back(trim(field));
  return fields;
}

bool parse_double(const std::string& cell, double& out) {
  if (cell.empty()) return false;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

std::string location(std::size_t row, const std::string& column) {
  return "row " + std::to_string(row) + ", column '" + column + "'";
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> records;
  std::vector<std::size_t> row_numbers;

  std::size_t column(const std::string& name, const std::string& path) const {
    for (std::size_t j = 0; j < header.size(); ++j) {
      if (header[j] == name) return j;
    }
    throw Error(ErrorKind::SchemaError, "column '" + name + "' not found in '" + path + "'");
  }
};

Table read_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::InvalidInput, "cannot open '" + path + "'");
  Table t;
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::SchemaError, "'" + path + "' is empty");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  t.header = split_record(line);
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    auto fields = split_record(line);
    if (fields.size() != t.header.size()) {
      throw Error(ErrorKind::ParseError, "row " + std::to_string(row) + " has " +
                                             std::to_string(fields.size()) + " fields, expected " +
                                             std::to_string(t.header.size()));
    }
    t.records.push_back(std::move(fields));
    t.row_numbers.push_back(row);
  }
  return t;
}

Matrix numeric_block(const Table& t, const std::vector<std::size_t>& cols) {
  const auto n = static_cast<Eigen::Index>(t.records.size());
  Matrix X(n, static_cast<Eigen::Index>(cols.size()));
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& fields = t.records[static_cast<std::size_t>(i)];
    for (std::size_t k = 0; k < cols.size(); ++k) {
      const std::string& cell = fields[cols[k]];
      double v = 0.0;
      if (!parse_double(cell, v) || !std::isfinite(v)) {
        throw Error(ErrorKind::ParseError, "unparseable value '" + cell + "' at " +
                                               location(t.row_numbers[static_cast<std::size_t>(i)],
                                                        t.header[cols[k]]));
      }
      X(i, static_cast<Eigen::Index>(k)) = v;
    }
  }
  return X;
}

}  // namespace

Matrix load_predictors_csv(const std::string& path, const std::vector<std::string>& columns) {
  const Table t = read_table(path);
  std::vector<std::size_t> cols;
  for (const auto& name : columns) cols.push_back(t.column(name, path));
  if (cols.empty()) throw Error(ErrorKind::SchemaError, "no predictor columns selected");
  return numeric_block(t, cols);
}

Dataset load_csv(const std::string& path, const std::string& response_column,
                 const std::vector<std::string>& predictor_columns, bool categorical_response) {
  const Table t = read_table(path);
  const std::size_t y_col = t.column(response_column, path);
  std::vector<std::size_t> x_cols;
  std::vector<std::string> names;
  if (predictor_columns.empty()) {
    for (std::size_t j = 0; j < t.header.size(); ++j) {
      if (j == y_col) continue;
      x_cols.push_back(j);
      names.push_back(t.header[j]);
    }
  } else {
    for (const auto& name : predictor_columns) {
      x_cols.push_back(t.column(name, path));
      names.push_back(name);
    }
  }
  if (x_cols.empty()) throw Error(ErrorKind::SchemaError, "no predictor columns selected");

  Matrix X = numeric_block(t, x_cols);
  const Eigen::Index n = X.rows();
  std::vector<std::string> y_cells;
  for (const auto& fields : t.records) y_cells.push_back(fields[y_col]);
  const auto& row_numbers = t.row_numbers;

  Response y;
  bool numeric = !categorical_response;
  Vector yv(n);
  for (Eigen::Index i = 0; numeric && i < n; ++i) {
    const std::string& cell = y_cells[static_cast<std::size_t>(i)];
    if (!parse_double(cell, yv(i))) {
      numeric = false;
    } else if (!std::isfinite(yv(i))) {
      throw Error(ErrorKind::ParseError, "non-finite response '" + cell + "' at " +
                                             location(row_numbers[static_cast<std::size_t>(i)], response_column));
    }
  }
  if (numeric) {
    y = Response::continuous(std::move(yv));
  } else {
    for (Eigen::Index i = 0; i < n; ++i) {
      if (y_cells[static_cast<std::size_t>(i)].empty()) {
        throw Error(ErrorKind::ParseError,
                    "empty response at " + location(row_numbers[static_cast<std::size_t>(i)], response_column));
      }
    }
    y = Response::categorical(std::move(y_cells));
  }

  Dataset data = make_dataset(std::move(X), std::move(y));
  data.predictor_names = std::move(names);
  data.response_name = response_column;
  return data;
}

}  // namespace pfcred
