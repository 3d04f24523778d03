#include "bartm/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace bartm {

namespace {

constexpr double kMissingPlaceholder = std::numeric_limits<double>::quiet_NaN();

// RFC-4180: quoted fields may contain commas, newlines and doubled quotes.
// Returns one record per call; false at end of input.
bool read_record(std::istream& in, std::vector<std::string>& fields) {
  fields.clear();
  std::string field;
  bool in_quotes = false;
  bool saw_any = false;
  int c;
  while ((c = in.get()) != EOF) {
    saw_any = true;
    if (in_quotes) {
      if (c == '"') {
        if (in.peek() == '"') {
          field.push_back('"');
          in.get();
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(static_cast<char>(c));
      }
    } else if (c == '"') {
      in_quotes = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (c == '\r') {
      if (in.peek() == '\n') in.get();
      fields.push_back(std::move(field));
      return true;
    } else if (c == '\n') {
      fields.push_back(std::move(field));
      return true;
    } else {
      field.push_back(static_cast<char>(c));
    }
  }
  if (in_quotes) fail("CSV: unterminated quoted field at end of file");
  if (!saw_any) return false;
  fields.push_back(std::move(field));
  return true;
}

bool parse_number(const std::string& s, double* out) {
  if (s.empty()) return false;
  const char* begin = s.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end != begin + s.size()) return false;
  *out = v;
  return true;
}

}  // namespace

Dataset::Dataset(Matrix covariates_in, BoolGrid missing_mask_in,
                 std::vector<double> response_in, std::vector<ColumnInfo> columns_in)
    : covariates(std::move(covariates_in)),
      missing_mask(std::move(missing_mask_in)),
      response(std::move(response_in)),
      columns(std::move(columns_in)) {
  require(covariates.rows() >= 1 && covariates.cols() >= 1,
          "Dataset: need at least one row and one column");
  require(missing_mask.rows() == covariates.rows() &&
              missing_mask.cols() == covariates.cols(),
          "Dataset: mask shape mismatch");
  require(static_cast<int>(response.size()) == covariates.rows(),
          "Dataset: response length mismatch");
  require(static_cast<int>(columns.size()) == covariates.cols(),
          "Dataset: column metadata mismatch");
  for (double y : response)
    require(std::isfinite(y), "Dataset: response contains non-finite values");
}

bool Dataset::row_complete(int i) const {
  for (int j = 0; j < n_cols(); ++j)
    if (is_missing(i, j)) return false;
  return true;
}

int Dataset::column_index(const std::string& name) const {
  for (int j = 0; j < n_cols(); ++j)
    if (columns[j].name == name) return j;
  return -1;
}

double Dataset::row_missing_fraction() const {
  int count = 0;
  for (int i = 0; i < n_rows(); ++i)
    if (!row_complete(i)) ++count;
  return static_cast<double>(count) / n_rows();
}

Dataset Dataset::subset(const std::vector<int>& rows) const {
  require(!rows.empty(), "Dataset::subset: empty row selection");
  Matrix x(static_cast<int>(rows.size()), n_cols());
  BoolGrid mask(static_cast<int>(rows.size()), n_cols());
  std::vector<double> y(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const int i = rows[k];
    require(i >= 0 && i < n_rows(), "Dataset::subset: row index out of range");
    for (int j = 0; j < n_cols(); ++j) {
      x(static_cast<int>(k), j) = covariates(i, j);
      mask(static_cast<int>(k), j) = missing_mask(i, j);
    }
    y[k] = response[i];
  }
  return Dataset(std::move(x), std::move(mask), std::move(y), columns);
}

std::vector<int> Dataset::complete_case_rows() const {
  std::vector<int> rows;
  for (int i = 0; i < n_rows(); ++i)
    if (row_complete(i)) rows.push_back(i);
  return rows;
}

Dataset ingest_csv(const std::string& path, const IngestOptions& options,
                   IngestReport* report) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "ingest_csv: cannot open '" + path + "'");

  std::vector<std::string> header;
  require(read_record(in, header) && !header.empty(), "ingest_csv: empty file");

  const int n_fields = static_cast<int>(header.size());
  int response_idx = -1;
  for (int j = 0; j < n_fields; ++j)
    if (header[j] == options.response_column) response_idx = j;
  require(response_idx >= 0,
          "ingest_csv: response column '" + options.response_column + "' not found");
  require(n_fields >= 2, "ingest_csv: need at least one covariate column");

  auto is_missing_token = [&](const std::string& s) {
    return std::find(options.missing_tokens.begin(), options.missing_tokens.end(), s) !=
           options.missing_tokens.end();
  };

  // Pass 1: read all records into memory (desk-scale files).
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> fields;
  int line = 1;
  int dropped = 0;
  while (read_record(in, fields)) {
    ++line;
    if (fields.size() == 1 && fields[0].empty()) continue;  // trailing blank line
    require(static_cast<int>(fields.size()) == n_fields,
            "ingest_csv: row " + std::to_string(line) + " has " +
                std::to_string(fields.size()) + " fields, expected " +
                std::to_string(n_fields));
    if (is_missing_token(fields[response_idx])) {
      ++dropped;
      continue;
    }
    records.push_back(fields);
  }
  if (report != nullptr) report->rows_dropped_missing_response = dropped;
  require(!records.empty(), "ingest_csv: no usable rows in '" + path + "'");

  const int n = static_cast<int>(records.size());
  const int p = n_fields - 1;

  std::vector<int> covariate_field(p);
  {
    int k = 0;
    for (int j = 0; j < n_fields; ++j)
      if (j != response_idx) covariate_field[k++] = j;
  }

  // Pass 2: decide per-column kind. A column is numeric iff every
  // non-missing cell parses as a number.
  std::vector<ColumnInfo> columns(p);
  std::vector<bool> numeric(p, true);
  for (int k = 0; k < p; ++k) {
    columns[k].name = header[covariate_field[k]];
    for (int i = 0; i < n && numeric[k]; ++i) {
      const std::string& cell = records[i][covariate_field[k]];
      double v;
      if (!is_missing_token(cell) && !parse_number(cell, &v)) numeric[k] = false;
    }
    if (!numeric[k]) {
      columns[k].kind = ColumnKind::kNominal;
      std::map<std::string, int> seen;
      for (int i = 0; i < n; ++i) {
        const std::string& cell = records[i][covariate_field[k]];
        if (!is_missing_token(cell)) seen.emplace(cell, 0);
      }
      for (auto& [level, code] : seen) {
        code = static_cast<int>(columns[k].levels.size());
        columns[k].levels.push_back(level);
      }
    }
  }

  Matrix x(n, p, kMissingPlaceholder);
  BoolGrid mask(n, p, 0);
  std::vector<double> y(n);
  for (int i = 0; i < n; ++i) {
    {
      const std::string& cell = records[i][response_idx];
      double v;
      require(parse_number(cell, &v), "ingest_csv: unparseable response '" + cell +
                                          "' at row " + std::to_string(i + 2));
      y[i] = v;
    }
    for (int k = 0; k < p; ++k) {
      const std::string& cell = records[i][covariate_field[k]];
      if (is_missing_token(cell)) {
        mask(i, k) = 1;
        continue;
      }
      if (numeric[k]) {
        double v;
        require(parse_number(cell, &v),
                "ingest_csv: unparseable cell '" + cell + "' at row " +
                    std::to_string(i + 2) + ", column '" + columns[k].name + "'");
        x(i, k) = v;
      } else {
        const auto& levels = columns[k].levels;
        const auto it = std::lower_bound(levels.begin(), levels.end(), cell);
        require(it != levels.end() && *it == cell,
                "ingest_csv: unknown level '" + cell + "' in column '" +
                    columns[k].name + "'");
        x(i, k) = static_cast<double>(it - levels.begin());
      }
    }
  }
  return Dataset(std::move(x), std::move(mask), std::move(y), std::move(columns));
}

std::pair<std::vector<double>, ResponseTransform> scale_response(
    const std::vector<double>& y) {
  require(!y.empty(), "scale_response: empty response");
  const auto [lo, hi] = std::minmax_element(y.begin(), y.end());
  ResponseTransform t;
  t.y_min = *lo;
  t.y_max = *hi;
  t.degenerate = (*lo == *hi);
  std::vector<double> scaled(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) scaled[i] = t.apply(y[i]);
  return {std::move(scaled), t};
}

AugmentedDataset::AugmentedDataset(Dataset base) : base_(std::move(base)) {
  const int n = base_.n_rows();
  const int p = base_.n_cols();
  for (int j = 0; j < p; ++j) {
    bool any = false;
    for (int i = 0; i < n && !any; ++i) any = base_.is_missing(i, j);
    if (any) dummy_map_.push_back(j);
  }
  const int pm = static_cast<int>(dummy_map_.size());
  combined_ = Matrix(n, p + pm, 0.0);
  combined_missing_ = BoolGrid(n, p + pm, 0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) {
      combined_(i, j) = base_.covariates(i, j);
      combined_missing_(i, j) = base_.missing_mask(i, j);
    }
    for (int k = 0; k < pm; ++k)
      combined_(i, p + k) = base_.is_missing(i, dummy_map_[k]) ? 1.0 : 0.0;
  }
}

Dataset AugmentedDataset::as_dataset() const {
  std::vector<ColumnInfo> columns = base_.columns;
  for (int k = 0; k < n_dummies(); ++k) {
    ColumnInfo info;
    info.name = "missing_" + base_.columns[dummy_map_[k]].name;
    columns.push_back(info);
  }
  return Dataset(combined_, combined_missing_, base_.response, std::move(columns));
}

}  // namespace bartm
