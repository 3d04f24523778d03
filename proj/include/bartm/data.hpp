#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bartm/matrix.hpp"

namespace bartm {

enum class ColumnKind { kNumeric, kNominal };

struct ColumnInfo {
  std::string name;
  ColumnKind kind = ColumnKind::kNumeric;
  // For nominal columns: level strings in code order (cell value = index).
  std::vector<std::string> levels;
};

// Tabular covariates with a first-class missingness mask. Cells flagged
// missing keep whatever placeholder the producer stored (NaN for CSV input,
// the latent value for simulated data); consumers must never read them.
class Dataset {
 public:
  Dataset() = default;
  Dataset(Matrix covariates, BoolGrid missing_mask, std::vector<double> response,
          std::vector<ColumnInfo> columns);

  int n_rows() const { return covariates.rows(); }
  int n_cols() const { return covariates.cols(); }

  bool is_missing(int i, int j) const { return missing_mask(i, j) != 0; }
  bool row_complete(int i) const;
  int column_index(const std::string& name) const;  // -1 if absent

  // Fraction of rows with at least one missing covariate entry.
  double row_missing_fraction() const;

  Dataset subset(const std::vector<int>& rows) const;
  std::vector<int> complete_case_rows() const;

  Matrix covariates;
  BoolGrid missing_mask;
  std::vector<double> response;
  std::vector<ColumnInfo> columns;
};

struct IngestOptions {
  std::string response_column;
  std::vector<std::string> missing_tokens = {"NA", ""};
};

struct IngestReport {
  int rows_dropped_missing_response = 0;
};

// RFC-4180 CSV with a header row. Columns where every non-missing cell
// parses as numeric stay numeric; any other column is nominal and gets
// integer level codes (levels sorted lexicographically for determinism).
// Rows with a missing response are dropped and counted in the report.
Dataset ingest_csv(const std::string& path, const IngestOptions& options,
                   IngestReport* report = nullptr);

// Affine map [y_min, y_max] -> [-0.5, 0.5]. A constant response is flagged
// degenerate and maps to all zeros (inverse returns the constant).
struct ResponseTransform {
  double y_min = 0.0;
  double y_max = 1.0;
  bool degenerate = false;

  double apply(double y) const {
    if (degenerate) return 0.0;
    return (y - y_min) / (y_max - y_min) - 0.5;
  }
  double invert(double s) const {
    if (degenerate) return y_min;
    return (s + 0.5) * (y_max - y_min) + y_min;
  }
};

std::pair<std::vector<double>, ResponseTransform> scale_response(
    const std::vector<double>& y);

// Base covariates plus one binary dummy column per base column that has at
// least one missing entry (appended in source-column order). The combined
// matrix is materialized so routing can treat dummies as ordinary columns;
// dummy columns are never missing.
class AugmentedDataset {
 public:
  explicit AugmentedDataset(Dataset base);

  const Dataset& base() const { return base_; }
  int n_rows() const { return base_.n_rows(); }
  int n_base_cols() const { return base_.n_cols(); }
  int n_cols() const { return n_base_cols() + n_dummies(); }
  int n_dummies() const { return static_cast<int>(dummy_map_.size()); }
  const std::vector<int>& dummy_map() const { return dummy_map_; }

  double value(int i, int j) const { return combined_(i, j); }
  bool is_missing(int i, int j) const { return combined_missing_(i, j) != 0; }

  std::span<const double> row_values(int i) const {
    return {combined_.row_ptr(i), static_cast<std::size_t>(combined_.cols())};
  }
  std::span<const std::uint8_t> row_missing(int i) const {
    return {combined_missing_.row_ptr(i), static_cast<std::size_t>(combined_missing_.cols())};
  }

  // Flattened export: combined matrix as a plain Dataset. Dummy columns are
  // missing-free by construction; base columns keep their mask.
  Dataset as_dataset() const;

 private:
  Dataset base_;
  Matrix combined_;            // n x (p + p_M)
  BoolGrid combined_missing_;  // dummies all zero
  std::vector<int> dummy_map_;
};

inline AugmentedDataset augment(Dataset base) { return AugmentedDataset(std::move(base)); }

// Training-time column layout needed to rebuild augmented rows at prediction
// time (dummy values for a new row come from the row's own mask).
struct ColumnSchema {
  std::vector<ColumnInfo> columns;
  std::vector<int> dummy_map;

  int n_base_cols() const { return static_cast<int>(columns.size()); }
  int n_aug_cols() const { return n_base_cols() + static_cast<int>(dummy_map.size()); }
};

}  // namespace bartm
