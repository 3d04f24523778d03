#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "bartm/data.hpp"
#include "bartm/mdm.hpp"
#include "bartm/model.hpp"

namespace bartm {

struct ExperimentConfig {
  std::string scenario;      // preset name or JSON path
  std::vector<int> levels;   // empty: every level in the scenario
  int replicates = 50;
  double train_fraction = 0.8;
  std::vector<std::string> baselines = {"bartm", "complete_case", "mean_impute"};
  Hyperparams hyper;
  std::uint64_t seed_base = 20140601;
  int threads = 1;
  int train_n = 250;  // generated-surface studies
  int test_n = 250;
  std::string bhd_csv;  // user-supplied; see scripts/fetch_boston.py
  std::string response_column = "medv";

  void validate() const;
};

struct RawRecord {
  int level = 0;
  int replicate = 0;
  std::string method;
  std::string cell;
  double oos_rmse = 0.0;  // NaN marks an unavailable cell
  double relative = 0.0;  // vs the replicate's no-missingness fit
  double train_row_missing = 0.0;
};

struct AggregateRecord {
  int level = 0;
  std::string method;
  std::string cell;
  int n = 0;  // available replicates
  double mean_rmse = 0.0;
  double se_rmse = 0.0;
  double mean_relative = 0.0;
  double se_relative = 0.0;
  double mean_train_row_missing = 0.0;
};

struct ScenarioResult {
  std::string scenario;
  std::vector<RawRecord> raw;
  std::vector<AggregateRecord> aggregates;
};

// Named methods and cells used in RawRecord.
namespace cells {
inline constexpr const char* kTestMissing = "test_missing";
inline constexpr const char* kTestMdmOff = "test_mdm_off";
}  // namespace cells
namespace methods {
inline constexpr const char* kBartmAll = "bartm_all_cases";
inline constexpr const char* kBartmCompleteCase = "bartm_complete_case";
inline constexpr const char* kBartm = "bartm";
inline constexpr const char* kCompleteCase = "complete_case";
inline constexpr const char* kMeanImpute = "mean_impute";
inline constexpr const char* kFullData = "full_data";
}  // namespace methods

double oos_rmse(std::span<const double> predictions, std::span<const double> truths);

// Missing cells replaced by the training column's observed mean (modal level
// for nominal columns); test imputation reuses the training statistics and
// both masks come back cleared. A column with no observed training values is
// imputed as 0 and noted in `warnings`.
std::pair<Dataset, Dataset> baseline_mean_impute(
    const Dataset& train, const Dataset& test,
    std::vector<std::string>* warnings = nullptr);

// Four-cell generated-data study: {all-cases train, complete-case train} x
// {missing test, MDM-off test}, each relative to the replicate's fit with
// the mechanism disabled everywhere.
ScenarioResult run_selection_study(const ExperimentConfig& config);

// Boston Housing study: inject the scenario, split train/test, fit BARTm and
// the enabled baselines, report oosRMSE relative to the full-data fit.
ScenarioResult run_bhd_study(const ExperimentConfig& config);

std::vector<AggregateRecord> aggregate(const std::vector<RawRecord>& raw);

const AggregateRecord* find_aggregate(const ScenarioResult& result, int level,
                                      const std::string& method,
                                      const std::string& cell);

void write_raw_csv(const ScenarioResult& result, std::ostream& out);
void write_summary_json(const ScenarioResult& result, std::ostream& out);

// Directional assertions behind the CLI's --check flag; returns
// human-readable failure descriptions (empty = all good).
std::vector<std::string> check_selection_orderings(const ScenarioResult& result);
std::vector<std::string> check_bhd_orderings(const ScenarioResult& result);

}  // namespace bartm
