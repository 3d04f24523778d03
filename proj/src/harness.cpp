#include "bartm/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>

#include "bartm/parallel.hpp"
#include "bartm/posterior.hpp"
#include "bartm/rng.hpp"
#include "bartm/sampler.hpp"

#include "json.hpp"

namespace bartm {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Seed-stream tags; replicate seeds are seed_base + replicate index so the
// result of a (level, replicate) task never depends on scheduling.
enum : std::uint64_t {
  kStreamTrainSurface = 1,
  kStreamTrainMdm = 2,
  kStreamChain = 3,
  kStreamSplit = 4,
  kStreamTrainOffsets = 5,
  kStreamTestSurface = 6,
  kStreamTestMdm = 7,
  kStreamTestOffsets = 8,
};

std::vector<double> point_estimates(const std::vector<PredictionResult>& results) {
  std::vector<double> out(results.size());
  for (std::size_t i = 0; i < results.size(); ++i) out[i] = results[i].point;
  return out;
}

double fit_and_score(const Dataset& train, const Dataset& test,
                     const Hyperparams& hyper, std::uint64_t chain_seed) {
  const AugmentedDataset aug = augment(train);
  const PosteriorDraws draws = run_chain(aug, hyper, chain_seed);
  const auto preds =
      predict(draws, draws.transform, prediction_input_from(test), 0.95);
  return oos_rmse(point_estimates(preds), test.response);
}

Dataset apply_offsets(Dataset d, const std::vector<PatternMixtureSpec>& offsets,
                      std::uint64_t seed_stream_base, std::uint64_t task_seed) {
  for (std::size_t k = 0; k < offsets.size(); ++k)
    d = apply_pattern_mixture(d, offsets[k],
                              mix_seed(task_seed, seed_stream_base + 16 * (k + 1)));
  return d;
}

std::vector<int> resolved_levels(const ExperimentConfig& config,
                                 const Scenario& scenario) {
  std::vector<int> levels = config.levels;
  if (levels.empty()) {
    levels.resize(scenario.n_levels());
    std::iota(levels.begin(), levels.end(), 0);
  }
  for (int l : levels)
    require(l >= 0 && l < scenario.n_levels(),
            "ExperimentConfig: level " + std::to_string(l) + " out of range");
  return levels;
}

}  // namespace

void ExperimentConfig::validate() const {
  hyper.validate();
  require(replicates >= 1, "ExperimentConfig: replicates must be >= 1");
  require(train_fraction > 0.0 && train_fraction < 1.0,
          "ExperimentConfig: train_fraction must be in (0,1)");
  require(threads >= 1, "ExperimentConfig: threads must be >= 1");
  require(train_n >= 2 && test_n >= 1, "ExperimentConfig: train_n/test_n too small");
  for (const std::string& b : baselines)
    require(b == methods::kBartm || b == methods::kCompleteCase ||
                b == methods::kMeanImpute,
            "ExperimentConfig: unknown baseline '" + b + "'");
}

double oos_rmse(std::span<const double> predictions, std::span<const double> truths) {
  require(predictions.size() == truths.size() && !truths.empty(),
          "oos_rmse: length mismatch or empty input");
  double sse = 0.0;
  for (std::size_t i = 0; i < truths.size(); ++i) {
    const double e = predictions[i] - truths[i];
    sse += e * e;
  }
  return std::sqrt(sse / static_cast<double>(truths.size()));
}

std::pair<Dataset, Dataset> baseline_mean_impute(const Dataset& train,
                                                 const Dataset& test,
                                                 std::vector<std::string>* warnings) {
  require(train.n_cols() == test.n_cols(), "baseline_mean_impute: column mismatch");
  const int p = train.n_cols();
  std::vector<double> fill(p, 0.0);
  for (int j = 0; j < p; ++j) {
    if (train.columns[j].kind == ColumnKind::kNominal) {
      std::map<double, int> counts;
      for (int i = 0; i < train.n_rows(); ++i)
        if (!train.is_missing(i, j)) ++counts[train.covariates(i, j)];
      if (counts.empty()) {
        if (warnings != nullptr)
          warnings->push_back("column '" + train.columns[j].name +
                              "' fully missing in training; imputing 0");
        continue;
      }
      int best_count = 0;
      double best = 0.0;
      for (const auto& [value, count] : counts) {
        if (count > best_count) {  // ties resolve to the smallest code
          best_count = count;
          best = value;
        }
      }
      fill[j] = best;
    } else {
      double sum = 0.0;
      int n_obs = 0;
      for (int i = 0; i < train.n_rows(); ++i) {
        if (!train.is_missing(i, j)) {
          sum += train.covariates(i, j);
          ++n_obs;
        }
      }
      if (n_obs == 0) {
        if (warnings != nullptr)
          warnings->push_back("column '" + train.columns[j].name +
                              "' fully missing in training; imputing 0");
        continue;
      }
      fill[j] = sum / n_obs;
    }
  }

  auto imputed = [&](const Dataset& d) {
    Dataset out = d;
    for (int i = 0; i < d.n_rows(); ++i) {
      for (int j = 0; j < p; ++j) {
        if (d.is_missing(i, j)) {
          out.covariates(i, j) = fill[j];
          out.missing_mask(i, j) = 0;
        }
      }
    }
    return out;
  };
  return {imputed(train), imputed(test)};
}

ScenarioResult run_selection_study(const ExperimentConfig& config) {
  config.validate();
  const Scenario scenario = load_scenario(config.scenario);
  require(scenario.base == Scenario::Base::kGenerated,
          "run_selection_study: scenario must use a generated surface");
  const std::vector<int> levels = resolved_levels(config, scenario);

  const int n_tasks = static_cast<int>(levels.size()) * config.replicates;
  std::vector<std::vector<RawRecord>> per_task(n_tasks);

  parallel_for(n_tasks, config.threads, [&](int task) {
    const int level_pos = task / config.replicates;
    const int replicate = task % config.replicates;
    const int level = levels[level_pos];
    const std::vector<MdmSpec>& specs = scenario.levels[level];
    const std::uint64_t task_seed =
        config.seed_base + static_cast<std::uint64_t>(replicate);

    GeneratedModelSpec train_spec = scenario.surface;
    train_spec.n = config.train_n;
    train_spec.seed = mix_seed(task_seed, kStreamTrainSurface);
    GeneratedModelSpec test_spec = scenario.surface;
    test_spec.n = config.test_n;
    test_spec.seed = mix_seed(task_seed, kStreamTestSurface);

    const Dataset train_clean = generate_surface(train_spec);
    const Dataset test_clean = generate_surface(test_spec);
    Dataset train =
        inject_missingness(train_clean, specs, mix_seed(task_seed, kStreamTrainMdm));
    Dataset test_miss =
        inject_missingness(test_clean, specs, mix_seed(task_seed, kStreamTestMdm));
    train = apply_offsets(std::move(train), scenario.offsets, kStreamTrainOffsets,
                          task_seed);
    test_miss = apply_offsets(std::move(test_miss), scenario.offsets,
                              kStreamTestOffsets, task_seed);

    const std::uint64_t chain_seed = mix_seed(task_seed, kStreamChain);
    const double frac = train.row_missing_fraction();

    const double rmse_base =
        fit_and_score(train_clean, test_clean, config.hyper, chain_seed);

    auto record = [&](const char* method, const char* cell, double rmse) {
      per_task[task].push_back(
          {level, replicate, method, cell, rmse, rmse / rmse_base, frac});
    };
    per_task[task].push_back({level, replicate, methods::kFullData,
                              cells::kTestMdmOff, rmse_base, 1.0, frac});

    {
      const AugmentedDataset aug = augment(train);
      const PosteriorDraws draws = run_chain(aug, config.hyper, chain_seed);
      const auto on_miss =
          predict(draws, draws.transform, prediction_input_from(test_miss), 0.95);
      const auto on_off =
          predict(draws, draws.transform, prediction_input_from(test_clean), 0.95);
      record(methods::kBartmAll, cells::kTestMissing,
             oos_rmse(point_estimates(on_miss), test_miss.response));
      record(methods::kBartmAll, cells::kTestMdmOff,
             oos_rmse(point_estimates(on_off), test_clean.response));
    }

    const std::vector<int> cc_rows = train.complete_case_rows();
    if (cc_rows.size() >= 2) {
      const AugmentedDataset aug = augment(train.subset(cc_rows));
      const PosteriorDraws draws = run_chain(aug, config.hyper, chain_seed);
      const auto on_miss =
          predict(draws, draws.transform, prediction_input_from(test_miss), 0.95);
      const auto on_off =
          predict(draws, draws.transform, prediction_input_from(test_clean), 0.95);
      record(methods::kBartmCompleteCase, cells::kTestMissing,
             oos_rmse(point_estimates(on_miss), test_miss.response));
      record(methods::kBartmCompleteCase, cells::kTestMdmOff,
             oos_rmse(point_estimates(on_off), test_clean.response));
    } else {
      record(methods::kBartmCompleteCase, cells::kTestMissing, kNaN);
      record(methods::kBartmCompleteCase, cells::kTestMdmOff, kNaN);
    }
  });

  ScenarioResult result;
  result.scenario = scenario.name;
  for (const auto& records : per_task)
    result.raw.insert(result.raw.end(), records.begin(), records.end());
  result.aggregates = aggregate(result.raw);
  return result;
}

ScenarioResult run_bhd_study(const ExperimentConfig& config) {
  config.validate();
  const Scenario scenario = load_scenario(config.scenario);
  require(scenario.base == Scenario::Base::kBhd,
          "run_bhd_study: scenario is not a BHD scenario");
  require(!config.bhd_csv.empty(),
          "run_bhd_study: supply the Boston Housing CSV path "
          "(see scripts/fetch_boston.py)");

  IngestOptions opts;
  opts.response_column = config.response_column;
  const Dataset bhd = ingest_csv(config.bhd_csv, opts);

  // Fail early with the full expected-column list if the CSV is off-schema.
  for (const auto& level : scenario.levels) {
    for (const MdmSpec& spec : level) {
      std::vector<std::string> needed = {spec.target};
      for (const ProbitTerm& t : spec.terms) needed.push_back(t.column);
      if (!spec.trigger_column.empty()) needed.push_back(spec.trigger_column);
      for (const std::string& name : needed) {
        if (bhd.column_index(name) < 0) {
          std::string have;
          for (const auto& c : bhd.columns) have += c.name + " ";
          fail("run_bhd_study: scenario needs column '" + name +
               "' but the CSV has: " + have);
        }
      }
    }
  }

  const std::vector<int> levels = resolved_levels(config, scenario);
  const int n_tasks = static_cast<int>(levels.size()) * config.replicates;
  std::vector<std::vector<RawRecord>> per_task(n_tasks);

  parallel_for(n_tasks, config.threads, [&](int task) {
    const int level_pos = task / config.replicates;
    const int replicate = task % config.replicates;
    const int level = levels[level_pos];
    const std::vector<MdmSpec>& specs = scenario.levels[level];
    const std::uint64_t task_seed =
        config.seed_base + static_cast<std::uint64_t>(replicate);

    Dataset with_missing =
        inject_missingness(bhd, specs, mix_seed(task_seed, kStreamTrainMdm));
    with_missing = apply_offsets(std::move(with_missing), scenario.offsets,
                                 kStreamTrainOffsets, task_seed);

    // Deterministic shuffle, then index-sorted partitions.
    const int n = bhd.n_rows();
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    Rng split_rng(mix_seed(task_seed, kStreamSplit));
    for (int i = n - 1; i > 0; --i)
      std::swap(perm[i], perm[split_rng.uniform_int(i + 1)]);
    const int n_train =
        std::clamp(static_cast<int>(std::lround(config.train_fraction * n)), 2, n - 1);
    std::vector<int> train_idx(perm.begin(), perm.begin() + n_train);
    std::vector<int> test_idx(perm.begin() + n_train, perm.end());
    std::sort(train_idx.begin(), train_idx.end());
    std::sort(test_idx.begin(), test_idx.end());

    const Dataset train = with_missing.subset(train_idx);
    const Dataset test = with_missing.subset(test_idx);
    const Dataset train_clean = bhd.subset(train_idx);
    const Dataset test_clean = bhd.subset(test_idx);

    const std::uint64_t chain_seed = mix_seed(task_seed, kStreamChain);
    const double frac = train.row_missing_fraction();

    const double rmse_base =
        fit_and_score(train_clean, test_clean, config.hyper, chain_seed);
    per_task[task].push_back({level, replicate, methods::kFullData,
                              cells::kTestMdmOff, rmse_base, 1.0, frac});

    auto enabled = [&](const char* m) {
      return std::find(config.baselines.begin(), config.baselines.end(), m) !=
             config.baselines.end();
    };
    auto record = [&](const char* method, double rmse) {
      per_task[task].push_back({level, replicate, method, cells::kTestMissing,
                                rmse, rmse / rmse_base, frac});
    };

    if (enabled(methods::kBartm))
      record(methods::kBartm, fit_and_score(train, test, config.hyper, chain_seed));

    if (enabled(methods::kMeanImpute)) {
      auto [train_imp, test_imp] = baseline_mean_impute(train, test);
      record(methods::kMeanImpute,
             fit_and_score(train_imp, test_imp, config.hyper, chain_seed));
    }

    if (enabled(methods::kCompleteCase)) {
      const std::vector<int> cc_rows = train.complete_case_rows();
      if (cc_rows.size() >= 2) {
        record(methods::kCompleteCase,
               fit_and_score(train.subset(cc_rows), test, config.hyper, chain_seed));
      } else {
        record(methods::kCompleteCase, kNaN);
      }
    }
  });

  ScenarioResult result;
  result.scenario = scenario.name;
  for (const auto& records : per_task)
    result.raw.insert(result.raw.end(), records.begin(), records.end());
  result.aggregates = aggregate(result.raw);
  return result;
}

std::vector<AggregateRecord> aggregate(const std::vector<RawRecord>& raw) {
  struct Key {
    int level;
    std::string method;
    std::string cell;
    bool operator<(const Key& o) const {
      if (level != o.level) return level < o.level;
      if (method != o.method) return method < o.method;
      return cell < o.cell;
    }
  };
  std::map<Key, std::vector<const RawRecord*>> groups;
  for (const RawRecord& r : raw) groups[{r.level, r.method, r.cell}].push_back(&r);

  std::vector<AggregateRecord> out;
  for (const auto& [key, records] : groups) {
    AggregateRecord agg;
    agg.level = key.level;
    agg.method = key.method;
    agg.cell = key.cell;
    std::vector<double> rmse, rel;
    double frac_sum = 0.0;
    for (const RawRecord* r : records) {
      frac_sum += r->train_row_missing;
      if (std::isnan(r->oos_rmse)) continue;
      rmse.push_back(r->oos_rmse);
      rel.push_back(r->relative);
    }
    agg.n = static_cast<int>(rmse.size());
    agg.mean_train_row_missing = frac_sum / static_cast<double>(records.size());
    auto mean_se = [](const std::vector<double>& v, double* mean, double* se) {
      if (v.empty()) {
        *mean = kNaN;
        *se = kNaN;
        return;
      }
      *mean = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
      if (v.size() < 2) {
        *se = 0.0;
        return;
      }
      double ssd = 0.0;
      for (double x : v) ssd += (x - *mean) * (x - *mean);
      *se = std::sqrt(ssd / (v.size() - 1)) / std::sqrt(static_cast<double>(v.size()));
    };
    mean_se(rmse, &agg.mean_rmse, &agg.se_rmse);
    mean_se(rel, &agg.mean_relative, &agg.se_relative);
    out.push_back(std::move(agg));
  }
  return out;
}

const AggregateRecord* find_aggregate(const ScenarioResult& result, int level,
                                      const std::string& method,
                                      const std::string& cell) {
  for (const AggregateRecord& a : result.aggregates)
    if (a.level == level && a.method == method && a.cell == cell) return &a;
  return nullptr;
}

namespace {

std::string format_double(double v) {
  if (std::isnan(v)) return "NA";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void write_raw_csv(const ScenarioResult& result, std::ostream& out) {
  out << "scenario,level,replicate,method,cell,oos_rmse,relative,"
         "train_row_missing_frac\n";
  for (const RawRecord& r : result.raw) {
    out << result.scenario << ',' << r.level << ',' << r.replicate << ','
        << r.method << ',' << r.cell << ',' << format_double(r.oos_rmse) << ','
        << format_double(r.relative) << ',' << format_double(r.train_row_missing)
        << '\n';
  }
}

void write_summary_json(const ScenarioResult& result, std::ostream& out) {
  nlohmann::json agg = nlohmann::json::array();
  for (const AggregateRecord& a : result.aggregates) {
    nlohmann::json j = {{"level", a.level},
                        {"method", a.method},
                        {"cell", a.cell},
                        {"n", a.n},
                        {"mean_train_row_missing", a.mean_train_row_missing}};
    if (a.n > 0) {
      j["mean_oos_rmse"] = a.mean_rmse;
      j["se_oos_rmse"] = a.se_rmse;
      j["mean_relative"] = a.mean_relative;
      j["se_relative"] = a.se_relative;
    }
    agg.push_back(std::move(j));
  }
  const nlohmann::json summary = {{"scenario", result.scenario},
                                  {"aggregates", std::move(agg)}};
  out << summary.dump(2) << '\n';
}

std::vector<std::string> check_selection_orderings(const ScenarioResult& result) {
  std::vector<std::string> failures;
  const bool nmar = result.scenario.find("nmar") != std::string::npos;
  std::vector<int> levels;
  for (const AggregateRecord& a : result.aggregates)
    if (levels.empty() || levels.back() != a.level) levels.push_back(a.level);

  for (int level : levels) {
    const auto* all_miss =
        find_aggregate(result, level, methods::kBartmAll, cells::kTestMissing);
    const auto* all_off =
        find_aggregate(result, level, methods::kBartmAll, cells::kTestMdmOff);
    const auto* cc_miss = find_aggregate(result, level, methods::kBartmCompleteCase,
                                         cells::kTestMissing);
    if (all_miss == nullptr || all_off == nullptr || cc_miss == nullptr) continue;
    if (all_miss->n == 0 || cc_miss->n == 0) continue;
    // Missingness only at this level?
    const bool active = all_miss->mean_train_row_missing > 0.02;
    if (active && !(all_miss->mean_rmse <= cc_miss->mean_rmse))
      failures.push_back("level " + std::to_string(level) +
                         ": all-cases training did not beat complete-case "
                         "training on the missing test set");
    if (!nmar && active && !(all_off->mean_rmse <= all_miss->mean_rmse))
      failures.push_back("level " + std::to_string(level) +
                         ": MDM-off test did not beat missing test (monotone "
                         "information)");
  }
  return failures;
}

std::vector<std::string> check_bhd_orderings(const ScenarioResult& result) {
  std::vector<std::string> failures;
  int top_level = -1;
  for (const AggregateRecord& a : result.aggregates) top_level = std::max(top_level, a.level);
  if (top_level < 0) return failures;

  const auto* bartm =
      find_aggregate(result, top_level, methods::kBartm, cells::kTestMissing);
  const auto* imputed =
      find_aggregate(result, top_level, methods::kMeanImpute, cells::kTestMissing);
  if (bartm == nullptr || imputed == nullptr || bartm->n == 0 || imputed->n == 0)
    return failures;

  const bool pattern = result.scenario.find("pattern") != std::string::npos;
  const bool mcar = result.scenario.find("mcar") != std::string::npos;
  if (pattern && !(bartm->mean_rmse < imputed->mean_rmse))
    failures.push_back("pattern mixture: BARTm did not beat mean-impute at the "
                       "top level");
  if (mcar && !(imputed->mean_rmse <= 1.1 * bartm->mean_rmse))
    failures.push_back("MCAR: mean-impute fell more than 10% behind BARTm at "
                       "the top level");
  return failures;
}

}  // namespace bartm
