#include "bartm/posterior.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace bartm {

PredictionInput prediction_input_from(const Dataset& d) {
  return {d.covariates, d.missing_mask};
}

double empirical_quantile(std::vector<double> sample, double p) {
  require(!sample.empty(), "empirical_quantile: empty sample");
  require(p >= 0.0 && p <= 1.0, "empirical_quantile: p outside [0,1]");
  std::sort(sample.begin(), sample.end());
  const double h = p * (sample.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sample.size()) return sample.back();
  const double w = h - static_cast<double>(lo);
  return sample[lo] * (1.0 - w) + sample[lo + 1] * w;
}

std::vector<PredictionResult> predict(const PosteriorDraws& draws,
                                      const ResponseTransform& transform,
                                      const PredictionInput& rows, double level,
                                      bool use_median) {
  require(level > 0.0 && level < 1.0, "predict: level must be in (0,1)");
  require(!draws.draws.empty(), "predict: no posterior draws");
  const int p = draws.schema.n_base_cols();
  require(rows.x.cols() == p,
          "predict: rows have " + std::to_string(rows.x.cols()) +
              " columns, model expects " + std::to_string(p));
  require(rows.missing.rows() == rows.x.rows() && rows.missing.cols() == p,
          "predict: mask shape mismatch");

  const int n_aug = draws.schema.n_aug_cols();
  const int n_rows = rows.x.rows();
  const int n_draws = static_cast<int>(draws.draws.size());

  std::vector<PredictionResult> results(n_rows);
  std::vector<double> values(n_aug);
  std::vector<std::uint8_t> missing(n_aug);
  for (int i = 0; i < n_rows; ++i) {
    for (int j = 0; j < p; ++j) {
      values[j] = rows.x(i, j);
      missing[j] = rows.missing(i, j);
    }
    for (std::size_t k = 0; k < draws.schema.dummy_map.size(); ++k) {
      values[p + k] = rows.missing(i, draws.schema.dummy_map[k]) ? 1.0 : 0.0;
      missing[p + k] = 0;
    }
    const RowView row{values, missing};

    PredictionResult& res = results[i];
    res.per_draw.resize(n_draws);
    for (int d = 0; d < n_draws; ++d) {
      double sum = 0.0;
      for (const Tree& tree : draws.draws[d].trees) sum += tree.predict(row);
      res.per_draw[d] = transform.invert(sum);
    }
    res.point = use_median
                    ? empirical_quantile(res.per_draw, 0.5)
                    : std::accumulate(res.per_draw.begin(), res.per_draw.end(), 0.0) /
                          n_draws;
    res.ci_lower = empirical_quantile(res.per_draw, (1.0 - level) / 2.0);
    res.ci_upper = empirical_quantile(res.per_draw, (1.0 + level) / 2.0);
  }
  return results;
}

std::vector<double> ci_width_ratios(const std::vector<PredictionResult>& masked,
                                    const std::vector<PredictionResult>& observed) {
  require(masked.size() == observed.size(), "ci_width_ratios: size mismatch");
  std::vector<double> ratios(masked.size());
  for (std::size_t i = 0; i < masked.size(); ++i) {
    const double w_obs = observed[i].ci_upper - observed[i].ci_lower;
    const double w_mask = masked[i].ci_upper - masked[i].ci_lower;
    ratios[i] = w_obs > 0.0 ? w_mask / w_obs
                            : std::numeric_limits<double>::quiet_NaN();
  }
  return ratios;
}

}  // namespace bartm
