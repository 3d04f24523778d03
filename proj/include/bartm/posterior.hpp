#pragma once

#include <vector>

#include "bartm/data.hpp"
#include "bartm/sampler.hpp"

namespace bartm {

struct PredictionResult {
  double point = 0.0;     // original response units
  double ci_lower = 0.0;  // empirical quantiles of per_draw
  double ci_upper = 0.0;
  std::vector<double> per_draw;  // one summed-tree output per posterior draw
};

// New covariate rows in base-column space; dummy columns are derived from
// each row's own mask at prediction time.
struct PredictionInput {
  Matrix x;
  BoolGrid missing;
};

PredictionInput prediction_input_from(const Dataset& d);

// Type-7 empirical quantile (linear interpolation between order statistics)
// of an unsorted sample.
double empirical_quantile(std::vector<double> sample, double p);

// Drops each row down every tree of every draw, sums leaf values, and
// inverse-transforms. Point estimate is the posterior mean (median with
// `use_median`); the credible interval holds `level` posterior mass.
std::vector<PredictionResult> predict(const PosteriorDraws& draws,
                                      const ResponseTransform& transform,
                                      const PredictionInput& rows, double level,
                                      bool use_median = false);

// Width ratio masked/observed for row pairs that differ only in their masks.
std::vector<double> ci_width_ratios(const std::vector<PredictionResult>& masked,
                                    const std::vector<PredictionResult>& observed);

}  // namespace bartm
