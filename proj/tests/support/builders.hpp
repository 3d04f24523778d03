#pragma once

// Small dataset factories shared across test binaries.

#include <string>
#include <vector>

#include "bartm/data.hpp"
#include "bartm/rng.hpp"

namespace testsupport {

inline bartm::Dataset make_dataset(const std::vector<std::vector<double>>& x,
                                   const std::vector<std::vector<int>>& missing,
                                   const std::vector<double>& y) {
  const int n = static_cast<int>(x.size());
  const int p = static_cast<int>(x[0].size());
  bartm::Matrix mat(n, p);
  bartm::BoolGrid mask(n, p, 0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < p; ++j) {
      mat(i, j) = x[i][j];
      if (!missing.empty()) mask(i, j) = missing[i][j] ? 1 : 0;
    }
  std::vector<bartm::ColumnInfo> cols(p);
  for (int j = 0; j < p; ++j) cols[j].name = "x" + std::to_string(j + 1);
  return bartm::Dataset(std::move(mat), std::move(mask), y, std::move(cols));
}

// n rows, p columns of uniform noise with i.i.d. missingness.
inline bartm::Dataset random_dataset(int n, int p, double missing_rate,
                                     std::uint64_t seed) {
  bartm::Rng rng(seed);
  bartm::Matrix mat(n, p);
  bartm::BoolGrid mask(n, p, 0);
  std::vector<double> y(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) {
      mat(i, j) = rng.uniform(-2.0, 2.0);
      mask(i, j) = rng.bernoulli(missing_rate) ? 1 : 0;
    }
    y[i] = rng.normal();
  }
  std::vector<bartm::ColumnInfo> cols(p);
  for (int j = 0; j < p; ++j) cols[j].name = "x" + std::to_string(j + 1);
  return bartm::Dataset(std::move(mat), std::move(mask), std::move(y),
                        std::move(cols));
}

}  // namespace testsupport
