#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>

#include "bartm/data.hpp"
#include "bartm/rng.hpp"

#include "doctest.h"
#include "support/builders.hpp"

using namespace bartm;
using testsupport::make_dataset;
using testsupport::random_dataset;

namespace {

struct TempCsv {
  std::string path;
  explicit TempCsv(const std::string& contents) {
    static int counter = 0;
    path = "bartm_test_" + std::to_string(counter++) + ".csv";
    std::ofstream out(path, std::ios::binary);
    out << contents;
  }
  ~TempCsv() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("ingest_csv: no missing tokens gives an all-false mask") {
  TempCsv file("a,b,y\n1,2,3\n4,5,6\n7,8,9\n");
  const Dataset d = ingest_csv(file.path, {.response_column = "y"});
  CHECK(d.n_rows() == 3);
  CHECK(d.n_cols() == 2);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 2; ++j) CHECK_FALSE(d.is_missing(i, j));
  CHECK(d.response == std::vector<double>{3, 6, 9});
  CHECK(d.covariates(2, 1) == 8.0);
}

TEST_CASE("ingest_csv: NA and empty cells set the mask, placeholders unread") {
  TempCsv file("a,b,y\n1,NA,3\n,5,6\n7,8,9\n");
  const Dataset d = ingest_csv(file.path, {.response_column = "y"});
  CHECK(d.is_missing(0, 1));
  CHECK(d.is_missing(1, 0));
  CHECK_FALSE(d.is_missing(2, 0));
}

TEST_CASE("ingest_csv: rows with missing response dropped and counted") {
  TempCsv file("a,y\n1,2\n3,NA\n5,6\n");
  IngestReport report;
  const Dataset d = ingest_csv(file.path, {.response_column = "y"}, &report);
  CHECK(d.n_rows() == 2);
  CHECK(report.rows_dropped_missing_response == 1);
}

TEST_CASE("ingest_csv: fully-missing column yields an all-ones dummy") {
  std::string contents = "a,b,y\n";
  const int n = 12;
  for (int i = 0; i < n; ++i)
    contents += std::to_string(i) + ",NA," + std::to_string(2 * i) + "\n";
  TempCsv file(contents);
  const Dataset d = ingest_csv(file.path, {.response_column = "y"});
  int mask_sum = 0;
  for (int i = 0; i < n; ++i) mask_sum += d.is_missing(i, 1) ? 1 : 0;
  CHECK(mask_sum == n);

  const AugmentedDataset aug = augment(d);
  REQUIRE(aug.n_dummies() == 1);
  CHECK(aug.dummy_map()[0] == 1);
  double dummy_sum = 0.0;
  for (int i = 0; i < n; ++i) dummy_sum += aug.value(i, 2);
  CHECK(dummy_sum == static_cast<double>(n));
}

TEST_CASE("ingest_csv: errors name the offending location") {
  TempCsv ragged("a,y\n1,2,3\n");
  CHECK_THROWS_WITH_AS(ingest_csv(ragged.path, {.response_column = "y"}),
                       doctest::Contains("row 2"), Error);

  TempCsv no_response("a,b\n1,2\n");
  CHECK_THROWS_AS(ingest_csv(no_response.path, {.response_column = "y"}), Error);

  TempCsv all_dropped("a,y\n1,NA\n");
  CHECK_THROWS_WITH_AS(ingest_csv(all_dropped.path, {.response_column = "y"}),
                       doctest::Contains("no usable rows"), Error);
}

TEST_CASE("ingest_csv: quoted fields and nominal level codes") {
  TempCsv file("name,a,y\n\"x,1\",1,2\nplain,2,3\n\"he said \"\"hi\"\"\",3,4\n");
  const Dataset d = ingest_csv(file.path, {.response_column = "y"});
  REQUIRE(d.columns[0].kind == ColumnKind::kNominal);
  // Levels are sorted lexicographically; codes follow that order.
  REQUIRE(d.columns[0].levels.size() == 3);
  const auto& levels = d.columns[0].levels;
  CHECK(std::is_sorted(levels.begin(), levels.end()));
  for (int i = 0; i < 3; ++i) {
    const int code = static_cast<int>(d.covariates(i, 0));
    CHECK(code >= 0);
    CHECK(code < 3);
  }
  CHECK(levels[static_cast<int>(d.covariates(1, 0))] == "plain");
  CHECK(levels[static_cast<int>(d.covariates(0, 0))] == "x,1");
  CHECK(levels[static_cast<int>(d.covariates(2, 0))] == "he said \"hi\"");
}

TEST_CASE("augment: no missingness means no dummies") {
  const Dataset d = make_dataset({{1, 2}, {3, 4}}, {{0, 0}, {0, 0}}, {1, 2});
  const AugmentedDataset aug = augment(d);
  CHECK(aug.n_dummies() == 0);
  CHECK(aug.n_cols() == 2);
}

TEST_CASE("augment: dummy_map lists source columns in order") {
  const Dataset d = make_dataset(
      {{1, 2, 3, 4}, {5, 6, 7, 8}, {9, 10, 11, 12}},
      {{0, 0, 1, 0}, {0, 0, 0, 1}, {0, 0, 1, 1}}, {1, 2, 3});
  const AugmentedDataset aug = augment(d);
  CHECK(aug.dummy_map() == std::vector<int>{2, 3});
}

TEST_CASE("augment: mask/dummy bijection on random masks") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Dataset d = random_dataset(40, 6, 0.25, seed);
    const AugmentedDataset aug = augment(d);
    // brute-force comparison against the mask restricted to columns with
    // at least one missing entry
    std::vector<int> expected_map;
    for (int j = 0; j < d.n_cols(); ++j) {
      int count = 0;
      for (int i = 0; i < d.n_rows(); ++i) count += d.is_missing(i, j);
      if (count > 0) expected_map.push_back(j);
    }
    REQUIRE(aug.dummy_map() == expected_map);
    for (int i = 0; i < d.n_rows(); ++i)
      for (int k = 0; k < aug.n_dummies(); ++k) {
        CHECK(aug.value(i, d.n_cols() + k) ==
              (d.is_missing(i, aug.dummy_map()[k]) ? 1.0 : 0.0));
        CHECK_FALSE(aug.is_missing(i, d.n_cols() + k));
      }
  }
}

TEST_CASE("augment: dummies spawn no further columns on re-augmentation") {
  const Dataset d = make_dataset({{1, 2}, {3, 4}, {5, 6}},
                                 {{1, 0}, {0, 0}, {1, 0}}, {1, 2, 3});
  const AugmentedDataset aug = augment(d);
  const AugmentedDataset again = augment(aug.as_dataset());
  // The base column with missingness re-spawns its dummy; the dummy columns
  // themselves are missing-free and add nothing.
  CHECK(again.dummy_map() == aug.dummy_map());
  for (int src : again.dummy_map()) CHECK(src < d.n_cols());
}

TEST_CASE("scale_response: endpoints, constant case, round trip") {
  {
    auto [scaled, t] = scale_response({0.0, 10.0});
    CHECK(scaled[0] == -0.5);
    CHECK(scaled[1] == 0.5);
    CHECK_FALSE(t.degenerate);
  }
  {
    auto [scaled, t] = scale_response({5.0, 5.0, 5.0});
    CHECK(t.degenerate);
    for (double s : scaled) CHECK(s == 0.0);
    CHECK(t.invert(0.0) == 5.0);
  }
  {
    // round trip on a wide-range sample
    Rng rng(7);
    std::vector<double> y(200);
    for (double& v : y) v = rng.normal(0.0, 4.0) + 10.0;
    auto [scaled, t] = scale_response(y);
    double max_rel = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double back = t.invert(scaled[i]);
      max_rel = std::max(max_rel, std::abs(back - y[i]) /
                                      std::max(1.0, std::abs(y[i])));
    }
    CHECK(max_rel < 1e-12);
  }
}

TEST_CASE("scale_response: affine property preserves ordering and spacing") {
  Rng rng(11);
  std::vector<double> y(100);
  for (double& v : y) v = rng.uniform(-50.0, 50.0);
  auto [scaled, t] = scale_response(y);
  // Pearson correlation with the original must be exactly 1 up to fp noise.
  double my = 0.0, ms = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    my += y[i];
    ms += scaled[i];
  }
  my /= y.size();
  ms /= y.size();
  double num = 0.0, dy = 0.0, ds = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    num += (y[i] - my) * (scaled[i] - ms);
    dy += (y[i] - my) * (y[i] - my);
    ds += (scaled[i] - ms) * (scaled[i] - ms);
  }
  CHECK(num / std::sqrt(dy * ds) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("Dataset: subset and complete cases") {
  const Dataset d = make_dataset({{1, 2}, {3, 4}, {5, 6}},
                                 {{1, 0}, {0, 0}, {0, 1}}, {1, 2, 3});
  CHECK(d.complete_case_rows() == std::vector<int>{1});
  const Dataset sub = d.subset({1, 2});
  CHECK(sub.n_rows() == 2);
  CHECK(sub.response == std::vector<double>{2, 3});
  CHECK(sub.is_missing(1, 1));
  CHECK(d.row_missing_fraction() == doctest::Approx(2.0 / 3.0));
}
