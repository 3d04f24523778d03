#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bartm/data.hpp"

#include "json.hpp"

namespace bartm {

// Standard normal CDF.
double phi(double x);

// Trivariate-normal covariates (unit variances scaled by sigma_x_sq, the
// rho1/rho2 correlation pattern) pushed through the quadratic surface
// g(x) = x1 + x2 + 2*x3 - x1^2 + x2^2 + x1*x2, plus N(0, sigma_e_sq) noise.
struct GeneratedModelSpec {
  int n = 500;
  double sigma_x_sq = 1.0;
  double rho1 = 0.2;
  double rho2 = 0.4;
  double sigma_e_sq = 1.0;
  std::uint64_t seed = 0;
};

double surface_g(double x1, double x2, double x3);

Dataset generate_surface(const GeneratedModelSpec& spec);

// One summand of a probit formula: column value raised to a small power.
struct ProbitTerm {
  std::string column;
  int power = 1;
};

// Declarative missingness mechanism for one target column. Probit inputs
// always use pre-masking (latent) values, including the target's own value
// for NMAR.
struct MdmSpec {
  enum class Mechanism { kMcar, kMarProbit, kNmarProbit, kThreshold };
  enum class Cmp { kGe, kLe };

  Mechanism mechanism = Mechanism::kMcar;
  std::string target;

  double rate = 0.0;  // MCAR / Threshold

  double gamma0 = 0.0;  // probit: P(missing) = Phi(gamma0 + gamma1 * sum(terms))
  double gamma1 = 0.0;
  std::vector<ProbitTerm> terms;
  bool standardize_inputs = false;  // z-score term columns before summing

  std::string trigger_column;  // Threshold: missing w.p. rate if condition holds
  Cmp trigger_cmp = Cmp::kGe;
  double trigger_value = 0.0;

  void validate(const Dataset& d) const;

  nlohmann::json to_json() const;
  static MdmSpec from_json(const nlohmann::json& j);
};

Dataset inject_missingness(const Dataset& d, const std::vector<MdmSpec>& specs,
                           std::uint64_t seed);

// Pattern-mixture response offset: rows where the trigger column is missing
// get sign * B added to the response, B ~ N(mu_b, sigma_b_sq) i.i.d. per row.
// With mu_b_range_fraction > 0, mu_b is that fraction of range(y) and
// sigma_b = mu_b / 4, resolved against the dataset at application time.
struct PatternMixtureSpec {
  std::string trigger_column;
  double mu_b = 10.0;
  double sigma_b_sq = 0.5;
  int sign = +1;
  double mu_b_range_fraction = 0.0;

  nlohmann::json to_json() const;
  static PatternMixtureSpec from_json(const nlohmann::json& j);
};

Dataset apply_pattern_mixture(const Dataset& d, const PatternMixtureSpec& spec,
                              std::uint64_t seed);

// A named experiment preset: the data source, a ladder of missingness levels
// (one MdmSpec list per level), and optional pattern-mixture offsets.
struct Scenario {
  enum class Base { kGenerated, kBhd };

  std::string name;
  Base base = Base::kGenerated;
  GeneratedModelSpec surface;
  std::vector<std::vector<MdmSpec>> levels;
  std::vector<PatternMixtureSpec> offsets;

  int n_levels() const { return static_cast<int>(levels.size()); }

  nlohmann::json to_json() const;
  static Scenario from_json(const nlohmann::json& j);
};

// Accepts a filesystem path or a preset name; names resolve against
// $BARTM_PRESET_DIR and then the directory baked in at configure time.
Scenario load_scenario(const std::string& name_or_path);

}  // namespace bartm
