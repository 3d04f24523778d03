#include "bartm/mdm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>

#include "bartm/rng.hpp"

#ifndef BARTM_PRESET_DIR
#define BARTM_PRESET_DIR ""
#endif

namespace bartm {

double phi(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double surface_g(double x1, double x2, double x3) {
  return x1 + x2 + 2.0 * x3 - x1 * x1 + x2 * x2 + x1 * x2;
}

Dataset generate_surface(const GeneratedModelSpec& spec) {
  require(spec.n >= 1, "generate_surface: need n >= 1");
  require(spec.sigma_x_sq > 0.0 && spec.sigma_e_sq >= 0.0,
          "generate_surface: variances must be positive");

  // Covariance sigma_x_sq * [[1, r1, r2], [r1, 1, r1], [r2, r1, 1]];
  // lower Cholesky computed directly, with a positive-definiteness check.
  const double s = spec.sigma_x_sq;
  const double c[3][3] = {{s, s * spec.rho1, s * spec.rho2},
                          {s * spec.rho1, s, s * spec.rho1},
                          {s * spec.rho2, s * spec.rho1, s}};
  double l[3][3] = {};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j <= i; ++j) {
      double sum = c[i][j];
      for (int k = 0; k < j; ++k) sum -= l[i][k] * l[j][k];
      if (i == j) {
        require(sum > 0.0, "generate_surface: covariance not positive definite");
        l[i][i] = std::sqrt(sum);
      } else {
        l[i][j] = sum / l[j][j];
      }
    }
  }

  Rng rng(spec.seed);
  Matrix x(spec.n, 3, 0.0);
  BoolGrid mask(spec.n, 3, 0);
  std::vector<double> y(spec.n);
  for (int i = 0; i < spec.n; ++i) {
    const double z0 = rng.normal(), z1 = rng.normal(), z2 = rng.normal();
    const double x1 = l[0][0] * z0;
    const double x2 = l[1][0] * z0 + l[1][1] * z1;
    const double x3 = l[2][0] * z0 + l[2][1] * z1 + l[2][2] * z2;
    x(i, 0) = x1;
    x(i, 1) = x2;
    x(i, 2) = x3;
    y[i] = surface_g(x1, x2, x3) + rng.normal(0.0, std::sqrt(spec.sigma_e_sq));
  }
  std::vector<ColumnInfo> columns = {{"x1", ColumnKind::kNumeric, {}},
                                     {"x2", ColumnKind::kNumeric, {}},
                                     {"x3", ColumnKind::kNumeric, {}}};
  return Dataset(std::move(x), std::move(mask), std::move(y), std::move(columns));
}

void MdmSpec::validate(const Dataset& d) const {
  require(d.column_index(target) >= 0, "MdmSpec: unknown target column '" + target + "'");
  switch (mechanism) {
    case Mechanism::kMcar:
      require(rate >= 0.0 && rate <= 1.0, "MdmSpec: MCAR rate outside [0,1]");
      break;
    case Mechanism::kMarProbit:
      for (const ProbitTerm& t : terms)
        require(t.column != target,
                "MdmSpec: MAR formula must not reference its own target");
      [[fallthrough]];
    case Mechanism::kNmarProbit:
      require(!terms.empty(), "MdmSpec: probit mechanism needs formula terms");
      for (const ProbitTerm& t : terms)
        require(d.column_index(t.column) >= 0,
                "MdmSpec: unknown formula column '" + t.column + "'");
      break;
    case Mechanism::kThreshold:
      require(rate >= 0.0 && rate <= 1.0, "MdmSpec: threshold rate outside [0,1]");
      require(d.column_index(trigger_column) >= 0,
              "MdmSpec: unknown trigger column '" + trigger_column + "'");
      break;
  }
}

namespace {

// Per-column mean/sd of the latent (pre-masking) values, for standardized
// probit inputs.
void column_moments(const Dataset& d, int j, double* mean, double* sd) {
  const int n = d.n_rows();
  double m = 0.0;
  for (int i = 0; i < n; ++i) m += d.covariates(i, j);
  m /= n;
  double v = 0.0;
  for (int i = 0; i < n; ++i) {
    const double c = d.covariates(i, j) - m;
    v += c * c;
  }
  v = n > 1 ? v / (n - 1) : 0.0;
  *mean = m;
  *sd = std::sqrt(std::max(v, 1e-300));
}

}  // namespace

Dataset inject_missingness(const Dataset& d, const std::vector<MdmSpec>& specs,
                           std::uint64_t seed) {
  for (const MdmSpec& spec : specs) spec.validate(d);
  Dataset out = d;
  Rng rng(seed);

  const int n = d.n_rows();
  for (const MdmSpec& spec : specs) {
    const int target = d.column_index(spec.target);

    // The probit (and threshold) inputs read latent values from the input
    // dataset, never the masked copy: a guard against accidentally feeding a
    // mechanism the output of a previous spec.
    std::vector<double> prob(n, 0.0);
    switch (spec.mechanism) {
      case MdmSpec::Mechanism::kMcar:
        std::fill(prob.begin(), prob.end(), spec.rate);
        break;
      case MdmSpec::Mechanism::kMarProbit:
      case MdmSpec::Mechanism::kNmarProbit: {
        std::vector<int> cols;
        std::vector<int> powers;
        std::vector<double> means, sds;
        for (const ProbitTerm& t : spec.terms) {
          const int j = d.column_index(t.column);
          cols.push_back(j);
          powers.push_back(t.power);
          double mean = 0.0, sd = 1.0;
          if (spec.standardize_inputs) column_moments(d, j, &mean, &sd);
          means.push_back(mean);
          sds.push_back(sd);
        }
        for (int i = 0; i < n; ++i) {
          double sum = 0.0;
          for (std::size_t t = 0; t < cols.size(); ++t) {
            const double raw = d.covariates(i, cols[t]);
            const double v = spec.standardize_inputs ? (raw - means[t]) / sds[t] : raw;
            sum += std::pow(v, powers[t]);
          }
          prob[i] = phi(spec.gamma0 + spec.gamma1 * sum);
        }
        break;
      }
      case MdmSpec::Mechanism::kThreshold: {
        const int j = d.column_index(spec.trigger_column);
        for (int i = 0; i < n; ++i) {
          const double v = d.covariates(i, j);
          const bool fires = spec.trigger_cmp == MdmSpec::Cmp::kGe
                                 ? v >= spec.trigger_value
                                 : v <= spec.trigger_value;
          prob[i] = fires ? spec.rate : 0.0;
        }
        break;
      }
    }

    // One uniform per row regardless of the probability, so masks at
    // different mechanism strengths share a coupling under the same seed.
    for (int i = 0; i < n; ++i)
      if (rng.u01() < prob[i]) out.missing_mask(i, target) = 1;
  }
  return out;
}

Dataset apply_pattern_mixture(const Dataset& d, const PatternMixtureSpec& spec,
                              std::uint64_t seed) {
  const int trigger = d.column_index(spec.trigger_column);
  require(trigger >= 0,
          "apply_pattern_mixture: unknown trigger column '" + spec.trigger_column + "'");
  require(spec.sign == 1 || spec.sign == -1, "apply_pattern_mixture: sign must be +-1");

  double mu = spec.mu_b;
  double sd = std::sqrt(spec.sigma_b_sq);
  if (spec.mu_b_range_fraction > 0.0) {
    const auto [lo, hi] = std::minmax_element(d.response.begin(), d.response.end());
    mu = spec.mu_b_range_fraction * (*hi - *lo);
    sd = mu / 4.0;
  }

  Dataset out = d;
  Rng rng(seed);
  for (int i = 0; i < d.n_rows(); ++i)
    if (d.is_missing(i, trigger)) out.response[i] += spec.sign * rng.normal(mu, sd);
  return out;
}

nlohmann::json MdmSpec::to_json() const {
  nlohmann::json j;
  switch (mechanism) {
    case Mechanism::kMcar: j["mechanism"] = "mcar"; break;
    case Mechanism::kMarProbit: j["mechanism"] = "mar_probit"; break;
    case Mechanism::kNmarProbit: j["mechanism"] = "nmar_probit"; break;
    case Mechanism::kThreshold: j["mechanism"] = "threshold"; break;
  }
  j["target"] = target;
  if (mechanism == Mechanism::kMcar || mechanism == Mechanism::kThreshold)
    j["rate"] = rate;
  if (mechanism == Mechanism::kMarProbit || mechanism == Mechanism::kNmarProbit) {
    j["gamma0"] = gamma0;
    j["gamma1"] = gamma1;
    nlohmann::json jt = nlohmann::json::array();
    for (const ProbitTerm& t : terms)
      jt.push_back({{"column", t.column}, {"power", t.power}});
    j["terms"] = std::move(jt);
    j["standardize_inputs"] = standardize_inputs;
  }
  if (mechanism == Mechanism::kThreshold) {
    j["trigger_column"] = trigger_column;
    j["trigger_cmp"] = trigger_cmp == Cmp::kGe ? "ge" : "le";
    j["trigger_value"] = trigger_value;
  }
  return j;
}

MdmSpec MdmSpec::from_json(const nlohmann::json& j) {
  MdmSpec s;
  const std::string mech = j.at("mechanism").get<std::string>();
  if (mech == "mcar")
    s.mechanism = Mechanism::kMcar;
  else if (mech == "mar_probit")
    s.mechanism = Mechanism::kMarProbit;
  else if (mech == "nmar_probit")
    s.mechanism = Mechanism::kNmarProbit;
  else if (mech == "threshold")
    s.mechanism = Mechanism::kThreshold;
  else
    fail("MdmSpec: unknown mechanism '" + mech + "'");
  s.target = j.at("target").get<std::string>();
  s.rate = j.value("rate", 0.0);
  s.gamma0 = j.value("gamma0", 0.0);
  s.gamma1 = j.value("gamma1", 0.0);
  if (j.contains("terms"))
    for (const auto& jt : j.at("terms"))
      s.terms.push_back({jt.at("column").get<std::string>(), jt.value("power", 1)});
  s.standardize_inputs = j.value("standardize_inputs", false);
  s.trigger_column = j.value("trigger_column", std::string{});
  s.trigger_cmp = j.value("trigger_cmp", std::string{"ge"}) == "le" ? Cmp::kLe : Cmp::kGe;
  s.trigger_value = j.value("trigger_value", 0.0);
  return s;
}

nlohmann::json PatternMixtureSpec::to_json() const {
  return {{"trigger_column", trigger_column},
          {"mu_b", mu_b},
          {"sigma_b_sq", sigma_b_sq},
          {"sign", sign},
          {"mu_b_range_fraction", mu_b_range_fraction}};
}

PatternMixtureSpec PatternMixtureSpec::from_json(const nlohmann::json& j) {
  PatternMixtureSpec s;
  s.trigger_column = j.at("trigger_column").get<std::string>();
  s.mu_b = j.value("mu_b", s.mu_b);
  s.sigma_b_sq = j.value("sigma_b_sq", s.sigma_b_sq);
  s.sign = j.value("sign", 1);
  s.mu_b_range_fraction = j.value("mu_b_range_fraction", 0.0);
  return s;
}

nlohmann::json Scenario::to_json() const {
  nlohmann::json jlevels = nlohmann::json::array();
  for (const auto& level : levels) {
    nlohmann::json jl = nlohmann::json::array();
    for (const MdmSpec& s : level) jl.push_back(s.to_json());
    jlevels.push_back(std::move(jl));
  }
  nlohmann::json joffsets = nlohmann::json::array();
  for (const PatternMixtureSpec& o : offsets) joffsets.push_back(o.to_json());
  nlohmann::json j = {{"name", name},
                      {"base", base == Base::kBhd ? "bhd" : "generated"},
                      {"levels", std::move(jlevels)},
                      {"offsets", std::move(joffsets)}};
  if (base == Base::kGenerated)
    j["surface"] = {{"n", surface.n},
                    {"sigma_x_sq", surface.sigma_x_sq},
                    {"rho1", surface.rho1},
                    {"rho2", surface.rho2},
                    {"sigma_e_sq", surface.sigma_e_sq}};
  return j;
}

Scenario Scenario::from_json(const nlohmann::json& j) {
  Scenario s;
  s.name = j.at("name").get<std::string>();
  s.base = j.value("base", std::string{"generated"}) == "bhd" ? Base::kBhd
                                                              : Base::kGenerated;
  if (j.contains("surface")) {
    const auto& js = j.at("surface");
    s.surface.n = js.value("n", s.surface.n);
    s.surface.sigma_x_sq = js.value("sigma_x_sq", s.surface.sigma_x_sq);
    s.surface.rho1 = js.value("rho1", s.surface.rho1);
    s.surface.rho2 = js.value("rho2", s.surface.rho2);
    s.surface.sigma_e_sq = js.value("sigma_e_sq", s.surface.sigma_e_sq);
  }
  for (const auto& jl : j.at("levels")) {
    std::vector<MdmSpec> level;
    for (const auto& js : jl) level.push_back(MdmSpec::from_json(js));
    s.levels.push_back(std::move(level));
  }
  if (j.contains("offsets"))
    for (const auto& jo : j.at("offsets"))
      s.offsets.push_back(PatternMixtureSpec::from_json(jo));
  return s;
}

Scenario load_scenario(const std::string& name_or_path) {
  auto try_load = [](const std::string& path) -> std::ifstream {
    return std::ifstream(path);
  };
  std::ifstream in = try_load(name_or_path);
  if (!in.good()) {
    if (const char* dir = std::getenv("BARTM_PRESET_DIR"); dir != nullptr)
      in = try_load(std::string(dir) + "/" + name_or_path + ".json");
  }
  if (!in.good()) {
    const std::string baked = BARTM_PRESET_DIR;
    if (!baked.empty()) in = try_load(baked + "/" + name_or_path + ".json");
  }
  require(in.good(), "load_scenario: cannot resolve '" + name_or_path + "'");
  nlohmann::json j;
  in >> j;
  return Scenario::from_json(j);
}

}  // namespace bartm
