#include "bartm/model.hpp"

#include <cmath>
#include <limits>

#include <boost/math/distributions/chi_squared.hpp>

namespace bartm {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

void Hyperparams::validate() const {
  require(m >= 1, "Hyperparams: m must be >= 1");
  require(alpha > 0.0 && alpha < 1.0, "Hyperparams: alpha must be in (0,1)");
  require(beta > 0.0, "Hyperparams: beta must be > 0");
  require(k > 0.0, "Hyperparams: k must be > 0");
  require(nu > 0.0, "Hyperparams: nu must be > 0");
  require(q > 0.0 && q < 1.0, "Hyperparams: q must be in (0,1)");
  require(n_burn >= 0 && n_post >= 1, "Hyperparams: need n_burn >= 0, n_post >= 1");
}

double Hyperparams::sigma_mu_sq() const {
  const double sigma_mu = 0.5 / (k * std::sqrt(static_cast<double>(m)));
  return sigma_mu * sigma_mu;
}

nlohmann::json Hyperparams::to_json() const {
  return {{"m", m},       {"alpha", alpha},   {"beta", beta}, {"k", k},
          {"nu", nu},     {"q", q},           {"n_burn", n_burn},
          {"n_post", n_post}};
}

Hyperparams Hyperparams::from_json(const nlohmann::json& j) {
  Hyperparams h;
  h.m = j.value("m", h.m);
  h.alpha = j.value("alpha", h.alpha);
  h.beta = j.value("beta", h.beta);
  h.k = j.value("k", h.k);
  h.nu = j.value("nu", h.nu);
  h.q = j.value("q", h.q);
  h.n_burn = j.value("n_burn", h.n_burn);
  h.n_post = j.value("n_post", h.n_post);
  h.validate();
  return h;
}

double log_split_prob(int depth, const Hyperparams& h) {
  return std::log(h.alpha) - h.beta * std::log1p(static_cast<double>(depth));
}

double log_stay_prob(int depth, const Hyperparams& h) {
  return std::log1p(-h.alpha * std::pow(1.0 + depth, -h.beta));
}

namespace {

struct PriorWalk {
  const Tree& tree;
  const AugmentedDataset& data;
  const Hyperparams& hyper;

  double visit(int id, int depth, std::vector<int>& rows) const {
    if (tree.is_leaf(id)) {
      if (rows.empty()) return kNegInf;
      return log_stay_prob(depth, hyper);
    }
    const SplitRule& rule = tree.node(id).rule;
    const CandidateSet candidates = collect_candidate_rules(data, rows);
    const double rule_term = candidates.log_rule_prob(rule);
    if (rule_term == kNegInf) return kNegInf;

    std::vector<int> left, right;
    for (int i : rows) {
      const bool go_left = data.is_missing(i, rule.attribute)
                               ? rule.send_missing_left
                               : data.value(i, rule.attribute) <= rule.threshold;
      (go_left ? left : right).push_back(i);
    }
    const double below = visit(tree.node(id).left, depth + 1, left) +
                         visit(tree.node(id).right, depth + 1, right);
    return log_split_prob(depth, hyper) + rule_term + below;
  }
};

}  // namespace

double log_tree_structure_prior(const Tree& tree, const AugmentedDataset& data,
                                const Hyperparams& h) {
  std::vector<int> rows(data.n_rows());
  for (int i = 0; i < data.n_rows(); ++i) rows[i] = i;
  return PriorWalk{tree, data, h}.visit(tree.root(), 0, rows);
}

double log_marginal_leaf(const LeafStats& stats, double sigma_sq, double sigma_mu_sq) {
  require(stats.n >= 1, "log_marginal_leaf: empty residual group");
  require(sigma_sq > 0.0, "log_marginal_leaf: sigma_sq must be > 0");
  const double n = static_cast<double>(stats.n);
  const double denom = sigma_sq + n * sigma_mu_sq;
  return -0.5 * n * std::log(2.0 * M_PI * sigma_sq) +
         0.5 * std::log(sigma_sq / denom) - stats.sum_sq / (2.0 * sigma_sq) +
         sigma_mu_sq * stats.sum * stats.sum / (2.0 * sigma_sq * denom);
}

double log_marginal_likelihood(std::span<const LeafStats> leaves, double sigma_sq,
                               double sigma_mu_sq) {
  double total = 0.0;
  for (const LeafStats& stats : leaves)
    total += log_marginal_leaf(stats, sigma_sq, sigma_mu_sq);
  return total;
}

LeafPosterior leaf_posterior(const LeafStats& stats, double sigma_sq,
                             double sigma_mu_sq) {
  require(stats.n >= 1, "leaf_posterior: empty residual group");
  const double n = static_cast<double>(stats.n);
  const double denom = sigma_sq + n * sigma_mu_sq;
  return {sigma_mu_sq * stats.sum / denom, sigma_sq * sigma_mu_sq / denom};
}

SigmaPosterior sigma_posterior(long n, double sum_sq_residuals, double nu,
                               double lambda) {
  require(n >= 1, "sigma_posterior: need n >= 1");
  return {(nu + static_cast<double>(n)) / 2.0,
          (nu * lambda + sum_sq_residuals) / 2.0};
}

double calibrate_lambda(double sample_var, double nu, double q) {
  require(sample_var >= 0.0, "calibrate_lambda: negative variance");
  require(q > 0.0 && q < 1.0, "calibrate_lambda: q must be in (0,1)");
  // nu*lambda / sigma^2 ~ chi^2_nu, so P(sigma^2 < v) = q pins
  // nu*lambda = v * quantile(chi^2_nu, 1-q).
  const boost::math::chi_squared chi(nu);
  return sample_var * boost::math::quantile(chi, 1.0 - q) / nu;
}

}  // namespace bartm
