#pragma once

#include <span>
#include <vector>

#include "bartm/data.hpp"
#include "bartm/tree.hpp"

#include "json.hpp"

namespace bartm {

// Prior constants and chain lengths. Defaults follow the usual BART
// conventions; everything is overridable from the CLI or a JSON config.
struct Hyperparams {
  int m = 50;           // number of trees
  double alpha = 0.95;  // depth prior: P(split at depth d) = alpha * (1+d)^-beta
  double beta = 2.0;
  double k = 2.0;       // leaf shrinkage: sigma_mu = 0.5 / (k * sqrt(m))
  double nu = 3.0;      // noise variance prior degrees of freedom
  double q = 0.9;       // noise prior quantile used to calibrate lambda
  int n_burn = 1000;
  int n_post = 1000;

  void validate() const;
  double sigma_mu_sq() const;

  nlohmann::json to_json() const;
  static Hyperparams from_json(const nlohmann::json& j);
};

struct LeafPosterior {
  double mean = 0.0;
  double variance = 0.0;
};

struct SigmaPosterior {
  double shape = 0.0;  // inverse-gamma: density proportional to x^(-shape-1) e^(-scale/x)
  double scale = 0.0;
};

// Sufficient statistics of the residuals at one leaf.
struct LeafStats {
  long n = 0;
  double sum = 0.0;
  double sum_sq = 0.0;

  void add(double r) {
    ++n;
    sum += r;
    sum_sq += r * r;
  }
};

double log_split_prob(int depth, const Hyperparams& h);  // log alpha*(1+d)^-beta
double log_stay_prob(int depth, const Hyperparams& h);   // log(1 - ...)

// Full structure prior of a tree: depth terms at every node plus the
// rule-selection probability (uniform attribute, uniform threshold, fair
// direction coin) at every internal node, with candidate sets computed from
// the training rows reaching each node. Returns -infinity when the tree is
// outside the prior's support (a rule not drawable at its node, or an empty
// leaf).
double log_tree_structure_prior(const Tree& tree, const AugmentedDataset& data,
                                const Hyperparams& h);

// Log marginal likelihood of one leaf's residuals with the leaf mean
// integrated out under its N(0, sigma_mu_sq) prior.
double log_marginal_leaf(const LeafStats& stats, double sigma_sq, double sigma_mu_sq);

double log_marginal_likelihood(std::span<const LeafStats> leaves, double sigma_sq,
                               double sigma_mu_sq);

LeafPosterior leaf_posterior(const LeafStats& stats, double sigma_sq,
                             double sigma_mu_sq);

SigmaPosterior sigma_posterior(long n, double sum_sq_residuals, double nu,
                               double lambda);

// lambda such that P(sigma^2 < sample_var) = q under the
// InvGamma(nu/2, nu*lambda/2) prior.
double calibrate_lambda(double sample_var, double nu, double q);

}  // namespace bartm
