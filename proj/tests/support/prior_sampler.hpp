#pragma once

// Direct sampler for the tree structure prior: recursive depth-prior coin,
// uniform rule draw from the candidate set, restart on any dead end (no
// drawable rule, or a direction coin that empties a child). Restarting makes
// the draw exact on the same support the MCMC sampler targets.

#include <vector>

#include "bartm/model.hpp"
#include "bartm/rng.hpp"
#include "bartm/tree.hpp"

namespace testsupport {

inline bool try_grow_from_prior(bartm::Tree& tree, int node, int depth,
                                std::vector<int> rows,
                                const bartm::AugmentedDataset& data,
                                const bartm::Hyperparams& h, bartm::Rng& rng) {
  const double p_split = h.alpha * std::pow(1.0 + depth, -h.beta);
  if (!rng.bernoulli(p_split)) return true;  // leaf (rows non-empty by caller)

  const std::vector<int> attrs = bartm::candidate_attributes(data, rows);
  if (attrs.empty()) return false;  // dead end: restart the whole draw
  const int attr = attrs[rng.uniform_int(static_cast<int>(attrs.size()))];
  const std::vector<double> thresholds =
      bartm::candidate_thresholds(data, rows, attr);
  const double c =
      thresholds[rng.uniform_int(static_cast<int>(thresholds.size()))];
  const bartm::SplitRule rule{attr, c, rng.bernoulli(0.5)};

  std::vector<int> left, right;
  for (int i : rows) {
    const bool go_left = data.is_missing(i, rule.attribute)
                             ? rule.send_missing_left
                             : data.value(i, rule.attribute) <= rule.threshold;
    (go_left ? left : right).push_back(i);
  }
  if (left.empty() || right.empty()) return false;

  tree.grow(node, rule);
  return try_grow_from_prior(tree, tree.node(node).left, depth + 1,
                             std::move(left), data, h, rng) &&
         try_grow_from_prior(tree, tree.node(node).right, depth + 1,
                             std::move(right), data, h, rng);
}

inline bartm::Tree sample_tree_from_prior(const bartm::AugmentedDataset& data,
                                          const bartm::Hyperparams& h,
                                          bartm::Rng& rng) {
  std::vector<int> all_rows(data.n_rows());
  for (int i = 0; i < data.n_rows(); ++i) all_rows[i] = i;
  for (;;) {
    bartm::Tree tree;
    if (try_grow_from_prior(tree, tree.root(), 0, all_rows, data, h, rng))
      return tree;
  }
}

}  // namespace testsupport
