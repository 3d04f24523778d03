#include "bartm/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "bartm/parallel.hpp"

namespace bartm {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kLogThird = -1.0986122886681098;  // log(1/3)

// log probability of drawing `rule` at a node holding `rows`; -infinity if
// the rule is not in the node's candidate set.
double log_rule_prob_at(const AugmentedDataset& data, std::span<const int> rows,
                        const SplitRule& rule) {
  const std::vector<int> attrs = candidate_attributes(data, rows);
  if (!std::binary_search(attrs.begin(), attrs.end(), rule.attribute))
    return kNegInf;
  const std::vector<double> thresholds =
      candidate_thresholds(data, rows, rule.attribute);
  if (!std::binary_search(thresholds.begin(), thresholds.end(), rule.threshold))
    return kNegInf;
  return -std::log(static_cast<double>(attrs.size())) -
         std::log(static_cast<double>(thresholds.size())) - std::log(2.0);
}

// Rows per leaf, ascending row order within each group.
std::vector<std::vector<int>> group_rows(const std::vector<int>& leaf_of_row,
                                         const std::vector<int>& leaf_ids) {
  std::vector<std::vector<int>> groups(leaf_ids.size());
  for (int i = 0; i < static_cast<int>(leaf_of_row.size()); ++i) {
    for (std::size_t g = 0; g < leaf_ids.size(); ++g) {
      if (leaf_of_row[i] == leaf_ids[g]) {
        groups[g].push_back(i);
        break;
      }
    }
  }
  return groups;
}

bool leaf_is_growable(const AugmentedDataset& data, std::span<const int> rows) {
  return !candidate_attributes(data, rows).empty();
}

// Leaves strictly below `node` in preorder.
void leaves_below(const Tree& tree, int node, std::vector<int>& out) {
  if (tree.is_leaf(node)) {
    out.push_back(node);
    return;
  }
  leaves_below(tree, tree.node(node).left, out);
  leaves_below(tree, tree.node(node).right, out);
}

// Sum of log rule-selection probabilities over internal nodes of the subtree
// rooted at `node`, partitioning `rows` on the way down. -infinity if a rule
// is not drawable in the new partition or a leaf ends up empty.
double subtree_rule_log_prob(const Tree& tree, int node,
                             const AugmentedDataset& data,
                             std::vector<int>& rows) {
  if (tree.is_leaf(node)) return rows.empty() ? kNegInf : 0.0;
  const SplitRule& rule = tree.node(node).rule;
  const double here = log_rule_prob_at(data, rows, rule);
  if (here == kNegInf) return kNegInf;
  std::vector<int> left, right;
  for (int i : rows) {
    const bool go_left = data.is_missing(i, rule.attribute)
                             ? rule.send_missing_left
                             : data.value(i, rule.attribute) <= rule.threshold;
    (go_left ? left : right).push_back(i);
  }
  const double below_l = subtree_rule_log_prob(tree, tree.node(node).left, data, left);
  if (below_l == kNegInf) return kNegInf;
  const double below_r =
      subtree_rule_log_prob(tree, tree.node(node).right, data, right);
  if (below_r == kNegInf) return kNegInf;
  return here + below_l + below_r;
}

SplitRule draw_rule(const AugmentedDataset& data, std::span<const int> rows,
                    const std::vector<int>& attrs, Rng& rng,
                    double* log_prob_out) {
  const int attr = attrs[rng.uniform_int(static_cast<int>(attrs.size()))];
  const std::vector<double> thresholds = candidate_thresholds(data, rows, attr);
  const double threshold =
      thresholds[rng.uniform_int(static_cast<int>(thresholds.size()))];
  const bool left = rng.bernoulli(0.5);
  *log_prob_out = -std::log(static_cast<double>(attrs.size())) -
                  std::log(static_cast<double>(thresholds.size())) - std::log(2.0);
  return SplitRule{attr, threshold, left};
}

void split_rows(const AugmentedDataset& data, const SplitRule& rule,
                std::span<const int> rows, std::vector<int>& left,
                std::vector<int>& right) {
  for (int i : rows) {
    const bool go_left = data.is_missing(i, rule.attribute)
                             ? rule.send_missing_left
                             : data.value(i, rule.attribute) <= rule.threshold;
    (go_left ? left : right).push_back(i);
  }
}

TreeProposal propose_grow(const Tree& tree, const AugmentedDataset& data,
                          const std::vector<int>& leaf_ids,
                          const std::vector<std::vector<int>>& rows_by_leaf,
                          const Hyperparams& hyper, Rng& rng) {
  TreeProposal prop;
  prop.type = MoveType::kGrow;

  std::vector<int> growable;
  for (std::size_t g = 0; g < leaf_ids.size(); ++g)
    if (leaf_is_growable(data, rows_by_leaf[g])) growable.push_back(static_cast<int>(g));
  if (growable.empty()) return prop;  // auto-reject

  const int g = growable[rng.uniform_int(static_cast<int>(growable.size()))];
  const int leaf = leaf_ids[g];
  const std::vector<int>& rows = rows_by_leaf[g];
  const std::vector<int> attrs = candidate_attributes(data, rows);
  double log_rule_prob = 0.0;
  const SplitRule rule = draw_rule(data, rows, attrs, rng, &log_rule_prob);

  std::vector<int> left, right;
  split_rows(data, rule, rows, left, right);
  if (left.empty() || right.empty()) return prop;  // auto-reject

  prop.tree = tree;
  prop.tree.grow(leaf, rule);
  prop.node = leaf;
  prop.valid = true;

  const bool was_stump = tree.num_nodes() == 1;
  const double log_sel_fwd = was_stump ? 0.0 : kLogThird;
  const double log_q_fwd = log_sel_fwd -
                           std::log(static_cast<double>(growable.size())) +
                           log_rule_prob;
  const int n_prunable = static_cast<int>(prop.tree.prunable_ids().size());
  const double log_q_rev = kLogThird - std::log(static_cast<double>(n_prunable));
  prop.log_proposal_ratio = log_q_rev - log_q_fwd;

  const int d = tree.depth(leaf);
  prop.delta_log_prior = log_split_prob(d, hyper) - log_stay_prob(d, hyper) +
                         2.0 * log_stay_prob(d + 1, hyper) + log_rule_prob;

  prop.old_groups.push_back(rows);
  prop.new_groups.push_back(std::move(left));
  prop.new_groups.push_back(std::move(right));
  prop.new_leaf_ids = {prop.tree.node(leaf).left, prop.tree.node(leaf).right};
  return prop;
}

TreeProposal propose_prune(const Tree& tree, const AugmentedDataset& data,
                           const std::vector<int>& leaf_ids,
                           const std::vector<std::vector<int>>& rows_by_leaf,
                           const Hyperparams& hyper, Rng& rng) {
  TreeProposal prop;
  prop.type = MoveType::kPrune;

  const std::vector<int> prunable = tree.prunable_ids();
  const int v = prunable[rng.uniform_int(static_cast<int>(prunable.size()))];
  const SplitRule rule = tree.node(v).rule;

  auto rows_of = [&](int leaf) -> const std::vector<int>& {
    const auto it = std::find(leaf_ids.begin(), leaf_ids.end(), leaf);
    return rows_by_leaf[it - leaf_ids.begin()];
  };
  const std::vector<int>& left = rows_of(tree.node(v).left);
  const std::vector<int>& right = rows_of(tree.node(v).right);
  std::vector<int> merged(left.size() + right.size());
  std::merge(left.begin(), left.end(), right.begin(), right.end(), merged.begin());

  prop.tree = tree;
  prop.tree.prune(v);
  prop.node = v;
  prop.valid = true;

  // Rule term at v under its candidate set; the rule was drawable when v was
  // grown and the rows reaching v have not changed, so this is finite.
  const double log_rule_prob = log_rule_prob_at(data, merged, rule);
  if (log_rule_prob == kNegInf)
    throw std::logic_error("propose_prune: existing rule left the candidate set");

  const double log_q_fwd =
      kLogThird - std::log(static_cast<double>(prunable.size()));
  // Reverse move grows leaf v back with exactly this rule.
  int n_growable = 0;
  for (std::size_t g = 0; g < leaf_ids.size(); ++g) {
    const int leaf = leaf_ids[g];
    if (leaf == tree.node(v).left || leaf == tree.node(v).right) continue;
    if (leaf_is_growable(data, rows_by_leaf[g])) ++n_growable;
  }
  ++n_growable;  // v itself is growable in the pruned tree (this rule)
  const bool rev_from_stump = prop.tree.num_nodes() == 1;
  const double log_sel_rev = rev_from_stump ? 0.0 : kLogThird;
  const double log_q_rev = log_sel_rev -
                           std::log(static_cast<double>(n_growable)) +
                           log_rule_prob;
  prop.log_proposal_ratio = log_q_rev - log_q_fwd;

  const int d = tree.depth(v);
  prop.delta_log_prior = log_stay_prob(d, hyper) - log_split_prob(d, hyper) -
                         2.0 * log_stay_prob(d + 1, hyper) - log_rule_prob;

  prop.old_groups.push_back(left);
  prop.old_groups.push_back(right);
  prop.new_groups.push_back(std::move(merged));
  prop.new_leaf_ids = {v};
  return prop;
}

TreeProposal propose_change(const Tree& tree, const AugmentedDataset& data,
                            const std::vector<int>& leaf_ids,
                            const std::vector<std::vector<int>>& rows_by_leaf,
                            Rng& rng) {
  TreeProposal prop;
  prop.type = MoveType::kChange;

  const std::vector<int> internals = tree.internal_ids();
  const int v = internals[rng.uniform_int(static_cast<int>(internals.size()))];

  // Rows reaching v: union of its leaves' groups, ascending.
  std::vector<int> below;
  leaves_below(tree, v, below);
  std::vector<int> rows_v;
  std::vector<std::vector<int>> old_groups;
  for (int leaf : below) {
    const auto it = std::find(leaf_ids.begin(), leaf_ids.end(), leaf);
    old_groups.push_back(rows_by_leaf[it - leaf_ids.begin()]);
  }
  {
    std::size_t total = 0;
    for (const auto& g : old_groups) total += g.size();
    rows_v.reserve(total);
    for (const auto& g : old_groups) rows_v.insert(rows_v.end(), g.begin(), g.end());
    std::sort(rows_v.begin(), rows_v.end());
  }

  const SplitRule old_rule = tree.node(v).rule;
  const std::vector<int> attrs = candidate_attributes(data, rows_v);
  if (attrs.empty())
    throw std::logic_error("propose_change: no candidates at an internal node");
  double log_prob_new = 0.0;
  const SplitRule new_rule = draw_rule(data, rows_v, attrs, rng, &log_prob_new);
  const double log_prob_old = log_rule_prob_at(data, rows_v, old_rule);
  if (log_prob_old == kNegInf)
    throw std::logic_error("propose_change: existing rule left the candidate set");

  prop.tree = tree;
  prop.tree.change(v, new_rule);
  prop.node = v;

  // Re-partition the subtree under the new rule; track per-leaf groups in
  // the same preorder as `below` (structure and leaf ids are unchanged).
  std::vector<std::vector<int>> new_groups(below.size());
  for (int i : rows_v) {
    int id = v;
    while (!prop.tree.is_leaf(id)) {
      const SplitRule& r = prop.tree.node(id).rule;
      const bool go_left = data.is_missing(i, r.attribute)
                               ? r.send_missing_left
                               : data.value(i, r.attribute) <= r.threshold;
      id = go_left ? prop.tree.node(id).left : prop.tree.node(id).right;
    }
    const auto it = std::find(below.begin(), below.end(), id);
    new_groups[it - below.begin()].push_back(i);
  }
  for (const auto& g : new_groups)
    if (g.empty()) return prop;  // empty child: auto-reject

  // Same node, same candidate set both directions.
  prop.log_proposal_ratio = log_prob_old - log_prob_new;

  // Depth terms cancel; rule terms at v and at every internal descendant
  // (whose candidate sets may shift with the new partition) do not.
  double old_below = 0.0, new_below = 0.0;
  {
    std::vector<int> left, right;
    split_rows(data, old_rule, rows_v, left, right);
    old_below = subtree_rule_log_prob(tree, tree.node(v).left, data, left) +
                subtree_rule_log_prob(tree, tree.node(v).right, data, right);
    if (!std::isfinite(old_below))
      throw std::logic_error("propose_change: current tree outside prior support");
  }
  {
    std::vector<int> left, right;
    split_rows(data, new_rule, rows_v, left, right);
    new_below =
        subtree_rule_log_prob(prop.tree, prop.tree.node(v).left, data, left) +
        subtree_rule_log_prob(prop.tree, prop.tree.node(v).right, data, right);
  }
  prop.delta_log_prior = (log_prob_new - log_prob_old) + (new_below - old_below);
  if (prop.delta_log_prior == kNegInf) return prop;  // descendant rule invalid

  prop.valid = true;
  prop.old_groups = std::move(old_groups);
  prop.new_groups = std::move(new_groups);
  prop.new_leaf_ids = below;
  return prop;
}

}  // namespace

TreeProposal propose_move(const Tree& tree, const AugmentedDataset& data,
                          const std::vector<int>& leaf_of_row,
                          const Hyperparams& hyper, Rng& rng) {
  const std::vector<int> leaf_ids = tree.leaf_ids();
  const std::vector<std::vector<int>> rows_by_leaf = group_rows(leaf_of_row, leaf_ids);

  const bool stump = tree.num_nodes() == 1;
  const MoveType move =
      stump ? MoveType::kGrow : static_cast<MoveType>(rng.uniform_int(3));
  switch (move) {
    case MoveType::kGrow:
      return propose_grow(tree, data, leaf_ids, rows_by_leaf, hyper, rng);
    case MoveType::kPrune:
      return propose_prune(tree, data, leaf_ids, rows_by_leaf, hyper, rng);
    case MoveType::kChange:
      return propose_change(tree, data, leaf_ids, rows_by_leaf, rng);
  }
  throw std::logic_error("propose_move: unreachable");
}

bool mh_accept(Tree& tree, std::vector<int>& leaf_of_row,
               const TreeProposal& proposal, std::span<const double> residuals,
               double sigma_sq, double sigma_mu_sq, Rng& rng,
               MoveCounters& counters, bool prior_only) {
  const int t = static_cast<int>(proposal.type);
  ++counters.proposed[t];
  if (!proposal.valid) {
    ++counters.auto_rejected[t];
    return false;
  }

  double delta_marginal = 0.0;
  if (!prior_only) {
    auto stats_of = [&](const std::vector<int>& rows) {
      LeafStats s;
      for (int i : rows) s.add(residuals[i]);
      return s;
    };
    for (const auto& g : proposal.old_groups)
      delta_marginal -= log_marginal_leaf(stats_of(g), sigma_sq, sigma_mu_sq);
    for (const auto& g : proposal.new_groups)
      delta_marginal += log_marginal_leaf(stats_of(g), sigma_sq, sigma_mu_sq);
  }

  const double log_ratio =
      delta_marginal + proposal.delta_log_prior + proposal.log_proposal_ratio;
  if (std::isnan(log_ratio)) {
    ++counters.nonfinite_warnings;
    return false;
  }
  const double u = rng.u01();
  if (!(std::log(u) < log_ratio)) return false;

  tree = proposal.tree;
  for (std::size_t g = 0; g < proposal.new_groups.size(); ++g)
    for (int i : proposal.new_groups[g])
      leaf_of_row[i] = proposal.new_leaf_ids[g];
  ++counters.accepted[t];
  return true;
}

ChainState::ChainState(const AugmentedDataset& data, const Hyperparams& hyper,
                       std::uint64_t seed)
    : rng(seed) {
  hyper.validate();
  const int n = data.n_rows();
  require(n >= 2, "ChainState: need at least 2 training rows");

  auto [scaled, t] = scale_response(data.base().response);
  y_scaled = std::move(scaled);
  transform = t;
  degenerate_response = t.degenerate;

  double var = 0.0;
  {
    const double mean =
        std::accumulate(y_scaled.begin(), y_scaled.end(), 0.0) / n;
    for (double y : y_scaled) var += (y - mean) * (y - mean);
    var /= (n - 1);
  }
  var = std::max(var, 1e-12);
  lambda = calibrate_lambda(var, hyper.nu, hyper.q);
  sigma_mu_sq = hyper.sigma_mu_sq();

  ensemble.trees.assign(hyper.m, Tree());
  ensemble.sigma_sq = var;
  residuals = y_scaled;
  partial_residuals.assign(n, 0.0);
  leaf_of_row.assign(hyper.m, std::vector<int>(n, 0));
  tree_fit.assign(hyper.m, std::vector<double>(n, 0.0));
}

void ChainState::check_consistency(const AugmentedDataset& data) const {
  const int n = data.n_rows();
  for (int i = 0; i < n; ++i) {
    double fit = 0.0;
    for (std::size_t j = 0; j < ensemble.trees.size(); ++j) {
      fit += ensemble.trees[j].predict(
          RowView{data.row_values(i), data.row_missing(i)});
      if (ensemble.trees[j].route(
              RowView{data.row_values(i), data.row_missing(i)}) !=
          leaf_of_row[j][i])
        throw std::logic_error("ChainState: leaf_of_row out of sync");
    }
    if (std::abs(fit + residuals[i] - y_scaled[i]) > 1e-9)
      throw std::logic_error("ChainState: residual consistency violated");
  }
}

void gibbs_iteration(ChainState& state, const AugmentedDataset& data,
                     const Hyperparams& hyper, const ChainOptions& options,
                     ChainDiagnostics* diag) {
  const int n = data.n_rows();
  const int m = hyper.m;
  MoveCounters scratch;
  MoveCounters& counters = diag != nullptr ? diag->moves : scratch;

  for (int j = 0; j < m; ++j) {
    Tree& tree = state.ensemble.trees[j];
    std::vector<int>& leaf_of_row = state.leaf_of_row[j];
    std::vector<double>& fit = state.tree_fit[j];

    // Partial residual: response unexplained by the other m-1 trees.
    for (int i = 0; i < n; ++i)
      state.partial_residuals[i] = state.residuals[i] + fit[i];

    const TreeProposal proposal =
        propose_move(tree, data, leaf_of_row, hyper, state.rng);
    mh_accept(tree, leaf_of_row, proposal, state.partial_residuals,
              state.ensemble.sigma_sq, state.sigma_mu_sq, state.rng, counters,
              options.prior_only);

    // Gibbs draw for every leaf value.
    const std::vector<int> leaves = tree.leaf_ids();
    std::vector<LeafStats> stats(leaves.size());
    for (int i = 0; i < n; ++i) {
      for (std::size_t g = 0; g < leaves.size(); ++g) {
        if (leaf_of_row[i] == leaves[g]) {
          stats[g].add(state.partial_residuals[i]);
          break;
        }
      }
    }
    for (std::size_t g = 0; g < leaves.size(); ++g) {
      double value;
      if (options.prior_only) {
        value = state.rng.normal(0.0, std::sqrt(state.sigma_mu_sq));
      } else {
        const LeafPosterior post =
            leaf_posterior(stats[g], state.ensemble.sigma_sq, state.sigma_mu_sq);
        value = state.rng.normal(post.mean, std::sqrt(post.variance));
      }
      tree.set_leaf_value(leaves[g], value);
    }

    for (int i = 0; i < n; ++i) {
      double new_fit = 0.0;
      for (std::size_t g = 0; g < leaves.size(); ++g) {
        if (leaf_of_row[i] == leaves[g]) {
          new_fit = tree.leaf_value(leaves[g]);
          break;
        }
      }
      fit[i] = new_fit;
      state.residuals[i] = state.partial_residuals[i] - new_fit;
    }
  }

  if (!options.prior_only) {
    double sse = 0.0;
    for (double r : state.residuals) sse += r * r;
    const SigmaPosterior post = sigma_posterior(n, sse, hyper.nu, state.lambda);
    state.ensemble.sigma_sq = state.rng.inv_gamma(post.shape, post.scale);
  }
  ++state.iteration;

  if (options.check_invariants) state.check_consistency(data);
#ifndef NDEBUG
  state.check_consistency(data);
#endif
}

PosteriorDraws run_chain(const AugmentedDataset& data, const Hyperparams& hyper,
                         std::uint64_t seed, const ChainOptions& options,
                         ChainDiagnostics* diag) {
  ChainState state(data, hyper, seed);
  if (diag != nullptr) diag->degenerate_response = state.degenerate_response;

  PosteriorDraws out;
  out.transform = state.transform;
  out.hyper = hyper;
  out.schema.columns = data.base().columns;
  out.schema.dummy_map = data.dummy_map();
  out.draws.reserve(hyper.n_post);

  const long total = static_cast<long>(hyper.n_burn) + hyper.n_post;
  for (long it = 0; it < total; ++it) {
    gibbs_iteration(state, data, hyper, options, diag);
    if (diag != nullptr && options.collect_sigma_trace)
      diag->sigma_trace.push_back(state.ensemble.sigma_sq);
    if (it >= hyper.n_burn) out.draws.push_back(state.ensemble);
  }
  return out;
}

PosteriorDraws run_chains(const AugmentedDataset& data, const Hyperparams& hyper,
                          std::uint64_t seed, int n_chains, int threads) {
  require(n_chains >= 1, "run_chains: need at least one chain");
  std::vector<PosteriorDraws> per_chain(n_chains);
  parallel_for(n_chains, threads, [&](int c) {
    const std::uint64_t chain_seed = c == 0 ? seed : mix_seed(seed, c);
    per_chain[c] = run_chain(data, hyper, chain_seed);
  });
  PosteriorDraws pooled = std::move(per_chain[0]);
  for (int c = 1; c < n_chains; ++c)
    for (Ensemble& e : per_chain[c].draws) pooled.draws.push_back(std::move(e));
  return pooled;
}

nlohmann::json PosteriorDraws::to_json() const {
  nlohmann::json jdraws = nlohmann::json::array();
  for (const Ensemble& e : draws) {
    nlohmann::json trees = nlohmann::json::array();
    for (const Tree& t : e.trees) trees.push_back(t.to_json());
    jdraws.push_back({{"sigma_sq", e.sigma_sq}, {"trees", std::move(trees)}});
  }
  nlohmann::json jcols = nlohmann::json::array();
  for (const ColumnInfo& c : schema.columns)
    jcols.push_back({{"name", c.name},
                     {"kind", c.kind == ColumnKind::kNominal ? "nominal" : "numeric"},
                     {"levels", c.levels}});
  return {{"transform",
           {{"y_min", transform.y_min},
            {"y_max", transform.y_max},
            {"degenerate", transform.degenerate}}},
          {"columns", std::move(jcols)},
          {"dummy_map", schema.dummy_map},
          {"hyper", hyper.to_json()},
          {"draws", std::move(jdraws)}};
}

PosteriorDraws PosteriorDraws::from_json(const nlohmann::json& j) {
  PosteriorDraws out;
  out.transform.y_min = j.at("transform").at("y_min").get<double>();
  out.transform.y_max = j.at("transform").at("y_max").get<double>();
  out.transform.degenerate = j.at("transform").at("degenerate").get<bool>();
  for (const auto& jc : j.at("columns")) {
    ColumnInfo c;
    c.name = jc.at("name").get<std::string>();
    c.kind = jc.at("kind").get<std::string>() == "nominal" ? ColumnKind::kNominal
                                                           : ColumnKind::kNumeric;
    c.levels = jc.at("levels").get<std::vector<std::string>>();
    out.schema.columns.push_back(std::move(c));
  }
  out.schema.dummy_map = j.at("dummy_map").get<std::vector<int>>();
  out.hyper = Hyperparams::from_json(j.at("hyper"));
  for (const auto& jd : j.at("draws")) {
    Ensemble e;
    e.sigma_sq = jd.at("sigma_sq").get<double>();
    for (const auto& jt : jd.at("trees")) e.trees.push_back(Tree::from_json(jt));
    out.draws.push_back(std::move(e));
  }
  return out;
}

}  // namespace bartm
