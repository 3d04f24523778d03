#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "bartm/data.hpp"
#include "bartm/model.hpp"
#include "bartm/rng.hpp"
#include "bartm/tree.hpp"

#include "json.hpp"

namespace bartm {

enum class MoveType { kGrow = 0, kPrune = 1, kChange = 2 };

struct MoveCounters {
  long proposed[3] = {0, 0, 0};
  long accepted[3] = {0, 0, 0};
  long auto_rejected[3] = {0, 0, 0};  // no valid target / empty child
  long nonfinite_warnings = 0;

  double acceptance_rate(MoveType t) const {
    const int i = static_cast<int>(t);
    return proposed[i] == 0 ? 0.0
                            : static_cast<double>(accepted[i]) / proposed[i];
  }
};

// A structural MH proposal together with everything the accept step needs:
// the proposal-kernel ratio, the structure-prior delta, and the residual row
// groups whose marginal-likelihood terms change.
struct TreeProposal {
  MoveType type = MoveType::kGrow;
  bool valid = false;  // false: auto-reject (no valid rule or empty child)
  Tree tree;
  double log_proposal_ratio = 0.0;  // log q(old|new) - log q(new|old)
  double delta_log_prior = 0.0;     // -infinity when the edit leaves support
  int node = Tree::kNone;
  std::vector<std::vector<int>> old_groups;
  std::vector<std::vector<int>> new_groups;
  std::vector<int> new_leaf_ids;  // parallel to new_groups
};

// Move type uniform over {grow, prune, change}; a stump can only grow.
// Rules are drawn uniform-attribute, uniform-threshold, fair-coin direction
// from the candidate set at the edited node.
TreeProposal propose_move(const Tree& tree, const AugmentedDataset& data,
                          const std::vector<int>& leaf_of_row,
                          const Hyperparams& hyper, Rng& rng);

// Accepts with probability min(1, exp(delta marginal + delta prior +
// proposal ratio)); on acceptance replaces `tree` and patches `leaf_of_row`.
// Returns whether the proposal was accepted. With `prior_only` the marginal
// likelihood term is dropped (stationary distribution = structure prior).
bool mh_accept(Tree& tree, std::vector<int>& leaf_of_row,
               const TreeProposal& proposal, std::span<const double> residuals,
               double sigma_sq, double sigma_mu_sq, Rng& rng,
               MoveCounters& counters, bool prior_only = false);

struct ChainOptions {
  bool prior_only = false;         // drop likelihood terms (diagnostic)
  bool collect_sigma_trace = false;
  bool check_invariants = false;   // residual-consistency audit per iteration
};

struct ChainDiagnostics {
  std::vector<double> sigma_trace;  // every iteration incl. burn-in
  MoveCounters moves;
  bool degenerate_response = false;
};

// Everything one chain owns. The residual invariant — fit(row) + residual =
// scaled response for every row — holds at every iteration boundary.
class ChainState {
 public:
  ChainState(const AugmentedDataset& data, const Hyperparams& hyper,
             std::uint64_t seed);

  Ensemble ensemble;
  std::vector<double> residuals;          // scaled y minus total fit
  std::vector<double> partial_residuals;  // workspace for the active tree
  Rng rng;
  long iteration = 0;

  std::vector<double> y_scaled;
  ResponseTransform transform;
  double lambda = 1.0;
  double sigma_mu_sq = 1.0;
  std::vector<std::vector<int>> leaf_of_row;   // per tree
  std::vector<std::vector<double>> tree_fit;   // per tree
  bool degenerate_response = false;

  void check_consistency(const AugmentedDataset& data) const;
};

// One backfitting sweep: per tree, subtract its fit, one MH structure move,
// Gibbs-redraw its leaves, restore the fit; then the sigma^2 Gibbs draw.
void gibbs_iteration(ChainState& state, const AugmentedDataset& data,
                     const Hyperparams& hyper, const ChainOptions& options,
                     ChainDiagnostics* diag = nullptr);

struct PosteriorDraws {
  std::vector<Ensemble> draws;  // n_post entries after burn-in discard
  ResponseTransform transform;
  ColumnSchema schema;
  Hyperparams hyper;

  nlohmann::json to_json() const;
  static PosteriorDraws from_json(const nlohmann::json& j);
};

PosteriorDraws run_chain(const AugmentedDataset& data, const Hyperparams& hyper,
                         std::uint64_t seed, const ChainOptions& options = {},
                         ChainDiagnostics* diag = nullptr);

// Independent chains with pooled post-burn-in draws. Chain 0 reproduces
// run_chain(seed) exactly; chain c > 0 uses a derived seed.
PosteriorDraws run_chains(const AugmentedDataset& data, const Hyperparams& hyper,
                          std::uint64_t seed, int n_chains, int threads = 1);

}  // namespace bartm
