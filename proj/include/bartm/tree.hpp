#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bartm/data.hpp"

#include "json.hpp"

namespace bartm {

// One MIA splitting rule: "x_j <= threshold goes left, otherwise right;
// if x_j is missing, go in the stored direction". Splits on missingness
// itself are threshold splits on a dummy column.
struct SplitRule {
  int attribute = -1;  // column index into the augmented matrix
  double threshold = 0.0;
  bool send_missing_left = true;

  bool operator==(const SplitRule&) const = default;
};

// Covariate row in augmented space (dummy values filled, dummies never
// missing). Spans must cover every attribute a tree may split on.
struct RowView {
  std::span<const double> values;
  std::span<const std::uint8_t> missing;
};

// Binary regression tree stored as an index arena. Node 0 is always the
// root; pruned slots go on a free list and are recycled by grow, so ids of
// surviving nodes are stable across edits.
class Tree {
 public:
  static constexpr int kNone = -1;

  struct Node {
    int parent = kNone;
    int left = kNone;  // kNone in both children <=> leaf
    int right = kNone;
    SplitRule rule;
    double leaf_value = 0.0;
  };

  Tree();  // single leaf with value 0

  int root() const { return 0; }
  bool is_leaf(int id) const { return nodes_[id].left == kNone; }
  const Node& node(int id) const { return nodes_[id]; }
  int depth(int id) const;
  int max_depth() const;     // 0 for a stump
  int num_nodes() const { return n_live_; }
  int num_leaves() const;

  // Preorder ids; callers rely on this order being deterministic.
  std::vector<int> leaf_ids() const;
  std::vector<int> internal_ids() const;
  std::vector<int> prunable_ids() const;  // internal nodes with two leaf children

  // Deterministic descent: present value <= threshold goes left, present
  // value > threshold goes right, missing follows the rule's direction.
  int route(const RowView& row) const;  // reached leaf id
  double predict(const RowView& row) const { return nodes_[route(row)].leaf_value; }

  double leaf_value(int id) const { return nodes_[id].leaf_value; }
  void set_leaf_value(int id, double v);

  // Structural edits. Preconditions are hard errors here; proposal validity
  // (non-empty children) is the sampler's job.
  void grow(int leaf_id, const SplitRule& rule);
  void prune(int internal_id);
  void change(int internal_id, const SplitRule& rule);

  bool structurally_equal(const Tree& other) const;

  nlohmann::json to_json() const;
  static Tree from_json(const nlohmann::json& j);

 private:
  int add_node(int parent);
  void append_subtree_preorder(int id, bool leaves_only, std::vector<int>& out) const;

  std::vector<Node> nodes_;
  std::vector<int> free_slots_;
  int n_live_ = 1;
};

// Rule space at a node: the attributes that admit a valid MIA split for the
// given training rows and, per attribute, the observed values usable as
// thresholds. Columns qualify with >= 2 distinct observed values (max value
// excluded from thresholds so both present-value groups are non-empty), or
// with >= 1 observed value plus >= 1 missing row (the single observed value
// is then the threshold and the split can separate missing from present).
struct CandidateSet {
  struct AttrThresholds {
    int attribute;
    std::vector<double> thresholds;  // ascending
  };
  std::vector<AttrThresholds> attrs;  // ascending attribute order

  bool empty() const { return attrs.empty(); }
  int n_attrs() const { return static_cast<int>(attrs.size()); }
  const AttrThresholds* find(int attribute) const;

  // log of the uniform-attribute x uniform-threshold x fair-coin-direction
  // selection probability; -infinity if the rule is outside this set.
  double log_rule_prob(const SplitRule& rule) const;
};

CandidateSet collect_candidate_rules(const AugmentedDataset& data,
                                     std::span<const int> rows);

// Cheaper single-purpose variants used in the sampler's hot path.
std::vector<int> candidate_attributes(const AugmentedDataset& data,
                                      std::span<const int> rows);
std::vector<double> candidate_thresholds(const AugmentedDataset& data,
                                         std::span<const int> rows, int attribute);

// Sum of m trees plus the noise variance: one posterior draw's worth of model.
struct Ensemble {
  std::vector<Tree> trees;
  double sigma_sq = 1.0;
};

}  // namespace bartm
