#include "bartm/tree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace bartm {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

Tree::Tree() : nodes_(1) {}

int Tree::depth(int id) const {
  int d = 0;
  while (nodes_[id].parent != kNone) {
    id = nodes_[id].parent;
    ++d;
  }
  return d;
}

int Tree::max_depth() const {
  int best = 0;
  for (int id : leaf_ids()) best = std::max(best, depth(id));
  return best;
}

int Tree::num_leaves() const { return static_cast<int>(leaf_ids().size()); }

void Tree::append_subtree_preorder(int id, bool leaves_only, std::vector<int>& out) const {
  const Node& nd = nodes_[id];
  if (nd.left == kNone) {
    out.push_back(id);
    return;
  }
  if (!leaves_only) out.push_back(id);
  append_subtree_preorder(nd.left, leaves_only, out);
  append_subtree_preorder(nd.right, leaves_only, out);
}

std::vector<int> Tree::leaf_ids() const {
  std::vector<int> out;
  append_subtree_preorder(root(), true, out);
  return out;
}

std::vector<int> Tree::internal_ids() const {
  std::vector<int> out;
  if (is_leaf(root())) return out;
  std::vector<int> all;
  append_subtree_preorder(root(), false, all);
  for (int id : all)
    if (!is_leaf(id)) out.push_back(id);
  return out;
}

std::vector<int> Tree::prunable_ids() const {
  std::vector<int> out;
  for (int id : internal_ids())
    if (is_leaf(nodes_[id].left) && is_leaf(nodes_[id].right)) out.push_back(id);
  return out;
}

int Tree::route(const RowView& row) const {
  int id = root();
  while (!is_leaf(id)) {
    const SplitRule& rule = nodes_[id].rule;
    require(rule.attribute >= 0 &&
                rule.attribute < static_cast<int>(row.values.size()) &&
                row.values.size() == row.missing.size(),
            "route: row has fewer columns than the tree splits on");
    bool go_left;
    if (row.missing[rule.attribute] != 0) {
      go_left = rule.send_missing_left;
    } else {
      go_left = row.values[rule.attribute] <= rule.threshold;
    }
    id = go_left ? nodes_[id].left : nodes_[id].right;
  }
  return id;
}

void Tree::set_leaf_value(int id, double v) {
  require(is_leaf(id), "set_leaf_value: not a leaf");
  nodes_[id].leaf_value = v;
}

int Tree::add_node(int parent) {
  int id;
  if (!free_slots_.empty()) {
    id = free_slots_.back();
    free_slots_.pop_back();
    nodes_[id] = Node{};
  } else {
    id = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
  }
  nodes_[id].parent = parent;
  ++n_live_;
  return id;
}

void Tree::grow(int leaf_id, const SplitRule& rule) {
  require(is_leaf(leaf_id), "grow: target is not a leaf");
  Node& nd = nodes_[leaf_id];
  nd.rule = rule;
  nd.leaf_value = 0.0;
  const int left = add_node(leaf_id);
  const int right = add_node(leaf_id);
  nodes_[leaf_id].left = left;  // nd may be stale after add_node reallocation
  nodes_[leaf_id].right = right;
}

void Tree::prune(int internal_id) {
  Node& nd = nodes_[internal_id];
  require(nd.left != kNone && is_leaf(nd.left) && is_leaf(nd.right),
          "prune: target's children must both be leaves");
  free_slots_.push_back(nd.left);
  free_slots_.push_back(nd.right);
  n_live_ -= 2;
  nd.left = kNone;
  nd.right = kNone;
  nd.rule = SplitRule{};
  nd.leaf_value = 0.0;
}

void Tree::change(int internal_id, const SplitRule& rule) {
  require(!is_leaf(internal_id), "change: target is not internal");
  nodes_[internal_id].rule = rule;
}

bool Tree::structurally_equal(const Tree& other) const {
  // Compare logical shape, rules and leaf values; arena layout is free to
  // differ after grow/prune cycles.
  struct Walk {
    const Tree& a;
    const Tree& b;
    bool eq(int ia, int ib) const {
      const bool la = a.is_leaf(ia), lb = b.is_leaf(ib);
      if (la != lb) return false;
      if (la) return a.nodes_[ia].leaf_value == b.nodes_[ib].leaf_value;
      if (!(a.nodes_[ia].rule == b.nodes_[ib].rule)) return false;
      return eq(a.nodes_[ia].left, b.nodes_[ib].left) &&
             eq(a.nodes_[ia].right, b.nodes_[ib].right);
    }
  };
  return Walk{*this, other}.eq(root(), other.root());
}

nlohmann::json Tree::to_json() const {
  // Compact node list in preorder; children referenced by list position.
  std::vector<int> order;
  append_subtree_preorder(root(), false, order);
  std::vector<int> position(nodes_.size(), -1);
  for (std::size_t k = 0; k < order.size(); ++k) position[order[k]] = static_cast<int>(k);

  nlohmann::json nodes = nlohmann::json::array();
  for (int id : order) {
    const Node& nd = nodes_[id];
    if (is_leaf(id)) {
      nodes.push_back({{"value", nd.leaf_value}});
    } else {
      nodes.push_back({{"attribute", nd.rule.attribute},
                       {"threshold", nd.rule.threshold},
                       {"missing_left", nd.rule.send_missing_left},
                       {"left", position[nd.left]},
                       {"right", position[nd.right]}});
    }
  }
  return {{"nodes", nodes}};
}

Tree Tree::from_json(const nlohmann::json& j) {
  const auto& nodes = j.at("nodes");
  require(nodes.is_array() && !nodes.empty(), "Tree::from_json: bad node list");
  Tree tree;
  tree.nodes_.resize(nodes.size());
  tree.n_live_ = static_cast<int>(nodes.size());
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    const auto& nj = nodes[k];
    Node& nd = tree.nodes_[k];
    if (nj.contains("value")) {
      nd.leaf_value = nj.at("value").get<double>();
    } else {
      nd.rule.attribute = nj.at("attribute").get<int>();
      nd.rule.threshold = nj.at("threshold").get<double>();
      nd.rule.send_missing_left = nj.at("missing_left").get<bool>();
      nd.left = nj.at("left").get<int>();
      nd.right = nj.at("right").get<int>();
      require(nd.left > 0 && nd.right > 0 &&
                  nd.left < static_cast<int>(nodes.size()) &&
                  nd.right < static_cast<int>(nodes.size()),
              "Tree::from_json: child index out of range");
      tree.nodes_[nd.left].parent = static_cast<int>(k);
      tree.nodes_[nd.right].parent = static_cast<int>(k);
    }
  }
  return tree;
}

const CandidateSet::AttrThresholds* CandidateSet::find(int attribute) const {
  for (const auto& a : attrs)
    if (a.attribute == attribute) return &a;
  return nullptr;
}

double CandidateSet::log_rule_prob(const SplitRule& rule) const {
  const AttrThresholds* a = find(rule.attribute);
  if (a == nullptr) return kNegInf;
  const bool present =
      std::binary_search(a->thresholds.begin(), a->thresholds.end(), rule.threshold);
  if (!present) return kNegInf;
  return -std::log(static_cast<double>(attrs.size())) -
         std::log(static_cast<double>(a->thresholds.size())) - std::log(2.0);
}

std::vector<double> candidate_thresholds(const AugmentedDataset& data,
                                         std::span<const int> rows, int attribute) {
  std::vector<double> observed;
  observed.reserve(rows.size());
  int n_missing = 0;
  for (int i : rows) {
    if (data.is_missing(i, attribute))
      ++n_missing;
    else
      observed.push_back(data.value(i, attribute));
  }
  std::sort(observed.begin(), observed.end());
  observed.erase(std::unique(observed.begin(), observed.end()), observed.end());
  if (observed.size() >= 2) {
    observed.pop_back();  // exclude the node-wise maximum
    return observed;
  }
  if (observed.size() == 1 && n_missing >= 1) return observed;
  return {};
}

std::vector<int> candidate_attributes(const AugmentedDataset& data,
                                      std::span<const int> rows) {
  std::vector<int> out;
  for (int j = 0; j < data.n_cols(); ++j) {
    bool has_missing = false;
    bool has_first = false;
    double first = 0.0;
    bool two_distinct = false;
    for (int i : rows) {
      if (data.is_missing(i, j)) {
        has_missing = true;
      } else if (!has_first) {
        has_first = true;
        first = data.value(i, j);
      } else if (data.value(i, j) != first) {
        two_distinct = true;
        break;
      }
    }
    if (two_distinct || (has_first && has_missing)) out.push_back(j);
  }
  return out;
}

CandidateSet collect_candidate_rules(const AugmentedDataset& data,
                                     std::span<const int> rows) {
  CandidateSet set;
  for (int j : candidate_attributes(data, rows)) {
    std::vector<double> thresholds = candidate_thresholds(data, rows, j);
    if (!thresholds.empty())
      set.attrs.push_back({j, std::move(thresholds)});
  }
  return set;
}

}  // namespace bartm
