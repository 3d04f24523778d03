#pragma once

// Independent reference interpreter for MIA routing, kept deliberately
// separate from the library's Tree so the two implementations can disagree.

#include <memory>
#include <vector>

#include "bartm/tree.hpp"

namespace testsupport {

struct NaiveNode {
  bool leaf = true;
  double value = 0.0;
  int attribute = -1;
  double threshold = 0.0;
  bool missing_left = true;
  std::unique_ptr<NaiveNode> left, right;
};

inline std::unique_ptr<NaiveNode> naive_from_tree(const bartm::Tree& tree, int id) {
  auto node = std::make_unique<NaiveNode>();
  if (tree.is_leaf(id)) {
    node->value = tree.leaf_value(id);
    return node;
  }
  node->leaf = false;
  node->attribute = tree.node(id).rule.attribute;
  node->threshold = tree.node(id).rule.threshold;
  node->missing_left = tree.node(id).rule.send_missing_left;
  node->left = naive_from_tree(tree, tree.node(id).left);
  node->right = naive_from_tree(tree, tree.node(id).right);
  return node;
}

inline double naive_route(const NaiveNode& node, const std::vector<double>& values,
                          const std::vector<bool>& missing) {
  if (node.leaf) return node.value;
  bool left;
  if (missing[node.attribute]) {
    left = node.missing_left;
  } else if (values[node.attribute] <= node.threshold) {
    left = true;
  } else {
    left = false;
  }
  return left ? naive_route(*node.left, values, missing)
              : naive_route(*node.right, values, missing);
}

}  // namespace testsupport
