#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "ecgdx/schema.hpp"

namespace ecgdx {

// Flat node storage; index 0 is the root. A node with feature < 0 is a leaf.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  bool default_left = true;
  int left = -1;
  int right = -1;
  double weight = 0.0;  // leaf log-odds increment, learning rate already applied
  double cover = 0.0;   // sum of training hessians reaching the node
  double gain = 0.0;    // split gain; 0 for leaves

  bool is_leaf() const { return feature < 0; }
};

struct Tree {
  std::vector<TreeNode> nodes;

  const TreeNode& root() const { return nodes.front(); }

  // value < threshold goes left, missing follows default_left.
  int route(const TreeNode& node, std::span<const double> row) const {
    const double v = row[static_cast<std::size_t>(node.feature)];
    if (std::isnan(v)) return node.default_left ? node.left : node.right;
    return v < node.threshold ? node.left : node.right;
  }

  int leaf_index(std::span<const double> row) const {
    int i = 0;
    while (!nodes[i].is_leaf()) i = route(nodes[i], row);
    return i;
  }

  double predict(std::span<const double> row) const { return nodes[leaf_index(row)].weight; }

  int depth() const;

  // Bit f set when some split uses feature f.
  std::uint32_t feature_mask() const;
};

}  // namespace ecgdx
