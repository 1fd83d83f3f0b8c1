#include "ecgdx/tree.hpp"

#include <algorithm>

namespace ecgdx {

namespace {

int depth_from(const Tree& tree, int index) {
  const auto& node = tree.nodes[static_cast<std::size_t>(index)];
  if (node.is_leaf()) return 0;
  return 1 + std::max(depth_from(tree, node.left), depth_from(tree, node.right));
}

}  // namespace

int Tree::depth() const { return nodes.empty() ? 0 : depth_from(*this, 0); }

std::uint32_t Tree::feature_mask() const {
  std::uint32_t mask = 0;
  for (const auto& node : nodes) {
    if (!node.is_leaf()) mask |= 1u << node.feature;
  }
  return mask;
}

}  // namespace ecgdx
