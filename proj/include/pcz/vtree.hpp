#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pcz/circuit.hpp"

namespace pcz {

using NodeId = std::uint32_t;
inline constexpr NodeId kNoNode = 0xffffffffu;

// Binary tree over the variables. Nodes are stored children-before-parent, so
// the root is the last node and a forward sweep is a valid postorder.
class Vtree {
 public:
  struct Node {
    NodeId left = kNoNode;
    NodeId right = kNoNode;
    NodeId parent = kNoNode;
    std::uint32_t variable = 0;  // leaves only
    std::uint32_t leaf_count = 1;
    bool is_leaf() const { return left == kNoNode; }
    friend bool operator==(const Node&, const Node&) = default;
  };

  Vtree() = default;

  // Leaf for `variable`; returns its id.
  NodeId add_leaf(std::uint32_t variable);
  // Internal node over two existing, parentless nodes; returns its id.
  NodeId add_internal(NodeId left, NodeId right);

  std::size_t size() const { return nodes_.size(); }
  std::size_t num_vars() const { return leaf_of_var_.size(); }
  NodeId root() const { return static_cast<NodeId>(nodes_.size() - 1); }
  const Node& node(NodeId v) const { return nodes_[v]; }
  NodeId leaf_of(std::uint32_t variable) const { return leaf_of_var_[variable]; }

  VarSet scope(NodeId v) const;
  // Exchanges the left and right child of an internal node.
  void swap_children(NodeId v);

  // Throws Error(Structural) unless the tree has one root, every variable in
  // [0, num_vars) labels exactly one leaf, and parent links are consistent.
  void check() const;

  bool is_ordered() const;

  friend bool operator==(const Vtree&, const Vtree&) = default;

 private:
  std::vector<Node> nodes_;
  std::vector<NodeId> leaf_of_var_;
};

// Vtree node each circuit unit conforms to.
using ConformanceMap = std::vector<NodeId>;

struct VtreeExtraction {
  Vtree vtree;
  ConformanceMap conformance;
};

// Recovers the vtree of a validated, structured-decomposable circuit whose
// products all have two children. Every product maps to the node that splits
// its scope the same way; sums and inputs map to the node with their scope.
// Throws Error(Contract) on unmet preconditions and Error(Structural) when no
// single vtree is consistent with the products.
VtreeExtraction extract_vtree(const Circuit& circuit);

// Swaps children until every internal node's left subtree has at least as
// many leaves as its right subtree. Equal counts keep the original order.
Vtree order_vtree(const Vtree& vtree);

// Swaps the children of every product unit whose left child does not conform
// to the left child of its vtree node. Used after order_vtree so product child
// lists follow the vtree orientation.
void align_products(Circuit& circuit, const Vtree& vtree, const ConformanceMap& conformance);

// Leaves in inorder (left subtree before right subtree).
std::vector<std::uint32_t> optimal_order(const Vtree& vtree);

// Checks that every node's scope is a contiguous block of `order`; such
// orders are exactly the inorder traversals of the vtree under some choice of
// child orientation.
bool order_is_compatible(const Vtree& vtree, std::span<const std::uint32_t> order);

}  // namespace pcz
