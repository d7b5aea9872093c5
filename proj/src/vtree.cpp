#include "pcz/vtree.hpp"

#include <algorithm>
#include <string>
#include <unordered_map>

#include "pcz/error.hpp"

namespace pcz {

NodeId Vtree::add_leaf(std::uint32_t variable) {
  Node n;
  n.variable = variable;
  n.leaf_count = 1;
  nodes_.push_back(n);
  if (leaf_of_var_.size() <= variable) leaf_of_var_.resize(variable + 1, kNoNode);
  if (leaf_of_var_[variable] != kNoNode)
    fail(ErrorKind::Structural, "variable " + std::to_string(variable) + " labels two vtree leaves");
  leaf_of_var_[variable] = static_cast<NodeId>(nodes_.size() - 1);
  return leaf_of_var_[variable];
}

NodeId Vtree::add_internal(NodeId left, NodeId right) {
  if (left >= nodes_.size() || right >= nodes_.size() || left == right)
    fail(ErrorKind::Structural, "vtree internal node with invalid children");
  if (nodes_[left].parent != kNoNode || nodes_[right].parent != kNoNode)
    fail(ErrorKind::Structural, "vtree node already has a parent");
  Node n;
  n.left = left;
  n.right = right;
  n.leaf_count = nodes_[left].leaf_count + nodes_[right].leaf_count;
  nodes_.push_back(n);
  const auto id = static_cast<NodeId>(nodes_.size() - 1);
  nodes_[left].parent = id;
  nodes_[right].parent = id;
  return id;
}

VarSet Vtree::scope(NodeId v) const {
  VarSet s(num_vars());
  std::vector<NodeId> stack{v};
  while (!stack.empty()) {
    const NodeId x = stack.back();
    stack.pop_back();
    if (nodes_[x].is_leaf()) {
      s.insert(nodes_[x].variable);
    } else {
      stack.push_back(nodes_[x].left);
      stack.push_back(nodes_[x].right);
    }
  }
  return s;
}

void Vtree::swap_children(NodeId v) {
  if (nodes_[v].is_leaf()) return;
  std::swap(nodes_[v].left, nodes_[v].right);
}

void Vtree::check() const {
  if (nodes_.empty()) fail(ErrorKind::Structural, "empty vtree");
  for (std::size_t var = 0; var < leaf_of_var_.size(); ++var)
    if (leaf_of_var_[var] == kNoNode) fail(ErrorKind::Structural, "variable " + std::to_string(var) + " has no vtree leaf");
  for (NodeId v = 0; v < nodes_.size(); ++v) {
    const Node& n = nodes_[v];
    if ((n.parent == kNoNode) != (v == root())) fail(ErrorKind::Structural, "vtree must have exactly one root");
    if (n.is_leaf()) continue;
    if (nodes_[n.left].parent != v || nodes_[n.right].parent != v)
      fail(ErrorKind::Structural, "inconsistent vtree parent links");
  }
  if (nodes_[root()].leaf_count != num_vars()) fail(ErrorKind::Structural, "vtree leaves do not cover all variables");
}

bool Vtree::is_ordered() const {
  for (const Node& n : nodes_)
    if (!n.is_leaf() && nodes_[n.left].leaf_count < nodes_[n.right].leaf_count) return false;
  return true;
}

VtreeExtraction extract_vtree(const Circuit& c) {
  if (!c.validated() || !c.flags().structured || !c.flags().smooth)
    fail(ErrorKind::Contract, "extract_vtree needs a validated smooth, structured-decomposable circuit");

  std::unordered_map<std::uint32_t, std::pair<std::uint32_t, std::uint32_t>> split;
  for (UnitId u = 0; u < c.num_units(); ++u) {
    if (!c.is_product(u)) continue;
    const auto ch = c.children(u);
    if (ch.size() != 2) fail(ErrorKind::Contract, "extract_vtree needs binary products (unit " + std::to_string(u) + ")");
    const std::pair<std::uint32_t, std::uint32_t> s{c.scope_id(ch[0]), c.scope_id(ch[1])};
    auto [it, inserted] = split.try_emplace(c.scope_id(u), s);
    if (!inserted && it->second != s)
      fail(ErrorKind::Structural, "products with equal scope split it differently (unit " + std::to_string(u) + ")");
  }

  if (c.scope(c.root()).count() != c.num_vars())
    fail(ErrorKind::Structural, "root scope does not cover every variable");

  VtreeExtraction out;
  std::unordered_map<std::uint32_t, NodeId> node_of_scope;

  // Postorder over scopes, iterative: (scope, expanded?)
  std::vector<std::pair<std::uint32_t, bool>> stack{{c.scope_id(c.root()), false}};
  while (!stack.empty()) {
    auto [sid, expanded] = stack.back();
    stack.pop_back();
    const VarSet& scope = c.scope_by_id(sid);
    if (scope.count() == 1) {
      if (node_of_scope.count(sid)) fail(ErrorKind::Structural, "variable scope reached twice; no consistent vtree");
      node_of_scope[sid] = out.vtree.add_leaf(scope.to_vector()[0]);
      continue;
    }
    auto it = split.find(sid);
    if (it == split.end()) fail(ErrorKind::Structural, "multi-variable scope without a product splitting it");
    if (!expanded) {
      if (node_of_scope.count(sid)) fail(ErrorKind::Structural, "scope reached twice; no consistent vtree");
      stack.push_back({sid, true});
      stack.push_back({it->second.second, false});
      stack.push_back({it->second.first, false});
      continue;
    }
    node_of_scope[sid] = out.vtree.add_internal(node_of_scope.at(it->second.first), node_of_scope.at(it->second.second));
  }
  out.vtree.check();

  out.conformance.resize(c.num_units());
  for (UnitId u = 0; u < c.num_units(); ++u) {
    auto it = node_of_scope.find(c.scope_id(u));
    if (it == node_of_scope.end())
      fail(ErrorKind::Structural, "unit " + std::to_string(u) + " conforms to no vtree node");
    out.conformance[u] = it->second;
  }
  return out;
}

Vtree order_vtree(const Vtree& vtree) {
  Vtree out = vtree;
  for (NodeId v = 0; v < out.size(); ++v) {
    const auto& n = out.node(v);
    if (!n.is_leaf() && out.node(n.left).leaf_count < out.node(n.right).leaf_count) out.swap_children(v);
  }
  return out;
}

void align_products(Circuit& c, const Vtree& vtree, const ConformanceMap& conformance) {
  for (UnitId u = 0; u < c.num_units(); ++u) {
    if (!c.is_product(u)) continue;
    const auto& n = vtree.node(conformance[u]);
    const auto ch = c.children(u);
    if (ch.size() != 2 || n.is_leaf()) fail(ErrorKind::Contract, "align_products needs binary products over internal nodes");
    if (conformance[ch[0]] == n.left && conformance[ch[1]] == n.right) continue;
    if (conformance[ch[0]] == n.right && conformance[ch[1]] == n.left) {
      c.swap_product_children(u);
      continue;
    }
    fail(ErrorKind::Structural, "product " + std::to_string(u) + " does not conform to its vtree node");
  }
}

std::vector<std::uint32_t> optimal_order(const Vtree& vtree) {
  std::vector<std::uint32_t> order;
  order.reserve(vtree.num_vars());
  std::vector<NodeId> stack{vtree.root()};
  while (!stack.empty()) {
    const NodeId v = stack.back();
    stack.pop_back();
    const auto& n = vtree.node(v);
    if (n.is_leaf()) {
      order.push_back(n.variable);
    } else {
      stack.push_back(n.right);
      stack.push_back(n.left);
    }
  }
  return order;
}

bool order_is_compatible(const Vtree& vtree, std::span<const std::uint32_t> order) {
  const std::size_t d = vtree.num_vars();
  if (order.size() != d) return false;
  std::vector<std::uint32_t> pos(d, 0xffffffffu);
  for (std::uint32_t i = 0; i < d; ++i) {
    if (order[i] >= d || pos[order[i]] != 0xffffffffu) return false;
    pos[order[i]] = i;
  }
  std::vector<std::uint32_t> lo(vtree.size()), hi(vtree.size());
  for (NodeId v = 0; v < vtree.size(); ++v) {
    const auto& n = vtree.node(v);
    if (n.is_leaf()) {
      lo[v] = hi[v] = pos[n.variable];
    } else {
      lo[v] = std::min(lo[n.left], lo[n.right]);
      hi[v] = std::max(hi[n.left], hi[n.right]);
    }
    if (hi[v] - lo[v] + 1 != n.leaf_count) return false;
  }
  return true;
}

}  // namespace pcz
