#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "fve/factor.hpp"
#include "fve/network.hpp"

namespace fve {

// Greedy min-fill elimination order on the moral graph; ties go to the
// lowest variable id.
std::vector<VarId> minfill_order(const Network& network);

struct JointreeNode {
  std::vector<int> neighbors;
  // Leaves only. `host` is the variable whose CPT sits at the leaf and
  // `family` that CPT's variables. After replica renaming several leaves can
  // host the same variable; exactly one of them (the primary) also carries
  // the variable's evidence indicator.
  VarId host = -1;
  VarSet family;
  bool functional = false;
  bool primary = true;

  bool is_leaf() const { return host >= 0; }
};

// Binary jointree: every node has one or three neighbours and factors live
// only at leaves. Separators are derived from the leaf families.
class Jointree {
 public:
  Jointree() = default;
  Jointree(std::vector<JointreeNode> nodes, std::vector<int> cardinalities);

  const std::vector<JointreeNode>& nodes() const { return nodes_; }
  const JointreeNode& node(int i) const { return nodes_.at(static_cast<std::size_t>(i)); }
  std::size_t size() const { return nodes_.size(); }
  std::size_t leaf_count() const;
  const std::vector<int>& cardinalities() const { return cards_; }

  const VarSet& sep(int i, int j) const;

  // Maps every leaf's host and family through `original` (replica id ->
  // original id) and recomputes separators.
  Jointree renamed(std::span<const VarId> original, const std::vector<bool>& primary,
                   std::vector<int> original_cardinalities) const;

 private:
  void compute_separators();

  std::vector<JointreeNode> nodes_;
  std::vector<int> cards_;
  std::map<std::pair<int, int>, VarSet> seps_;
};

// Simulates variable elimination under `order`; every multiplication of two
// partial results becomes an internal node.
Jointree build_binary_jointree(const Network& network, std::span<const VarId> order);

// Jointree arranged with the query host on top. Per-node data is indexed by
// jointree node; sep[i] is the separator towards the parent.
struct JointreeView {
  Jointree tree;
  int host = -1;
  int root = -1;  // -1 for a single-leaf tree
  std::vector<int> parent;
  std::vector<std::array<int, 2>> children;  // {-1,-1} at leaves
  std::vector<VarSet> sep;
  std::vector<VarSet> original_sep;
  std::vector<VarSet> fvars;
  std::vector<int> preorder;  // root first; excludes the host

  const std::vector<int>& cardinalities() const { return tree.cardinalities(); }
  bool is_leaf(int i) const { return tree.node(i).is_leaf(); }
};

// `use_functional` = false leaves every fvars set empty, which turns
// shrink_sep into the identity.
JointreeView make_view(const Jointree& tree, VarId query, bool use_functional = true);

JointreeView shrink_sep(const JointreeView& view);

VarSet cluster(const JointreeView& view, int node);
double binary_rank(const VarSet& vars, std::span<const int> cardinalities);
// Product of cardinalities, saturating at UINT64_MAX.
std::uint64_t instantiation_count(const VarSet& vars, std::span<const int> cardinalities);

struct ClusterStats {
  int max_rank_vars = 0;
  double max_binary_rank = 0.0;
};

ClusterStats max_cluster_stats(const JointreeView& view);

}  // namespace fve
