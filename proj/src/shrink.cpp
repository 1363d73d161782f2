#include <algorithm>
#include <cmath>
#include <limits>

#include "fve/jointree.hpp"

namespace fve {

double binary_rank(const VarSet& vars, std::span<const int> cards) {
  double rank = 0.0;
  for (VarId v : vars) rank += std::log2(static_cast<double>(cards[static_cast<std::size_t>(v)]));
  return rank;
}

std::uint64_t instantiation_count(const VarSet& vars, std::span<const int> cards) {
  std::uint64_t count = 1;
  for (VarId v : vars) {
    const auto c = static_cast<std::uint64_t>(cards[static_cast<std::size_t>(v)]);
    if (c != 0 && count > std::numeric_limits<std::uint64_t>::max() / c) {
      return std::numeric_limits<std::uint64_t>::max();
    }
    count *= c;
  }
  return count;
}

JointreeView shrink_sep(const JointreeView& input) {
  JointreeView view = input;
  if (view.root < 0) return view;
  const auto& cards = view.cardinalities();
  const std::size_t n = view.tree.size();

  // Instantiation counts of the separators strictly below each node, used to
  // decide which child gives up a shared functional variable.
  std::vector<double> below(n, 0.0);
  for (std::size_t k = view.preorder.size(); k-- > 0;) {
    const auto i = static_cast<std::size_t>(view.preorder[k]);
    if (view.is_leaf(static_cast<int>(i))) continue;
    for (int c : view.children[i]) {
      const auto ci = static_cast<std::size_t>(c);
      double size = 1.0;
      for (VarId v : view.sep[ci]) size *= cards[static_cast<std::size_t>(v)];
      below[i] += below[ci] + size;
    }
  }

  const VarId hosted = view.tree.node(view.host).host;
  auto& root_sep = view.sep[static_cast<std::size_t>(view.root)];
  if (contains(view.fvars[static_cast<std::size_t>(view.root)], hosted)) {
    root_sep = set_difference(root_sep, {hosted});
  }

  // Parents are always handled before their children, which is all the
  // recursive formulation requires.
  for (int i : view.preorder) {
    const auto ii = static_cast<std::size_t>(i);
    if (view.is_leaf(i)) continue;
    const int c1 = view.children[ii][0];
    const int c2 = view.children[ii][1];
    auto& s1 = view.sep[static_cast<std::size_t>(c1)];
    auto& s2 = view.sep[static_cast<std::size_t>(c2)];
    const VarSet shared = set_intersection(view.fvars[static_cast<std::size_t>(c1)],
                                           view.fvars[static_cast<std::size_t>(c2)]);
    if (!shared.empty()) {
      const bool pick_first = below[static_cast<std::size_t>(c1)] >= below[static_cast<std::size_t>(c2)];
      auto& chosen = pick_first ? s1 : s2;
      chosen = set_difference(chosen, shared);
    }
    s1 = set_intersection(s1, set_union(s2, view.sep[ii]));
    s2 = set_intersection(s2, set_union(s1, view.sep[ii]));
  }
  return view;
}

VarSet cluster(const JointreeView& view, int node) {
  if (view.is_leaf(node)) return view.tree.node(node).family;
  const auto i = static_cast<std::size_t>(node);
  VarSet out = view.sep[i];
  for (int c : view.children[i]) out = set_union(out, view.sep[static_cast<std::size_t>(c)]);
  return out;
}

ClusterStats max_cluster_stats(const JointreeView& view) {
  ClusterStats stats;
  for (std::size_t i = 0; i < view.tree.size(); ++i) {
    const VarSet c = cluster(view, static_cast<int>(i));
    stats.max_rank_vars = std::max(stats.max_rank_vars, static_cast<int>(c.size()));
    stats.max_binary_rank = std::max(stats.max_binary_rank, binary_rank(c, view.cardinalities()));
  }
  return stats;
}

}  // namespace fve
