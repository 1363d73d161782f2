#include "fve/jointree.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <string>

namespace fve {

namespace {

class BitMatrix {
 public:
  explicit BitMatrix(std::size_t n) : n_(n), words_((n + 63) / 64), bits_(n * words_, 0) {}

  void set(std::size_t i, std::size_t j) {
    bits_[i * words_ + j / 64] |= std::uint64_t{1} << (j % 64);
  }
  void clear(std::size_t i, std::size_t j) {
    bits_[i * words_ + j / 64] &= ~(std::uint64_t{1} << (j % 64));
  }
  bool test(std::size_t i, std::size_t j) const {
    return (bits_[i * words_ + j / 64] >> (j % 64)) & 1U;
  }
  const std::uint64_t* row(std::size_t i) const { return &bits_[i * words_]; }
  std::size_t words() const { return words_; }

  template <typename Fn>
  void for_each(std::size_t i, Fn&& fn) const {
    const std::uint64_t* r = row(i);
    for (std::size_t w = 0; w < words_; ++w) {
      std::uint64_t x = r[w];
      while (x) {
        fn(w * 64 + static_cast<std::size_t>(std::countr_zero(x)));
        x &= x - 1;
      }
    }
  }

 private:
  std::size_t n_;
  std::size_t words_;
  std::vector<std::uint64_t> bits_;
};

// Number of missing edges among the neighbours of v.
std::size_t fill_in(const BitMatrix& adj, std::size_t v) {
  std::size_t missing = 0;
  std::size_t degree = 0;
  const std::uint64_t* nv = adj.row(v);
  for (std::size_t w = 0; w < adj.words(); ++w) degree += static_cast<std::size_t>(std::popcount(nv[w]));
  adj.for_each(v, [&](std::size_t u) {
    const std::uint64_t* nu = adj.row(u);
    std::size_t common = 0;
    for (std::size_t w = 0; w < adj.words(); ++w) common += static_cast<std::size_t>(std::popcount(nv[w] & nu[w]));
    missing += degree - 1 - common;
  });
  return missing / 2;
}

}  // namespace

std::vector<VarId> minfill_order(const Network& net) {
  const std::size_t n = net.size();
  BitMatrix adj(n);
  auto connect = [&](std::size_t a, std::size_t b) {
    if (a == b) return;
    adj.set(a, b);
    adj.set(b, a);
  };
  for (std::size_t v = 0; v < n; ++v) {
    const auto& parents = net.cpt(static_cast<VarId>(v)).parents;
    for (std::size_t i = 0; i < parents.size(); ++i) {
      connect(v, static_cast<std::size_t>(parents[i]));
      for (std::size_t j = i + 1; j < parents.size(); ++j) {
        connect(static_cast<std::size_t>(parents[i]), static_cast<std::size_t>(parents[j]));
      }
    }
  }
  std::vector<std::size_t> fill(n);
  for (std::size_t v = 0; v < n; ++v) fill[v] = fill_in(adj, v);
  std::vector<bool> done(n, false);
  std::vector<VarId> order;
  order.reserve(n);
  std::vector<std::size_t> nbrs;
  std::vector<bool> dirty(n, false);
  for (std::size_t step = 0; step < n; ++step) {
    std::size_t best = n;
    for (std::size_t v = 0; v < n; ++v) {
      if (!done[v] && (best == n || fill[v] < fill[best])) best = v;
    }
    order.push_back(static_cast<VarId>(best));
    done[best] = true;
    nbrs.clear();
    adj.for_each(best, [&](std::size_t u) { nbrs.push_back(u); });
    for (std::size_t i = 0; i < nbrs.size(); ++i) {
      for (std::size_t j = i + 1; j < nbrs.size(); ++j) connect(nbrs[i], nbrs[j]);
    }
    for (std::size_t u : nbrs) {
      adj.clear(u, best);
      adj.clear(best, u);
    }
    std::vector<std::size_t> touched;
    for (std::size_t u : nbrs) {
      if (!dirty[u]) {
        dirty[u] = true;
        touched.push_back(u);
      }
      adj.for_each(u, [&](std::size_t w) {
        if (!dirty[w]) {
          dirty[w] = true;
          touched.push_back(w);
        }
      });
    }
    for (std::size_t u : touched) {
      fill[u] = fill_in(adj, u);
      dirty[u] = false;
    }
  }
  return order;
}

Jointree::Jointree(std::vector<JointreeNode> nodes, std::vector<int> cardinalities)
    : nodes_(std::move(nodes)), cards_(std::move(cardinalities)) {
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const auto deg = nodes_[i].neighbors.size();
    if (nodes_.size() > 1 && deg != 1 && deg != 3) {
      throw SchemaError("jointree node " + std::to_string(i) + " has " + std::to_string(deg) +
                        " neighbours");
    }
    if ((deg == 1 || nodes_.size() == 1) != nodes_[i].is_leaf()) {
      throw SchemaError("jointree node " + std::to_string(i) + " leaf/host mismatch");
    }
  }
  compute_separators();
}

std::size_t Jointree::leaf_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes_.begin(), nodes_.end(), [](const JointreeNode& n) { return n.is_leaf(); }));
}

const VarSet& Jointree::sep(int i, int j) const {
  auto it = seps_.find({std::min(i, j), std::max(i, j)});
  if (it == seps_.end()) throw SchemaError("no jointree edge between the given nodes");
  return it->second;
}

void Jointree::compute_separators() {
  seps_.clear();
  const std::size_t n = nodes_.size();
  if (n < 2) return;
  std::vector<int> total(cards_.size(), 0);
  for (const auto& node : nodes_) {
    for (VarId v : node.family) ++total[static_cast<std::size_t>(v)];
  }
  // Root anywhere; post-order merge of per-subtree leaf counts. A variable
  // whose count reaches its total is entirely inside the subtree and is
  // dropped, so what remains is exactly the separator to the parent.
  std::vector<int> parent(n, -1);
  std::vector<int> order;
  order.reserve(n);
  std::vector<int> stack{0};
  parent[0] = 0;
  while (!stack.empty()) {
    const int x = stack.back();
    stack.pop_back();
    order.push_back(x);
    for (int y : nodes_[static_cast<std::size_t>(x)].neighbors) {
      if (parent[static_cast<std::size_t>(y)] == -1) {
        parent[static_cast<std::size_t>(y)] = x;
        stack.push_back(y);
      }
    }
  }
  using Counts = std::vector<std::pair<VarId, int>>;
  std::vector<Counts> up(n);
  for (std::size_t k = order.size(); k-- > 0;) {
    const int x = order[k];
    const auto xi = static_cast<std::size_t>(x);
    Counts acc;
    for (VarId v : nodes_[xi].family) acc.emplace_back(v, 1);
    for (int y : nodes_[xi].neighbors) {
      if (y == parent[xi] && x != 0) continue;
      if (x == 0 && parent[static_cast<std::size_t>(y)] != 0) continue;
      Counts merged;
      auto& other = up[static_cast<std::size_t>(y)];
      std::size_t a = 0;
      std::size_t b = 0;
      while (a < acc.size() || b < other.size()) {
        if (b == other.size() || (a < acc.size() && acc[a].first < other[b].first)) {
          merged.push_back(acc[a++]);
        } else if (a == acc.size() || other[b].first < acc[a].first) {
          merged.push_back(other[b++]);
        } else {
          merged.emplace_back(acc[a].first, acc[a].second + other[b].second);
          ++a;
          ++b;
        }
      }
      acc = std::move(merged);
      Counts().swap(other);
    }
    std::erase_if(acc, [&](const auto& vc) { return vc.second == total[static_cast<std::size_t>(vc.first)]; });
    if (x != 0) {
      VarSet s;
      s.reserve(acc.size());
      for (const auto& vc : acc) s.push_back(vc.first);
      const int p = parent[xi];
      seps_[{std::min(x, p), std::max(x, p)}] = std::move(s);
    }
    up[xi] = std::move(acc);
  }
}

Jointree Jointree::renamed(std::span<const VarId> original, const std::vector<bool>& primary,
                           std::vector<int> original_cardinalities) const {
  std::vector<JointreeNode> nodes = nodes_;
  for (auto& node : nodes) {
    if (!node.is_leaf()) continue;
    const auto h = static_cast<std::size_t>(node.host);
    node.primary = primary[h];
    node.host = original[h];
    std::vector<VarId> fam;
    for (VarId v : node.family) fam.push_back(original[static_cast<std::size_t>(v)]);
    node.family = make_varset(std::move(fam));
  }
  return Jointree(std::move(nodes), std::move(original_cardinalities));
}

Jointree build_binary_jointree(const Network& net, std::span<const VarId> order) {
  const std::size_t n = net.size();
  if (order.size() != n) throw SchemaError("elimination order must cover every variable");
  {
    std::vector<VarId> sorted(order.begin(), order.end());
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < n; ++i) {
      if (sorted[i] != static_cast<VarId>(i)) throw SchemaError("elimination order is not a permutation");
    }
  }
  const auto cards = net.cardinalities();
  struct Item {
    int node;
    VarSet vars;
  };
  std::vector<JointreeNode> nodes(n);
  std::vector<std::array<int, 2>> kids;  // internal node i lives at n + i
  std::vector<Item> pool;
  for (std::size_t v = 0; v < n; ++v) {
    const auto id = static_cast<VarId>(v);
    nodes[v].host = id;
    nodes[v].family = make_varset(net.cpt(id).axes());
    nodes[v].functional = net.cpt(id).functional;
    pool.push_back({static_cast<int>(v), nodes[v].family});
  }
  auto weight = [&](const VarSet& s) { return binary_rank(s, cards); };
  auto combine = [&](Item a, Item b) {
    const int id = static_cast<int>(n + kids.size());
    kids.push_back({a.node, b.node});
    return Item{id, set_union(a.vars, b.vars)};
  };
  auto reduce_bucket = [&](std::vector<Item> bucket) {
    // Smallest pair first, like Huffman merging; ties by node index.
    while (bucket.size() > 1) {
      std::sort(bucket.begin(), bucket.end(), [&](const Item& a, const Item& b) {
        const double wa = weight(a.vars);
        const double wb = weight(b.vars);
        return wa != wb ? wa < wb : a.node < b.node;
      });
      Item merged = combine(bucket[0], bucket[1]);
      bucket.erase(bucket.begin(), bucket.begin() + 2);
      bucket.push_back(std::move(merged));
    }
    return bucket.front();
  };
  for (VarId v : order) {
    std::vector<Item> bucket;
    std::vector<Item> rest;
    for (auto& item : pool) (contains(item.vars, v) ? bucket : rest).push_back(std::move(item));
    pool = std::move(rest);
    if (bucket.empty()) continue;
    Item merged = reduce_bucket(std::move(bucket));
    merged.vars = set_difference(merged.vars, {v});
    pool.push_back(std::move(merged));
  }
  if (pool.size() > 1) {
    std::sort(pool.begin(), pool.end(), [](const Item& a, const Item& b) { return a.node < b.node; });
    reduce_bucket(std::move(pool));
  }

  // The last combination has only two neighbours; splice it out.
  nodes.resize(n + kids.size());
  for (std::size_t i = 0; i < kids.size(); ++i) {
    const int self = static_cast<int>(n + i);
    for (int c : kids[i]) {
      nodes[static_cast<std::size_t>(self)].neighbors.push_back(c);
      nodes[static_cast<std::size_t>(c)].neighbors.push_back(self);
    }
  }
  if (!kids.empty()) {
    const int top = static_cast<int>(n + kids.size() - 1);
    const auto [a, b] = kids.back();
    auto& na = nodes[static_cast<std::size_t>(a)].neighbors;
    auto& nb = nodes[static_cast<std::size_t>(b)].neighbors;
    std::replace(na.begin(), na.end(), top, b);
    std::replace(nb.begin(), nb.end(), top, a);
    nodes.pop_back();
  }
  return Jointree(std::move(nodes), cards);
}

JointreeView make_view(const Jointree& tree, VarId query, bool use_functional) {
  JointreeView view;
  view.tree = tree;
  const std::size_t n = tree.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& node = tree.node(static_cast<int>(i));
    if (node.is_leaf() && node.host == query && node.primary) view.host = static_cast<int>(i);
  }
  if (view.host < 0) throw SchemaError("query variable is not hosted by the jointree");
  view.parent.assign(n, -1);
  view.children.assign(n, {-1, -1});
  view.sep.assign(n, {});
  view.fvars.assign(n, {});
  if (n == 1) return view;
  view.root = tree.node(view.host).neighbors.front();
  view.parent[static_cast<std::size_t>(view.root)] = view.host;
  std::vector<int> stack{view.root};
  while (!stack.empty()) {
    const int x = stack.back();
    stack.pop_back();
    view.preorder.push_back(x);
    const auto xi = static_cast<std::size_t>(x);
    view.sep[xi] = tree.sep(x, view.parent[xi]);
    int k = 0;
    for (int y : tree.node(x).neighbors) {
      if (y == view.parent[xi]) continue;
      view.parent[static_cast<std::size_t>(y)] = x;
      view.children[xi][static_cast<std::size_t>(k++)] = y;
    }
    // Push c2 first so c1's subtree comes first in the preorder.
    if (k == 2) {
      stack.push_back(view.children[xi][1]);
      stack.push_back(view.children[xi][0]);
    }
  }
  for (std::size_t k = view.preorder.size(); k-- > 0;) {
    const int x = view.preorder[k];
    const auto xi = static_cast<std::size_t>(x);
    const auto& node = tree.node(x);
    if (node.is_leaf()) {
      if (use_functional && node.functional) view.fvars[xi] = {node.host};
    } else {
      view.fvars[xi] = set_union(view.fvars[static_cast<std::size_t>(view.children[xi][0])],
                                 view.fvars[static_cast<std::size_t>(view.children[xi][1])]);
    }
  }
  view.original_sep = view.sep;
  return view;
}

}  // namespace fve
