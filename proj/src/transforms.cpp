#include <algorithm>
#include <numeric>

#include "fve/indexing.hpp"
#include "fve/network.hpp"

namespace fve {

namespace {

std::vector<SourceAxis> identity_axes(const Network& net, const Cpt& c) {
  std::vector<SourceAxis> axes;
  for (VarId a : c.axes()) {
    SourceAxis ax;
    ax.var = net.name(a);
    ax.cardinality = net.variable(a).cardinality;
    ax.keep.resize(static_cast<std::size_t>(ax.cardinality));
    std::iota(ax.keep.begin(), ax.keep.end(), 0);
    axes.push_back(std::move(ax));
  }
  return axes;
}

}  // namespace

Network prune(const Network& net, const Query& query, bool values) {
  const std::size_t n = net.size();
  const VarId q = net.id(query.query);
  std::vector<bool> pinned(n, false);
  pinned[static_cast<std::size_t>(q)] = true;
  for (const auto& e : query.evidence) pinned[static_cast<std::size_t>(net.id(e))] = true;

  const auto kids = net.children_lists();
  std::vector<bool> alive(n, true);

  auto drop_barren = [&] {
    bool changed = true;
    while (changed) {
      changed = false;
      for (std::size_t v = n; v-- > 0;) {
        if (!alive[v] || pinned[v]) continue;
        const bool has_child = std::any_of(kids[v].begin(), kids[v].end(),
                                           [&](VarId c) { return alive[static_cast<std::size_t>(c)]; });
        if (!has_child) {
          alive[v] = false;
          changed = true;
        }
      }
    }
  };
  drop_barren();

  // Forward sweep: a value survives iff some row over surviving parent values
  // gives it positive probability. One pass in topological order reaches the
  // fixpoint because parents are final before their children are visited.
  std::vector<std::vector<bool>> possible(n);
  for (VarId v : net.topological_order()) {
    const auto vi = static_cast<std::size_t>(v);
    const Cpt& c = net.cpt(v);
    const int card = net.variable(v).cardinality;
    possible[vi].assign(static_cast<std::size_t>(card), false);
    if (v == q || !values) {
      possible[vi].assign(static_cast<std::size_t>(card), true);
      continue;
    }
    std::vector<int> dims;
    for (VarId p : c.parents) dims.push_back(net.variable(p).cardinality);
    const std::size_t rows = detail::element_count(dims);
    std::vector<int> idx(dims.size(), 0);
    for (std::size_t r = 0; r < rows; ++r) {
      bool ok = true;
      for (std::size_t k = 0; k < dims.size() && ok; ++k) {
        ok = possible[static_cast<std::size_t>(c.parents[k])][static_cast<std::size_t>(idx[k])];
      }
      if (ok) {
        for (int x = 0; x < card; ++x) {
          if (c.values[r * static_cast<std::size_t>(card) + static_cast<std::size_t>(x)] > 0.0) {
            possible[vi][static_cast<std::size_t>(x)] = true;
          }
        }
      }
      for (std::size_t k = dims.size(); k-- > 0;) {
        if (++idx[k] < dims[k]) break;
        idx[k] = 0;
      }
    }
  }

  Network out;
  std::vector<VarId> remap(n, -1);
  std::vector<std::vector<int>> kept(n);
  for (std::size_t v = 0; v < n; ++v) {
    for (std::size_t x = 0; x < possible[v].size(); ++x) {
      if (possible[v][x]) kept[v].push_back(static_cast<int>(x));
    }
    if (!alive[v]) continue;
    const auto id = static_cast<VarId>(v);
    remap[v] = out.add_variable(net.name(id), static_cast<int>(kept[v].size()));
    auto& info = out.variable(remap[v]);
    for (int x : kept[v]) info.domain.push_back(net.variable(id).original_value(x));
    bool identity = true;
    for (std::size_t x = 0; x < info.domain.size(); ++x) identity = identity && info.domain[x] == static_cast<int>(x);
    if (identity && static_cast<int>(info.domain.size()) == net.variable(id).cardinality) info.domain.clear();
  }

  for (std::size_t v = 0; v < n; ++v) {
    if (remap[v] < 0) continue;
    const Cpt& old = net.cpt(static_cast<VarId>(v));
    const auto old_axes = old.axes();
    std::vector<int> old_dims;
    for (VarId a : old_axes) old_dims.push_back(net.variable(a).cardinality);
    const auto old_strides = detail::row_major_strides(old_dims);

    Cpt cpt;
    cpt.child = remap[v];
    cpt.functional = old.functional;
    cpt.trainable = old.trainable;
    cpt.tie_group = old.tie_group;
    cpt.source = old.source;
    cpt.source_axes = old.source_axes.empty() ? identity_axes(net, old) : old.source_axes;

    std::vector<int> new_dims;
    for (std::size_t k = 0; k < old_axes.size(); ++k) {
      auto& sax = cpt.source_axes[k];
      const auto a = static_cast<std::size_t>(old_axes[k]);
      std::vector<int> keep;
      for (int x : kept[a]) keep.push_back(sax.keep[static_cast<std::size_t>(x)]);
      sax.keep = std::move(keep);
      if (k + 1 < old_axes.size()) cpt.parents.push_back(remap[a]);
      new_dims.push_back(static_cast<int>(kept[a].size()));
    }
    cpt.values.resize(detail::element_count(new_dims));
    std::vector<int> idx(new_dims.size(), 0);
    for (std::size_t flat = 0; flat < cpt.values.size(); ++flat) {
      std::size_t off = 0;
      for (std::size_t k = 0; k < idx.size(); ++k) {
        off += old_strides[k] * static_cast<std::size_t>(kept[static_cast<std::size_t>(old_axes[k])][static_cast<std::size_t>(idx[k])]);
      }
      cpt.values[flat] = old.values[off];
      for (std::size_t k = idx.size(); k-- > 0;) {
        if (++idx[k] < new_dims[k]) break;
        idx[k] = 0;
      }
    }
    out.set_cpt(std::move(cpt));
  }
  for (const auto& e : query.evidence) out.evidence.push_back(remap[static_cast<std::size_t>(net.id(e))]);
  return out;
}

Replication replicate_functional(const Network& net) {
  const std::size_t n = net.size();
  const auto kids = net.children_lists();
  const auto topo = net.topological_order();
  // Bottom-up: a functional variable gets one replica per replica of each
  // child, so chains of functional CPTs are split all the way up.
  std::vector<std::size_t> count(n, 1);
  for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
    const auto v = static_cast<std::size_t>(*it);
    std::size_t consumers = 0;
    for (VarId c : kids[v]) consumers += count[static_cast<std::size_t>(c)];
    if (net.cpt(*it).functional && consumers > 1) count[v] = consumers;
  }
  Replication rep;
  std::vector<std::vector<VarId>> replicas(n);
  for (VarId id : topo) {
    const auto v = static_cast<std::size_t>(id);
    for (std::size_t k = 0; k < count[v]; ++k) {
      const std::string name = count[v] == 1 ? net.name(id) : net.name(id) + "#" + std::to_string(k + 1);
      const VarId nid = rep.network.add_variable(name, net.variable(id).cardinality);
      rep.network.variable(nid).domain = net.variable(id).domain;
      replicas[v].push_back(nid);
      rep.original.push_back(id);
      rep.primary.push_back(k == 0);
    }
  }
  // Replicas of a split parent are handed out in order, one per consumer.
  std::vector<std::size_t> next(n, 0);
  for (VarId id : topo) {
    for (VarId r : replicas[static_cast<std::size_t>(id)]) {
      Cpt c = net.cpt(id);
      if (c.source_axes.empty()) c.source_axes = identity_axes(net, c);
      c.child = r;
      for (VarId& p : c.parents) {
        const auto pv = static_cast<std::size_t>(p);
        p = replicas[pv].size() == 1 ? replicas[pv].front() : replicas[pv][next[pv]++];
      }
      rep.network.set_cpt(std::move(c));
    }
  }
  for (VarId e : net.evidence) rep.network.evidence.push_back(replicas[static_cast<std::size_t>(e)].front());
  return rep;
}

}  // namespace fve
