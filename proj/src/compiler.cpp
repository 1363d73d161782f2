#include "fve/compiler.hpp"

#include <algorithm>
#include <numeric>

#include "fve/error.hpp"

namespace fve {

namespace {

std::string describe(const VarSet& s) {
  std::string out = "{";
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
  return out + "}";
}

// A lowered tensor: node index plus its flattened variable layout.
struct Value {
  int node = -1;
  std::vector<VarId> layout;
};

std::vector<VarId> filter(const std::vector<VarId>& layout, const VarSet& keep) {
  std::vector<VarId> out;
  for (VarId v : layout) {
    if (contains(keep, v)) out.push_back(v);
  }
  return out;
}

class Lowering {
 public:
  Lowering(const Network& net, const JointreeView& view, const VarSet& evidence)
      : net_(net), view_(view), evidence_(evidence) {
    for (VarId v = 0; v < static_cast<VarId>(net.size()); ++v) {
      const auto& info = net.variable(v);
      GraphVariable gv;
      gv.name = info.name;
      gv.cardinality = info.cardinality;
      gv.keep = info.domain;
      graph_.variables.push_back(std::move(gv));
    }
  }

  OpsGraph run() {
    const JointreeNode& host = view_.tree.node(view_.host);
    const VarId q = host.host;
    graph_.query = net_.name(q);
    for (VarId e : evidence_) graph_.inputs.push_back(net_.name(e));

    Value top = leaf_factor(view_.host);
    if (view_.root >= 0) {
      const Value below = lower(view_.root);
      const VarSet& sr = view_.sep[static_cast<std::size_t>(view_.root)];
      const VarSet keep = set_union(sr, VarSet{q});
      top = combine(below, reduce_to(top, keep), sr, keep, VarSet{q});
    }
    top = reduce_to(top, VarSet{q});
    OpNode norm;
    norm.kind = OpKind::normalize;
    norm.inputs = {top.node};
    norm.dims = node(top.node).dims;
    norm.batched = node(top.node).batched;
    graph_.output = push(std::move(norm));
    graph_.validate();
    return std::move(graph_);
  }

 private:
  const OpNode& node(int i) const { return graph_.nodes[static_cast<std::size_t>(i)]; }

  int push(OpNode n) {
    graph_.nodes.push_back(std::move(n));
    return static_cast<int>(graph_.nodes.size()) - 1;
  }

  static std::vector<CompoundAxis> per_var(const std::vector<VarId>& layout) {
    std::vector<CompoundAxis> dims;
    for (VarId v : layout) dims.push_back({v});
    return dims;
  }

  Value leaf_factor(int i) {
    const JointreeNode& leaf = view_.tree.node(i);
    const Cpt& cpt = net_.cpt(leaf.host);
    OpNode p;
    p.kind = OpKind::parameter;
    p.binding = cpt.source;
    p.slice = cpt.source_axes;
    if (p.slice.empty()) {
      for (VarId a : cpt.axes()) {
        SourceAxis ax{net_.name(a), net_.variable(a).cardinality, {}};
        for (int x = 0; x < ax.cardinality; ++x) ax.keep.push_back(x);
        p.slice.push_back(std::move(ax));
      }
    }
    Value v{-1, cpt.axes()};
    p.dims = per_var(v.layout);
    v.node = push(std::move(p));
    if (leaf.primary && contains(evidence_, leaf.host)) {
      OpNode in;
      in.kind = OpKind::input;
      in.binding = net_.name(leaf.host);
      in.dims = {{leaf.host}};
      in.batched = true;
      const Value lambda{push(std::move(in)), {leaf.host}};
      v = elem_multiply(v, lambda);
    }
    return v;
  }

  Value elem_multiply(const Value& a, const Value& b) {
    OpNode m;
    m.kind = OpKind::elem_multiply;
    m.inputs = {a.node, b.node};
    m.dims = per_var(a.layout);
    m.batched = node(a.node).batched || node(b.node).batched;
    // Reuse a's compound grouping when it already is per-variable.
    return {push(std::move(m)), a.layout};
  }

  Value reduce_to(const Value& a, const VarSet& keep) {
    auto layout = filter(a.layout, keep);
    if (layout.size() == a.layout.size()) return a;
    OpNode r;
    r.kind = OpKind::reduce_sum;
    r.inputs = {a.node};
    r.dims = per_var(layout);
    r.batched = node(a.node).batched;
    return {push(std::move(r)), std::move(layout)};
  }

  int reshape(int input, std::vector<CompoundAxis> dims) {
    if (node(input).dims == dims) return input;
    OpNode r;
    r.kind = OpKind::reshape;
    r.inputs = {input};
    r.dims = std::move(dims);
    r.batched = node(input).batched;
    return push(std::move(r));
  }

  // Brings `v` into the layout a ++ b ++ c, grouped as three compound axes.
  int arrange(const Value& v, const std::vector<VarId>& a, const std::vector<VarId>& b,
              const std::vector<VarId>& c) {
    std::vector<VarId> want = a;
    want.insert(want.end(), b.begin(), b.end());
    want.insert(want.end(), c.begin(), c.end());
    int cur = v.node;
    if (want != v.layout) {
      cur = reshape(cur, per_var(v.layout));
      OpNode t;
      t.kind = OpKind::transpose;
      t.inputs = {cur};
      for (VarId w : want) {
        t.perm.push_back(static_cast<int>(std::find(v.layout.begin(), v.layout.end(), w) - v.layout.begin()));
      }
      t.dims = per_var(want);
      t.batched = node(cur).batched;
      cur = push(std::move(t));
    }
    return reshape(cur, {CompoundAxis(a.begin(), a.end()), CompoundAxis(b.begin(), b.end()),
                         CompoundAxis(c.begin(), c.end())});
  }

  Value lower(int i) {
    if (view_.is_leaf(i)) {
      return reduce_to(leaf_factor(i), view_.sep[static_cast<std::size_t>(i)]);
    }
    const auto [c1, c2] = view_.children[static_cast<std::size_t>(i)];
    const Value left = lower(c1);
    const Value right = lower(c2);
    return combine(left, right, view_.sep[static_cast<std::size_t>(c1)],
                   view_.sep[static_cast<std::size_t>(c2)], view_.sep[static_cast<std::size_t>(i)]);
  }

  // Product of two tensors summed down to `out` in one multiply_project.
  Value combine(const Value& left, const Value& right, const VarSet& s1, const VarSet& s2,
                const VarSet& out) {
    const auto part = partition_dims(s1, s2, out);
    // Shared axes follow the larger operand so only the smaller one may need
    // a transpose.
    const auto& big = graph_.element_count(right.node) > graph_.element_count(left.node) ? right : left;
    const auto C = filter(big.layout, part.C);
    const auto X = filter(left.layout, part.X);
    const auto S = filter(big.layout, part.S);
    const auto Y = filter(right.layout, part.Y);
    const int a = arrange(left, C, X, S);
    const int b = arrange(right, C, S, Y);
    OpNode m;
    m.kind = OpKind::multiply_project;
    m.inputs = {a, b};
    m.dims = {CompoundAxis(C.begin(), C.end()), CompoundAxis(X.begin(), X.end()),
              CompoundAxis(Y.begin(), Y.end())};
    m.batched = node(a).batched || node(b).batched;
    std::vector<VarId> layout = C;
    layout.insert(layout.end(), X.begin(), X.end());
    layout.insert(layout.end(), Y.begin(), Y.end());
    return {push(std::move(m)), std::move(layout)};
  }

  const Network& net_;
  const JointreeView& view_;
  VarSet evidence_;
  OpsGraph graph_;
};

}  // namespace

DimPartition partition_dims(const VarSet& s1, const VarSet& s2, const VarSet& si) {
  if (!is_subset(si, set_union(s1, s2)) || !is_subset(s1, set_union(s2, si)) ||
      !is_subset(s2, set_union(s1, si))) {
    throw CompileError("separators " + describe(s1) + " " + describe(s2) + " " + describe(si) +
                       " do not cover each other");
  }
  DimPartition p;
  p.C = set_intersection(set_intersection(s1, s2), si);
  p.X = set_difference(set_intersection(s1, si), s2);
  p.Y = set_difference(set_intersection(s2, si), s1);
  p.S = set_difference(set_intersection(s1, s2), si);
  return p;
}

OpsGraph lower_view(const Network& network, const JointreeView& view, const VarSet& evidence) {
  OpsGraph g = Lowering(network, view, evidence).run();
  // Evidence rows are indexed by declared value; recover declared widths
  // from the parameter slices.
  for (auto& v : g.variables) v.full_cardinality = v.cardinality;
  for (const auto& n : g.nodes) {
    for (const auto& a : n.slice) {
      const int i = g.variable_index(a.var);
      if (i >= 0) g.variables[static_cast<std::size_t>(i)].full_cardinality = a.cardinality;
    }
  }
  return g;
}

namespace {

struct Prepared {
  Network pruned;
  std::size_t network_nodes = 0;
  JointreeView unshrunk;
  JointreeView view;
  VarSet evidence;
};

Prepared prepare(const Network& network, const Query& query, const CompileOptions& options) {
  if (network.size() == 0) throw ValidationError("cannot compile an empty network");
  if (!network.find(query.query)) throw ValidationError("query variable '" + query.query + "' not in network");
  Prepared p;
  p.pruned = prune(network, query, options.prune_values);
  const VarId q = p.pruned.id(query.query);
  p.evidence = make_varset(p.pruned.evidence);
  Jointree tree;
  if (options.functional) {
    const Replication rep = replicate_functional(p.pruned);
    p.network_nodes = rep.network.size();
    const auto order = minfill_order(rep.network);
    tree = build_binary_jointree(rep.network, order)
               .renamed(rep.original, rep.primary, p.pruned.cardinalities());
  } else {
    p.network_nodes = p.pruned.size();
    const auto order = minfill_order(p.pruned);
    tree = build_binary_jointree(p.pruned, order);
  }
  p.unshrunk = make_view(tree, q, options.functional);
  p.view = options.functional ? shrink_sep(p.unshrunk) : p.unshrunk;
  return p;
}

}  // namespace

Compilation compile_query(const Network& network, const Query& query, const CompileOptions& options) {
  Prepared p = prepare(network, query, options);
  Compilation c;
  c.graph = lower_view(p.pruned, p.view, p.evidence);
  c.network_nodes = p.network_nodes;
  c.stats = max_cluster_stats(p.view);
  c.unshrunk_stats = max_cluster_stats(p.unshrunk);
  c.pruned = std::move(p.pruned);
  c.view = std::move(p.view);
  return c;
}

JointreeReport jointree_report(const Network& network, const Query& query, const CompileOptions& options) {
  const Prepared p = prepare(network, query, options);
  return {p.network_nodes, max_cluster_stats(p.view)};
}

}  // namespace fve
