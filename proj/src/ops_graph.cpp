#include "fve/ops_graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "fve/error.hpp"
#include "fve/indexing.hpp"

namespace fve {

using nlohmann::json;

namespace {

constexpr std::string_view kKindNames[] = {"parameter",        "input",   "elem_multiply",
                                           "reduce_sum",       "multiply_project",
                                           "reshape",          "transpose", "normalize"};

std::uint64_t saturating_mul(std::uint64_t a, std::uint64_t b) {
  if (a != 0 && b > std::numeric_limits<std::uint64_t>::max() / a) {
    return std::numeric_limits<std::uint64_t>::max();
  }
  return a * b;
}

std::uint64_t saturating_add(std::uint64_t a, std::uint64_t b) {
  return a > std::numeric_limits<std::uint64_t>::max() - b
             ? std::numeric_limits<std::uint64_t>::max()
             : a + b;
}

void fail(int node, const std::string& msg) {
  throw CompileError("ops graph node " + std::to_string(node) + ": " + msg);
}

}  // namespace

std::string_view to_string(OpKind kind) { return kKindNames[static_cast<int>(kind)]; }

OpKind op_kind_from_string(std::string_view text) {
  for (int k = 0; k < 8; ++k) {
    if (kKindNames[k] == text) return static_cast<OpKind>(k);
  }
  throw ValidationError("unknown op kind '" + std::string(text) + "'");
}

std::size_t OpsGraph::axis_length(const CompoundAxis& axis) const {
  std::size_t n = 1;
  for (int v : axis) n *= static_cast<std::size_t>(variables.at(static_cast<std::size_t>(v)).cardinality);
  return n;
}

std::size_t OpsGraph::element_count(int node) const {
  std::size_t n = 1;
  for (const auto& axis : nodes.at(static_cast<std::size_t>(node)).dims) n *= axis_length(axis);
  return n;
}

std::vector<int> OpsGraph::flat_vars(int node) const {
  std::vector<int> out;
  for (const auto& axis : nodes.at(static_cast<std::size_t>(node)).dims) {
    out.insert(out.end(), axis.begin(), axis.end());
  }
  return out;
}

int OpsGraph::variable_index(std::string_view name) const {
  for (std::size_t i = 0; i < variables.size(); ++i) {
    if (variables[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

int OpsGraph::query_cardinality() const {
  const int q = variable_index(query);
  return q < 0 ? 0 : variables[static_cast<std::size_t>(q)].cardinality;
}

void OpsGraph::validate() const {
  const int nv = static_cast<int>(variables.size());
  if (output < 0 || output >= static_cast<int>(nodes.size())) fail(output, "bad output index");
  for (int i = 0; i < static_cast<int>(nodes.size()); ++i) {
    const OpNode& n = nodes[static_cast<std::size_t>(i)];
    for (int in : n.inputs) {
      if (in < 0 || in >= i) fail(i, "inputs must precede the node");
    }
    std::vector<int> flat;
    for (const auto& axis : n.dims) {
      for (int v : axis) {
        if (v < 0 || v >= nv) fail(i, "variable index out of range");
        flat.push_back(v);
      }
    }
    auto sorted = flat;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      fail(i, "variable repeated in dims");
    }
    auto in_flat = [&](int k) { return flat_vars(n.inputs.at(static_cast<std::size_t>(k))); };
    auto in_batched = [&](int k) { return nodes[static_cast<std::size_t>(n.inputs[static_cast<std::size_t>(k)])].batched; };
    auto expect_inputs = [&](std::size_t count) {
      if (n.inputs.size() != count) fail(i, "wrong number of inputs");
    };
    switch (n.kind) {
      case OpKind::parameter: {
        expect_inputs(0);
        if (n.batched) fail(i, "parameters are unbatched");
        std::vector<int> expect;
        for (const auto& a : n.slice) {
          const int v = variable_index(a.var);
          if (v < 0) fail(i, "slice names unknown variable " + a.var);
          if (static_cast<int>(a.keep.size()) != variables[static_cast<std::size_t>(v)].cardinality) {
            fail(i, "slice length does not match cardinality of " + a.var);
          }
          expect.push_back(v);
        }
        if (expect != flat) fail(i, "parameter dims do not follow its slice");
        break;
      }
      case OpKind::input:
        expect_inputs(0);
        if (flat.size() != 1 || variables[static_cast<std::size_t>(flat[0])].name != n.binding) {
          fail(i, "input must span exactly its evidence variable");
        }
        break;
      case OpKind::elem_multiply: {
        expect_inputs(2);
        if (in_flat(0) != flat) fail(i, "elem_multiply keeps its first operand's layout");
        auto b = in_flat(1);
        for (int v : b) {
          if (std::find(flat.begin(), flat.end(), v) == flat.end()) fail(i, "second operand not covered");
        }
        if (n.batched != (in_batched(0) || in_batched(1))) fail(i, "batch flag");
        break;
      }
      case OpKind::reduce_sum: {
        expect_inputs(1);
        auto a = in_flat(0);
        std::vector<int> kept;
        for (int v : a) {
          if (std::find(flat.begin(), flat.end(), v) != flat.end()) kept.push_back(v);
        }
        if (kept != flat) fail(i, "reduce_sum must keep a subsequence of its input");
        if (n.batched != in_batched(0)) fail(i, "batch flag");
        break;
      }
      case OpKind::reshape:
        expect_inputs(1);
        if (in_flat(0) != flat) fail(i, "reshape must keep the flattened layout");
        if (n.batched != in_batched(0)) fail(i, "batch flag");
        break;
      case OpKind::transpose: {
        expect_inputs(1);
        const auto& in = nodes[static_cast<std::size_t>(n.inputs[0])];
        if (n.perm.size() != in.dims.size() || n.dims.size() != in.dims.size()) fail(i, "bad permutation");
        for (std::size_t k = 0; k < n.perm.size(); ++k) {
          const int p = n.perm[k];
          if (p < 0 || p >= static_cast<int>(in.dims.size())) fail(i, "bad permutation");
          if (n.dims[k] != in.dims[static_cast<std::size_t>(p)]) fail(i, "dims do not match permutation");
        }
        if (n.batched != in.batched) fail(i, "batch flag");
        break;
      }
      case OpKind::multiply_project: {
        expect_inputs(2);
        const auto& a = nodes[static_cast<std::size_t>(n.inputs[0])];
        const auto& b = nodes[static_cast<std::size_t>(n.inputs[1])];
        if (a.dims.size() != 3 || b.dims.size() != 3 || n.dims.size() != 3) fail(i, "operands must be 3-axis");
        if (a.dims[0] != b.dims[0] || a.dims[2] != b.dims[1] || n.dims[0] != a.dims[0] ||
            n.dims[1] != a.dims[1] || n.dims[2] != b.dims[2]) {
          fail(i, "operand axes do not form (C,X,S) x (C,S,Y)");
        }
        if (n.batched != (a.batched || b.batched)) fail(i, "batch flag");
        break;
      }
      case OpKind::normalize:
        expect_inputs(1);
        if (in_flat(0) != flat) fail(i, "normalize keeps its layout");
        if (n.batched != in_batched(0)) fail(i, "batch flag");
        break;
    }
  }
  const int q = variable_index(query);
  if (q < 0 || flat_vars(output) != std::vector<int>{q}) fail(output, "output must span the query");
  for (const auto& name : inputs) {
    if (variable_index(name) < 0) throw CompileError("input names unknown variable " + name);
  }
}

std::vector<std::size_t> parameter_offsets(const OpNode& node) {
  std::vector<int> slot_dims, dims;
  for (const auto& a : node.slice) {
    slot_dims.push_back(a.cardinality);
    dims.push_back(static_cast<int>(a.keep.size()));
  }
  const auto strides = detail::row_major_strides(slot_dims);
  std::vector<std::size_t> map(detail::element_count(dims));
  std::vector<int> idx(dims.size(), 0);
  for (std::size_t e = 0; e < map.size(); ++e) {
    std::size_t off = 0;
    for (std::size_t k = 0; k < dims.size(); ++k) {
      off += strides[k] * static_cast<std::size_t>(node.slice[k].keep[static_cast<std::size_t>(idx[k])]);
    }
    map[e] = off;
    for (std::size_t k = dims.size(); k-- > 0;) {
      if (++idx[k] < dims[k]) break;
      idx[k] = 0;
    }
  }
  return map;
}

std::uint64_t graph_size(const OpsGraph& graph) {
  std::uint64_t total = 0;
  for (const auto& n : graph.nodes) {
    if (n.kind == OpKind::reshape) continue;
    std::uint64_t count = 1;
    for (const auto& axis : n.dims) {
      for (int v : axis) {
        count = saturating_mul(count, static_cast<std::uint64_t>(
                                          graph.variables[static_cast<std::size_t>(v)].cardinality));
      }
    }
    total = saturating_add(total, count);
  }
  return total;
}

double max_tensor_binary_rank(const OpsGraph& graph) {
  double best = 0.0;
  for (const auto& n : graph.nodes) {
    double r = 0.0;
    for (const auto& axis : n.dims) {
      for (int v : axis) r += std::log2(graph.variables[static_cast<std::size_t>(v)].cardinality);
    }
    best = std::max(best, r);
  }
  return best;
}

std::string graph_to_json(const OpsGraph& graph) {
  json doc;
  doc["query"] = graph.query;
  doc["output"] = graph.output;
  doc["inputs"] = graph.inputs;
  json vars = json::array();
  for (const auto& v : graph.variables) {
    json jv{{"name", v.name}, {"cardinality", v.cardinality}, {"full_cardinality", v.full_cardinality}};
    if (!v.keep.empty()) jv["keep"] = v.keep;
    vars.push_back(std::move(jv));
  }
  doc["variables"] = std::move(vars);
  json nodes = json::array();
  for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
    const OpNode& n = graph.nodes[i];
    json jn{{"index", i}, {"kind", to_string(n.kind)}, {"inputs", n.inputs}, {"batched", n.batched}};
    json dims = json::array();
    for (const auto& axis : n.dims) {
      json ja = json::array();
      for (int v : axis) {
        ja.push_back({{"var", v}, {"cardinality", graph.variables[static_cast<std::size_t>(v)].cardinality}});
      }
      dims.push_back(std::move(ja));
    }
    jn["dims"] = std::move(dims);
    if (!n.binding.empty()) jn["binding"] = n.binding;
    if (!n.slice.empty()) {
      json slice = json::array();
      for (const auto& a : n.slice) {
        slice.push_back({{"var", a.var}, {"cardinality", a.cardinality}, {"keep", a.keep}});
      }
      jn["slice"] = std::move(slice);
    }
    if (!n.perm.empty()) jn["perm"] = n.perm;
    nodes.push_back(std::move(jn));
  }
  doc["nodes"] = std::move(nodes);
  return doc.dump(1);
}

OpsGraph graph_from_json(std::string_view text) {
  OpsGraph g;
  try {
    const json doc = json::parse(text);
    g.query = doc.at("query").get<std::string>();
    g.output = doc.at("output").get<int>();
    g.inputs = doc.at("inputs").get<std::vector<std::string>>();
    for (const auto& jv : doc.at("variables")) {
      GraphVariable v;
      v.name = jv.at("name").get<std::string>();
      v.cardinality = jv.at("cardinality").get<int>();
      v.full_cardinality = jv.at("full_cardinality").get<int>();
      if (jv.contains("keep")) v.keep = jv.at("keep").get<std::vector<int>>();
      g.variables.push_back(std::move(v));
    }
    for (const auto& jn : doc.at("nodes")) {
      if (jn.at("index").get<std::size_t>() != g.nodes.size()) {
        throw ValidationError("ops graph nodes must be listed in index order");
      }
      OpNode n;
      n.kind = op_kind_from_string(jn.at("kind").get<std::string>());
      n.inputs = jn.at("inputs").get<std::vector<int>>();
      n.batched = jn.at("batched").get<bool>();
      for (const auto& ja : jn.at("dims")) {
        CompoundAxis axis;
        for (const auto& e : ja) axis.push_back(e.at("var").get<int>());
        n.dims.push_back(std::move(axis));
      }
      if (jn.contains("binding")) n.binding = jn.at("binding").get<std::string>();
      if (jn.contains("slice")) {
        for (const auto& ja : jn.at("slice")) {
          n.slice.push_back({ja.at("var").get<std::string>(), ja.at("cardinality").get<int>(),
                             ja.at("keep").get<std::vector<int>>()});
        }
      }
      if (jn.contains("perm")) n.perm = jn.at("perm").get<std::vector<int>>();
      g.nodes.push_back(std::move(n));
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed ops graph file: ") + e.what());
  }
  try {
    g.validate();
  } catch (const CompileError& e) {
    throw ValidationError(e.what());
  }
  return g;
}

OpsGraph load_graph(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return graph_from_json(ss.str());
}

void save_graph(const OpsGraph& graph, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path);
  out << graph_to_json(graph) << '\n';
}

}  // namespace fve
