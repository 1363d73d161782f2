#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "fve/network.hpp"

namespace fve {

enum class OpKind {
  parameter,         // CPT entries read from a parameter slot
  input,             // evidence indicator, one row per batch member
  elem_multiply,     // a * b, vars(b) a subset of vars(a); result in a's layout
  reduce_sum,        // sum out the input variables missing from dims
  multiply_project,  // (C,X,S) x (C,S,Y) -> (C,X,Y), summing S
  reshape,           // regroup axes; shares its input's storage
  transpose,         // permute axes; materialises
  normalize,         // divide every row by its total
};

std::string_view to_string(OpKind kind);
OpKind op_kind_from_string(std::string_view text);

struct GraphVariable {
  std::string name;
  int cardinality = 2;       // after value pruning
  int full_cardinality = 2;  // as declared; evidence rows use this width
  std::vector<int> keep;     // declared value index per value; empty = identity

  friend bool operator==(const GraphVariable&, const GraphVariable&) = default;
};

// A compound axis groups variables (indices into OpsGraph::variables);
// the empty axis has length 1.
using CompoundAxis = std::vector<int>;

struct OpNode {
  OpKind kind = OpKind::parameter;
  std::vector<int> inputs;
  // Axes after the implicit leading batch axis. Row-major over the
  // flattened variable list.
  std::vector<CompoundAxis> dims;
  bool batched = false;  // false: one row shared by every batch member
  std::string binding;   // parameter: slot name; input: evidence variable
  std::vector<SourceAxis> slice;  // parameter: slot axes and kept values
  std::vector<int> perm;          // transpose: output axis k is input axis perm[k]

  friend bool operator==(const OpNode&, const OpNode&) = default;
};

struct OpsGraph {
  std::string query;
  std::vector<GraphVariable> variables;
  std::vector<OpNode> nodes;  // topologically ordered
  int output = -1;
  std::vector<std::string> inputs;  // evidence variables, in input order

  std::size_t element_count(int node) const;
  std::size_t axis_length(const CompoundAxis& axis) const;
  std::vector<int> flat_vars(int node) const;
  int variable_index(std::string_view name) const;  // -1 if absent
  int query_cardinality() const;

  // Throws CompileError on any structural inconsistency.
  void validate() const;

  friend bool operator==(const OpsGraph&, const OpsGraph&) = default;
};

// Flat offset into the parameter slot for every element of a parameter node.
std::vector<std::size_t> parameter_offsets(const OpNode& node);

// Sum of tensor element counts over all nodes, batch axis counted once.
// Reshape nodes are views of their input and are not counted. Saturates at
// UINT64_MAX for graphs that could never be materialised.
std::uint64_t graph_size(const OpsGraph& graph);
// log2 of the largest tensor's element count.
double max_tensor_binary_rank(const OpsGraph& graph);

std::string graph_to_json(const OpsGraph& graph);
OpsGraph graph_from_json(std::string_view text);
OpsGraph load_graph(const std::string& path);
void save_graph(const OpsGraph& graph, const std::string& path);

}  // namespace fve
