#pragma once

#include "fve/jointree.hpp"
#include "fve/network.hpp"
#include "fve/ops_graph.hpp"

namespace fve {

// C: in both operands and the result; X: left operand and result;
// Y: right operand and result; S: both operands, summed out.
struct DimPartition {
  VarSet C, X, Y, S;
};

DimPartition partition_dims(const VarSet& sep_c1, const VarSet& sep_c2, const VarSet& sep_i);

// Lowers a (possibly shrunk) view of a jointree over `network` into an ops
// graph for the posterior of the view's host variable. Only variables in
// `evidence` get input nodes.
OpsGraph lower_view(const Network& network, const JointreeView& view, const VarSet& evidence);

struct CompileOptions {
  // Replicate functional CPTs and shrink separators.
  bool functional = true;
  // Drop values that zero CPT entries make impossible. Only sound while
  // those zeros stay fixed.
  bool prune_values = true;
};

struct Compilation {
  OpsGraph graph;
  Network pruned;
  std::size_t network_nodes = 0;  // after pruning, and replication when enabled
  ClusterStats stats;             // of the view that was lowered
  ClusterStats unshrunk_stats;    // of the same jointree before shrinking
  JointreeView view;
};

// prune -> (replicate) -> minfill -> binary jointree -> view -> (shrink) -> lower.
Compilation compile_query(const Network& network, const Query& query,
                          const CompileOptions& options = {});

// Jointree statistics only; nothing is lowered.
struct JointreeReport {
  std::size_t network_nodes = 0;
  ClusterStats stats;
};
JointreeReport jointree_report(const Network& network, const Query& query,
                               const CompileOptions& options = {});

}  // namespace fve
