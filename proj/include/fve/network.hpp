#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "fve/factor.hpp"

namespace fve {

struct VariableInfo {
  std::string name;
  int cardinality = 2;
  // Original value index of each current value; empty means the identity.
  // Only value pruning produces non-identity domains.
  std::vector<int> domain;

  int original_value(int v) const { return domain.empty() ? v : domain[v]; }
  friend bool operator==(const VariableInfo&, const VariableInfo&) = default;
};

// One axis of the parameter slot a CPT reads from. Pruning slices CPTs; the
// slice remembers which original values survive so trained parameters can
// still be shared across the sliced copies.
struct SourceAxis {
  std::string var;
  int cardinality = 2;    // cardinality in the declared network
  std::vector<int> keep;  // original value indices present in the CPT

  friend bool operator==(const SourceAxis&, const SourceAxis&) = default;
};

struct Cpt {
  VarId child = 0;
  std::vector<VarId> parents;
  // Row-major over (parents..., child); the child varies fastest.
  std::vector<double> values;
  bool functional = false;
  bool trainable = true;
  std::string tie_group;  // empty when untied

  // Parameter slot identity: the child's name in the declared network, and
  // the slot's axes (parents..., child). Empty axes mean "identity".
  std::string source;
  std::vector<SourceAxis> source_axes;

  std::vector<VarId> axes() const;

  friend bool operator==(const Cpt&, const Cpt&) = default;
};

class Network {
 public:
  VarId add_variable(std::string name, int cardinality);
  void set_cpt(Cpt cpt);

  std::size_t size() const { return vars_.size(); }
  const VariableInfo& variable(VarId id) const { return vars_.at(static_cast<std::size_t>(id)); }
  VariableInfo& variable(VarId id) { return vars_.at(static_cast<std::size_t>(id)); }
  Variable var(VarId id) const { return {id, variable(id).cardinality}; }
  const std::string& name(VarId id) const { return variable(id).name; }
  std::optional<VarId> find(std::string_view name) const;
  VarId id(std::string_view name) const;  // throws ValidationError

  bool has_cpt(VarId id) const;
  const Cpt& cpt(VarId id) const;
  Cpt& cpt(VarId id);
  Factor cpt_factor(VarId id) const;

  std::vector<VarId> children(VarId id) const;
  std::vector<std::vector<VarId>> children_lists() const;
  // Parents before children; ValidationError on a cycle.
  std::vector<VarId> topological_order() const;
  std::vector<int> cardinalities() const;

  // Cycle, shape, normalisation and functional-flag checks.
  void validate() const;

  // Declared evidence indicators (the default compiled inputs).
  std::vector<VarId> evidence;

  friend bool operator==(const Network&, const Network&);

 private:
  std::vector<VariableInfo> vars_;
  std::vector<std::optional<Cpt>> cpts_;
  std::unordered_map<std::string, VarId> index_;
};

// Query variable plus the ordered evidence variables that become inputs.
struct Query {
  std::string query;
  std::vector<std::string> evidence;
};

Network load_network(const std::string& path);
void save_network(const Network& network, const std::string& path);
Network network_from_json(std::string_view text);
std::string network_to_json(const Network& network);

// Barren-node and forward value pruning for a query. Pruned values are
// dropped from domains and CPTs; a variable may end up with one value. With
// `values` false only barren nodes are removed.
Network prune(const Network& network, const Query& query, bool values = true);

struct Replication {
  Network network;
  // For every variable of `network`, the id of the variable it stands for in
  // the input network.
  std::vector<VarId> original;
  // False for the second and later replicas of a functional variable.
  std::vector<bool> primary;
};

// Replaces every functional variable that feeds n > 1 child replicas by n
// replicas that each feed one of them. Children are split first, so a chain
// of functional CPTs is replicated up to its first non-functional ancestor.
// Replicas share the parameter slot of the original CPT.
Replication replicate_functional(const Network& network);

}  // namespace fve
