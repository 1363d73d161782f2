#include "fve/network.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace fve {

std::vector<VarId> Cpt::axes() const {
  std::vector<VarId> out = parents;
  out.push_back(child);
  return out;
}

VarId Network::add_variable(std::string name, int cardinality) {
  if (cardinality < 1) throw ValidationError("variable '" + name + "' needs a positive cardinality");
  if (index_.count(name)) throw ValidationError("duplicate variable id '" + name + "'");
  const auto id = static_cast<VarId>(vars_.size());
  index_.emplace(name, id);
  vars_.push_back({std::move(name), cardinality, {}});
  cpts_.emplace_back();
  return id;
}

void Network::set_cpt(Cpt cpt) {
  if (cpt.child < 0 || static_cast<std::size_t>(cpt.child) >= vars_.size()) {
    throw ValidationError("CPT for unknown variable");
  }
  if (cpt.source.empty()) cpt.source = name(cpt.child);
  cpts_[static_cast<std::size_t>(cpt.child)] = std::move(cpt);
}

std::optional<VarId> Network::find(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

VarId Network::id(std::string_view name) const {
  auto found = find(name);
  if (!found) throw ValidationError("unknown variable '" + std::string(name) + "'");
  return *found;
}

bool Network::has_cpt(VarId id) const { return cpts_.at(static_cast<std::size_t>(id)).has_value(); }

const Cpt& Network::cpt(VarId id) const {
  const auto& c = cpts_.at(static_cast<std::size_t>(id));
  if (!c) throw ValidationError("variable '" + name(id) + "' has no CPT");
  return *c;
}

Cpt& Network::cpt(VarId id) {
  auto& c = cpts_.at(static_cast<std::size_t>(id));
  if (!c) throw ValidationError("variable '" + name(id) + "' has no CPT");
  return *c;
}

Factor Network::cpt_factor(VarId id) const {
  const Cpt& c = cpt(id);
  std::vector<Variable> vars;
  for (VarId a : c.axes()) vars.push_back(var(a));
  return Factor(std::move(vars), c.values);
}

std::vector<VarId> Network::children(VarId id) const {
  std::vector<VarId> out;
  for (std::size_t v = 0; v < cpts_.size(); ++v) {
    if (cpts_[v] && std::find(cpts_[v]->parents.begin(), cpts_[v]->parents.end(), id) !=
                        cpts_[v]->parents.end()) {
      out.push_back(static_cast<VarId>(v));
    }
  }
  return out;
}

std::vector<std::vector<VarId>> Network::children_lists() const {
  std::vector<std::vector<VarId>> out(vars_.size());
  for (std::size_t v = 0; v < cpts_.size(); ++v) {
    if (!cpts_[v]) continue;
    for (VarId p : cpts_[v]->parents) out[static_cast<std::size_t>(p)].push_back(static_cast<VarId>(v));
  }
  return out;
}

std::vector<VarId> Network::topological_order() const {
  const std::size_t n = vars_.size();
  std::vector<int> pending(n, 0);
  const auto kids = children_lists();
  for (std::size_t v = 0; v < n; ++v) {
    if (cpts_[v]) pending[v] = static_cast<int>(cpts_[v]->parents.size());
  }
  std::vector<VarId> order;
  order.reserve(n);
  for (std::size_t v = 0; v < n; ++v) {
    if (pending[v] == 0) order.push_back(static_cast<VarId>(v));
  }
  for (std::size_t head = 0; head < order.size(); ++head) {
    for (VarId c : kids[static_cast<std::size_t>(order[head])]) {
      if (--pending[static_cast<std::size_t>(c)] == 0) order.push_back(c);
    }
  }
  if (order.size() != n) throw ValidationError("network has a directed cycle");
  return order;
}

std::vector<int> Network::cardinalities() const {
  std::vector<int> out;
  out.reserve(vars_.size());
  for (const auto& v : vars_) out.push_back(v.cardinality);
  return out;
}

void Network::validate() const {
  for (std::size_t v = 0; v < vars_.size(); ++v) {
    const auto id = static_cast<VarId>(v);
    const Cpt& c = cpt(id);
    std::size_t rows = 1;
    for (VarId p : c.parents) {
      if (p < 0 || static_cast<std::size_t>(p) >= vars_.size()) {
        throw ValidationError("CPT of '" + name(id) + "' names an unknown parent");
      }
      if (p == id) throw ValidationError("variable '" + name(id) + "' is its own parent");
      if (std::count(c.parents.begin(), c.parents.end(), p) > 1) {
        throw ValidationError("CPT of '" + name(id) + "' repeats a parent");
      }
      rows *= static_cast<std::size_t>(variable(p).cardinality);
    }
    const auto card = static_cast<std::size_t>(vars_[v].cardinality);
    if (c.values.size() != rows * card) {
      throw ValidationError("CPT of '" + name(id) + "' has " + std::to_string(c.values.size()) +
                            " values, expected " + std::to_string(rows * card));
    }
    for (std::size_t r = 0; r < rows; ++r) {
      double total = 0.0;
      for (std::size_t x = 0; x < card; ++x) {
        const double p = c.values[r * card + x];
        if (!std::isfinite(p) || p < 0.0) {
          throw ValidationError("CPT of '" + name(id) + "' has a negative or non-finite entry");
        }
        total += p;
      }
      if (std::abs(total - 1.0) > 1e-9) {
        throw ValidationError("CPT of '" + name(id) + "' row " + std::to_string(r) + " sums to " +
                              std::to_string(total));
      }
    }
    if (c.functional && !is_functional_cpt(cpt_factor(id), id)) {
      throw ValidationError("CPT of '" + name(id) + "' is declared functional but is not 0/1");
    }
  }
  for (VarId e : evidence) {
    if (e < 0 || static_cast<std::size_t>(e) >= vars_.size()) {
      throw ValidationError("unknown evidence variable");
    }
  }
  topological_order();
}

bool operator==(const Network& a, const Network& b) {
  return a.vars_ == b.vars_ && a.cpts_ == b.cpts_ && a.evidence == b.evidence;
}

}  // namespace fve
