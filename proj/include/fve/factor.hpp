#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fve/error.hpp"

namespace fve {

using VarId = int;

struct Variable {
  VarId id = 0;
  int cardinality = 2;

  friend bool operator==(const Variable&, const Variable&) = default;
};

using VarSet = std::vector<VarId>;  // kept sorted and duplicate free

VarSet make_varset(std::vector<VarId> ids);
VarSet set_union(const VarSet& a, const VarSet& b);
VarSet set_intersection(const VarSet& a, const VarSet& b);
VarSet set_difference(const VarSet& a, const VarSet& b);
bool is_subset(const VarSet& a, const VarSet& b);
bool contains(const VarSet& s, VarId v);

// Dense factor. Axes are kept in ascending variable-id order; the values are
// row-major over that order (highest id varies fastest). A factor with no
// variables is a scalar holding one entry.
class Factor {
 public:
  Factor();

  // `values` are laid out row-major over `vars` in the order given; they are
  // realigned to the canonical order.
  Factor(std::vector<Variable> vars, std::vector<double> values);

  static Factor ones(std::vector<Variable> vars);
  static Factor scalar(double value);

  const std::vector<Variable>& vars() const { return vars_; }
  std::span<const double> values() const { return values_; }
  std::size_t size() const { return values_.size(); }
  VarSet ids() const;
  bool has(VarId id) const;
  const Variable& variable(VarId id) const;

  // Entry for an assignment given in canonical variable order.
  double at(std::span<const int> assignment) const;

  // Values laid out row-major over `order`, a permutation of vars().
  std::vector<double> values_in(std::span<const VarId> order) const;

 private:
  std::vector<Variable> vars_;
  std::vector<double> values_;
};

Factor multiply(const Factor& f, const Factor& g);
Factor multiply_all(std::span<const Factor> factors);
Factor sum_out(const Factor& f, const VarSet& removed);
Factor project(const Factor& f, const VarSet& kept);
Factor normalize(const Factor& f);

// True iff every entry of the CPT is exactly 0 or 1. The CPT normalisation
// precondition makes this equivalent to "each parent row selects one value".
bool is_functional_cpt(const Factor& f, VarId child);

// Same variables and entries within `tol`.
bool approx_equal(const Factor& f, const Factor& g, double tol);
double max_abs_diff(const Factor& f, const Factor& g);

}  // namespace fve
