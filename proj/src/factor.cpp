#include "fve/factor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "fve/indexing.hpp"

namespace fve {

VarSet make_varset(std::vector<VarId> ids) {
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

VarSet set_union(const VarSet& a, const VarSet& b) {
  VarSet out;
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

VarSet set_intersection(const VarSet& a, const VarSet& b) {
  VarSet out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

VarSet set_difference(const VarSet& a, const VarSet& b) {
  VarSet out;
  std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

bool is_subset(const VarSet& a, const VarSet& b) {
  return std::includes(b.begin(), b.end(), a.begin(), a.end());
}

bool contains(const VarSet& s, VarId v) { return std::binary_search(s.begin(), s.end(), v); }

namespace {

std::vector<int> cards_of(const std::vector<Variable>& vars) {
  std::vector<int> cards;
  cards.reserve(vars.size());
  for (const auto& v : vars) cards.push_back(v.cardinality);
  return cards;
}

// Strides of `source` (canonical layout) seen from the axes of `target`;
// axes missing from `source` broadcast with stride 0.
std::vector<std::size_t> strides_into(const std::vector<Variable>& target,
                                      const std::vector<Variable>& source) {
  const auto src_cards = cards_of(source);
  const auto src_strides = detail::row_major_strides(src_cards);
  std::vector<std::size_t> out(target.size(), 0);
  for (std::size_t k = 0; k < target.size(); ++k) {
    for (std::size_t j = 0; j < source.size(); ++j) {
      if (source[j].id == target[k].id) {
        if (source[j].cardinality != target[k].cardinality) {
          throw SchemaError("variable " + std::to_string(target[k].id) +
                            " used with cardinalities " +
                            std::to_string(source[j].cardinality) + " and " +
                            std::to_string(target[k].cardinality));
        }
        out[k] = src_strides[j];
      }
    }
  }
  return out;
}

}  // namespace

Factor::Factor() : values_{1.0} {}

Factor::Factor(std::vector<Variable> vars, std::vector<double> values) {
  for (const auto& v : vars) {
    if (v.cardinality < 1) throw SchemaError("variable with non-positive cardinality");
  }
  for (std::size_t i = 0; i < vars.size(); ++i) {
    for (std::size_t j = i + 1; j < vars.size(); ++j) {
      if (vars[i].id == vars[j].id) throw SchemaError("duplicate variable in factor");
    }
  }
  if (values.size() != detail::element_count(cards_of(vars))) {
    throw SchemaError("factor value count does not match its shape");
  }
  for (double x : values) {
    if (!std::isfinite(x)) throw SchemaError("factor entries must be finite");
  }
  std::vector<Variable> sorted = vars;
  std::sort(sorted.begin(), sorted.end(),
            [](const Variable& a, const Variable& b) { return a.id < b.id; });
  if (sorted == vars) {
    vars_ = std::move(vars);
    values_ = std::move(values);
    return;
  }
  values_.resize(values.size());
  const auto strides = strides_into(sorted, vars);
  detail::for_each_offset(cards_of(sorted), strides,
                          [&](std::size_t flat, std::size_t off) { values_[flat] = values[off]; });
  vars_ = std::move(sorted);
}

Factor Factor::ones(std::vector<Variable> vars) {
  const std::size_t n = detail::element_count(cards_of(vars));
  return Factor(std::move(vars), std::vector<double>(n, 1.0));
}

Factor Factor::scalar(double value) { return Factor({}, {value}); }

VarSet Factor::ids() const {
  VarSet out;
  out.reserve(vars_.size());
  for (const auto& v : vars_) out.push_back(v.id);
  return out;
}

bool Factor::has(VarId id) const {
  return std::any_of(vars_.begin(), vars_.end(), [&](const Variable& v) { return v.id == id; });
}

const Variable& Factor::variable(VarId id) const {
  for (const auto& v : vars_) {
    if (v.id == id) return v;
  }
  throw SchemaError("variable " + std::to_string(id) + " not in factor");
}

double Factor::at(std::span<const int> assignment) const {
  if (assignment.size() != vars_.size()) throw SchemaError("assignment rank mismatch");
  std::size_t flat = 0;
  for (std::size_t k = 0; k < vars_.size(); ++k) {
    flat = flat * static_cast<std::size_t>(vars_[k].cardinality) + static_cast<std::size_t>(assignment[k]);
  }
  return values_[flat];
}

std::vector<double> Factor::values_in(std::span<const VarId> order) const {
  std::vector<Variable> target;
  for (VarId id : order) target.push_back(variable(id));
  if (target.size() != vars_.size()) throw SchemaError("order is not a permutation of the factor");
  std::vector<double> out(values_.size());
  detail::for_each_offset(cards_of(target), strides_into(target, vars_),
                          [&](std::size_t flat, std::size_t off) { out[flat] = values_[off]; });
  return out;
}

Factor multiply(const Factor& f, const Factor& g) {
  std::vector<Variable> vars = f.vars();
  for (const auto& v : g.vars()) {
    auto it = std::find_if(vars.begin(), vars.end(), [&](const Variable& u) { return u.id == v.id; });
    if (it == vars.end()) {
      vars.push_back(v);
    } else if (it->cardinality != v.cardinality) {
      throw SchemaError("variable " + std::to_string(v.id) + " has mismatched cardinality");
    }
  }
  std::sort(vars.begin(), vars.end(), [](const Variable& a, const Variable& b) { return a.id < b.id; });
  const auto cards = cards_of(vars);
  const auto fs = strides_into(vars, f.vars());
  const auto gs = strides_into(vars, g.vars());
  std::vector<double> out(detail::element_count(cards));
  const auto fo = detail::offset_table(cards, fs);
  const auto go = detail::offset_table(cards, gs);
  const auto fv = f.values();
  const auto gv = g.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fv[fo[i]] * gv[go[i]];
  return Factor(std::move(vars), std::move(out));
}

Factor multiply_all(std::span<const Factor> factors) {
  Factor acc;
  for (const auto& f : factors) acc = multiply(acc, f);
  return acc;
}

Factor sum_out(const Factor& f, const VarSet& removed) {
  for (VarId v : removed) {
    if (!f.has(v)) throw SchemaError("cannot sum out variable " + std::to_string(v) + " not in factor");
  }
  std::vector<Variable> kept;
  for (const auto& v : f.vars()) {
    if (!contains(removed, v.id)) kept.push_back(v);
  }
  const auto in_cards = cards_of(f.vars());
  // For each input position, the offset of the output cell it accumulates into.
  const auto out_strides_full = strides_into(f.vars(), kept);
  std::vector<double> out(detail::element_count(cards_of(kept)), 0.0);
  const auto fv = f.values();
  detail::for_each_offset(in_cards, out_strides_full,
                          [&](std::size_t flat, std::size_t off) { out[off] += fv[flat]; });
  return Factor(std::move(kept), std::move(out));
}

Factor project(const Factor& f, const VarSet& kept) {
  for (VarId v : kept) {
    if (!f.has(v)) throw SchemaError("cannot project onto variable " + std::to_string(v) + " not in factor");
  }
  return sum_out(f, set_difference(f.ids(), kept));
}

Factor normalize(const Factor& f) {
  double total = 0.0;
  for (double x : f.values()) total += x;
  if (!(total > 0.0)) throw NormalizationError("cannot normalize a factor with non-positive mass");
  std::vector<double> out(f.values().begin(), f.values().end());
  for (double& x : out) x /= total;
  return Factor(f.vars(), std::move(out));
}

bool is_functional_cpt(const Factor& f, VarId child) {
  if (!f.has(child)) throw SchemaError("child " + std::to_string(child) + " not in CPT");
  return std::all_of(f.values().begin(), f.values().end(),
                     [](double x) { return x == 0.0 || x == 1.0; });
}

double max_abs_diff(const Factor& f, const Factor& g) {
  if (f.vars() != g.vars()) throw SchemaError("factors over different variables");
  double worst = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    worst = std::max(worst, std::abs(f.values()[i] - g.values()[i]));
  }
  return worst;
}

bool approx_equal(const Factor& f, const Factor& g, double tol) {
  return f.vars() == g.vars() && max_abs_diff(f, g) <= tol;
}

}  // namespace fve
