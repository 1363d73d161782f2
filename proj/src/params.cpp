#include "fve/params.hpp"

#include <cmath>
#include <random>

#include "fve/error.hpp"

namespace fve {

ParamStore ParamStore::from_network(const Network& net, const ParamOptions& options) {
  ParamStore store;
  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::map<std::string, std::size_t> groups;
  for (VarId v = 0; v < static_cast<VarId>(net.size()); ++v) {
    const Cpt& c = net.cpt(v);
    std::vector<int> shape;
    for (VarId a : c.axes()) shape.push_back(net.variable(a).cardinality);
    const bool frozen = options.background && (c.functional || !c.trainable);
    if (!c.tie_group.empty()) {
      if (auto it = groups.find(c.tie_group); it != groups.end()) {
        Slot& s = store.slots_[it->second];
        if (s.shape != shape) {
          throw ValidationError("tie group '" + c.tie_group + "' mixes CPT shapes");
        }
        s.members.push_back(c.source);
        s.frozen = s.frozen && frozen;
        store.by_source_[c.source] = it->second;
        continue;
      }
    }
    Slot s;
    s.name = c.tie_group.empty() ? c.source : "tie:" + c.tie_group;
    s.members = {c.source};
    s.shape = std::move(shape);
    s.frozen = frozen;
    s.mask.assign(c.values.size(), 0);
    s.logits.resize(c.values.size());
    for (std::size_t k = 0; k < c.values.size(); ++k) {
      if (!options.background) {
        s.logits[k] = normal(rng);
      } else if (c.values[k] == 0.0) {
        s.mask[k] = 1;
      } else {
        s.logits[k] = std::log(c.values[k]);
      }
    }
    const std::size_t index = store.slots_.size();
    if (!c.tie_group.empty()) groups[c.tie_group] = index;
    store.by_source_[c.source] = index;
    s.values = c.values;
    store.slots_.push_back(std::move(s));
  }
  for (Slot& s : store.slots_) {
    if (s.frozen) continue;
    if (options.background && options.init_noise > 0.0) {
      for (std::size_t k = 0; k < s.logits.size(); ++k) {
        if (!s.mask[k]) s.logits[k] += options.init_noise * normal(rng);
      }
    }
    materialize(s);
  }
  return store;
}

void ParamStore::materialize(Slot& s) {
  const std::size_t card = static_cast<std::size_t>(s.shape.back());
  s.values.assign(s.logits.size(), 0.0);
  for (std::size_t base = 0; base < s.logits.size(); base += card) {
    double top = -INFINITY;
    for (std::size_t x = 0; x < card; ++x) {
      if (!s.mask[base + x]) top = std::max(top, s.logits[base + x]);
    }
    if (top == -INFINITY) continue;
    double total = 0.0;
    for (std::size_t x = 0; x < card; ++x) {
      if (s.mask[base + x]) continue;
      s.values[base + x] = std::exp(s.logits[base + x] - top);
      total += s.values[base + x];
    }
    for (std::size_t x = 0; x < card; ++x) s.values[base + x] /= total;
  }
}

std::size_t ParamStore::slot_index(std::string_view source) const {
  auto it = by_source_.find(std::string(source));
  if (it == by_source_.end()) throw ValidationError("no parameters for CPT '" + std::string(source) + "'");
  return it->second;
}

const ParamStore::Slot& ParamStore::slot(std::string_view source) const {
  return slots_[slot_index(source)];
}

std::size_t ParamStore::trainable_count() const {
  std::size_t n = 0;
  for (const Slot& s : slots_) {
    if (s.frozen) continue;
    for (char m : s.mask) n += m ? 0 : 1;
  }
  return n;
}

void ParamStore::set_logits(std::string_view slot_name, std::vector<double> logits) {
  for (Slot& s : slots_) {
    if (s.name != slot_name) continue;
    if (logits.size() != s.logits.size()) throw ValidationError("logit count mismatch for " + s.name);
    s.logits = std::move(logits);
    materialize(s);
    return;
  }
  throw ValidationError("no slot named '" + std::string(slot_name) + "'");
}

void ParamStore::step(const Gradients& gradients, double lr) {
  for (Slot& s : slots_) {
    auto it = gradients.find(s.name);
    if (it == gradients.end() || s.frozen) continue;
    for (std::size_t k = 0; k < s.logits.size(); ++k) {
      if (!s.mask[k]) s.logits[k] -= lr * it->second[k];
    }
    materialize(s);
  }
}

std::vector<double> ParamStore::logit_gradient(const Slot& s, const std::vector<double>& g) const {
  const std::size_t card = static_cast<std::size_t>(s.shape.back());
  std::vector<double> out(g.size(), 0.0);
  for (std::size_t base = 0; base < g.size(); base += card) {
    double dot = 0.0;
    for (std::size_t x = 0; x < card; ++x) dot += s.values[base + x] * g[base + x];
    for (std::size_t x = 0; x < card; ++x) {
      if (!s.mask[base + x]) out[base + x] = s.values[base + x] * (g[base + x] - dot);
    }
  }
  return out;
}

void ParamStore::write_back(Network& declared) const {
  for (VarId v = 0; v < static_cast<VarId>(declared.size()); ++v) {
    Cpt& c = declared.cpt(v);
    const Slot& s = slot(c.source);
    if (s.values.size() != c.values.size()) throw ValidationError("slot size mismatch for " + c.source);
    c.values = s.values;
  }
}

}  // namespace fve
