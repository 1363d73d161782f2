#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "fve/network.hpp"

namespace fve {

struct ParamOptions {
  // Background knowledge: functional and untrainable CPTs are frozen, zero
  // entries stay zero, and trainable slots start from the declared values.
  // Without it every slot is trainable, nothing is masked and logits start
  // from N(0, 1).
  bool background = true;
  std::uint64_t seed = 0;
  // Std-dev of the Gaussian added to trainable logits at initialisation
  // (background mode only).
  double init_noise = 0.0;
};

// Gradient with respect to the logits of each trainable slot, by slot name.
using Gradients = std::map<std::string, std::vector<double>>;

// Trainable parameters, one slot per declared CPT or tie group. A CPT is the
// softmax of its slot's logits along the child (last) axis.
class ParamStore {
 public:
  struct Slot {
    std::string name;                  // CPT source name, or "tie:<group>"
    std::vector<std::string> members;  // CPT source names reading this slot
    std::vector<int> shape;            // (parents..., child)
    std::vector<double> logits;
    std::vector<char> mask;            // 1: entry fixed at zero
    std::vector<double> values;        // materialised CPT
    bool frozen = false;
  };

  ParamStore() = default;
  static ParamStore from_network(const Network& declared, const ParamOptions& options = {});

  const std::vector<Slot>& slots() const { return slots_; }
  const Slot& slot(std::string_view source) const;
  std::size_t slot_index(std::string_view source) const;  // throws ValidationError
  const std::vector<double>& values(std::string_view source) const { return slot(source).values; }

  // Unmasked entries in unfrozen slots.
  std::size_t trainable_count() const;

  void set_logits(std::string_view slot_name, std::vector<double> logits);
  // logits -= lr * gradient, then rematerialise.
  void step(const Gradients& gradients, double lr);
  // d loss / d logits from d loss / d values, per row softmax Jacobian.
  std::vector<double> logit_gradient(const Slot& s, const std::vector<double>& value_grad) const;

  // Copies materialised CPT values into a declared network.
  void write_back(Network& declared) const;

 private:
  static void materialize(Slot& s);

  std::vector<Slot> slots_;
  std::unordered_map<std::string, std::size_t> by_source_;
};

}  // namespace fve
