#include "fve/scalar_ac.hpp"

#include <algorithm>

#include "fve/error.hpp"
#include "fve/indexing.hpp"

namespace fve {

namespace {

class Extractor {
 public:
  Extractor(const OpsGraph& graph, const ParamStore& params) : graph_(graph), params_(params) {}

  ScalarGraph run() {
    const auto& g = graph_;
    // Constants and inputs get the lowest ids, so count them first.
    std::size_t n_const = 0, n_input = 0;
    std::vector<std::size_t> input_offset;
    for (const auto& name : g.inputs) {
      input_offset.push_back(out_.row_width);
      out_.row_width += static_cast<std::size_t>(
          g.variables[static_cast<std::size_t>(g.variable_index(name))].full_cardinality);
    }
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
      const auto kind = g.nodes[i].kind;
      if (kind == OpKind::parameter) n_const += g.element_count(static_cast<int>(i));
      if (kind == OpKind::input) n_input += g.element_count(static_cast<int>(i));
    }
    out_.constants.reserve(n_const);
    out_.input_column.reserve(n_input);
    std::size_t next_const = 0, next_input = n_const;

    std::vector<int> last_use(g.nodes.size(), -1);
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
      for (int in : g.nodes[i].inputs) last_use[static_cast<std::size_t>(in)] = static_cast<int>(i);
    }
    ids_.resize(g.nodes.size());
    out_.kind.assign(n_const + n_input, 0);
    out_.lhs.assign(n_const + n_input, -1);
    out_.rhs.assign(n_const + n_input, -1);
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
      const OpNode& node = g.nodes[i];
      const std::size_t count = g.element_count(static_cast<int>(i));
      auto& ids = ids_[i];
      ids.resize(count);
      auto in_ids = [&](int k) -> const std::vector<std::int32_t>& {
        return ids_[static_cast<std::size_t>(node.inputs[static_cast<std::size_t>(k)])];
      };
      switch (node.kind) {
        case OpKind::parameter: {
          const auto& vals = params_.values(node.binding);
          const auto map = parameter_offsets(node);
          for (std::size_t e = 0; e < count; ++e) {
            out_.kind[next_const] = static_cast<std::uint8_t>(ScalarKind::constant);
            out_.constants.push_back(vals[map[e]]);
            ids[e] = static_cast<std::int32_t>(next_const++);
          }
          break;
        }
        case OpKind::input: {
          const int v = g.flat_vars(static_cast<int>(i))[0];
          const auto& var = g.variables[static_cast<std::size_t>(v)];
          const auto pos = std::find(g.inputs.begin(), g.inputs.end(), node.binding) - g.inputs.begin();
          for (std::size_t e = 0; e < count; ++e) {
            out_.kind[next_input] = static_cast<std::uint8_t>(ScalarKind::input);
            const std::size_t value = var.keep.empty() ? e : static_cast<std::size_t>(var.keep[e]);
            out_.input_column.push_back(static_cast<std::int32_t>(input_offset[static_cast<std::size_t>(pos)] + value));
            ids[e] = static_cast<std::int32_t>(next_input++);
          }
          break;
        }
        case OpKind::elem_multiply: {
          const auto flat = g.flat_vars(static_cast<int>(i));
          const auto other = g.flat_vars(node.inputs[1]);
          const auto map = detail::offset_table(cards(flat), strides_within(flat, other));
          const auto& a = in_ids(0);
          const auto& b = in_ids(1);
          for (std::size_t e = 0; e < count; ++e) ids[e] = op(ScalarKind::mul, a[e], b[map[e]]);
          break;
        }
        case OpKind::reduce_sum: {
          const auto flat = g.flat_vars(static_cast<int>(i));
          const auto in = g.flat_vars(node.inputs[0]);
          const auto map = detail::offset_table(cards(in), strides_within(in, flat));
          std::vector<std::vector<std::int32_t>> groups(count);
          const auto& a = in_ids(0);
          for (std::size_t e = 0; e < map.size(); ++e) groups[map[e]].push_back(a[e]);
          for (std::size_t e = 0; e < count; ++e) ids[e] = add_tree(groups[e]);
          break;
        }
        case OpKind::reshape:
          ids = in_ids(0);
          break;
        case OpKind::transpose: {
          const OpNode& in = g.nodes[static_cast<std::size_t>(node.inputs[0])];
          std::vector<int> in_len, out_len;
          for (const auto& ax : in.dims) in_len.push_back(static_cast<int>(g.axis_length(ax)));
          const auto in_strides = detail::row_major_strides(in_len);
          std::vector<std::size_t> strides;
          for (int k : node.perm) {
            out_len.push_back(in_len[static_cast<std::size_t>(k)]);
            strides.push_back(in_strides[static_cast<std::size_t>(k)]);
          }
          const auto map = detail::offset_table(out_len, strides);
          const auto& a = in_ids(0);
          for (std::size_t e = 0; e < count; ++e) ids[e] = a[map[e]];
          break;
        }
        case OpKind::multiply_project: {
          const std::size_t C = g.axis_length(node.dims[0]), X = g.axis_length(node.dims[1]),
                            Y = g.axis_length(node.dims[2]);
          const std::size_t S = g.axis_length(g.nodes[static_cast<std::size_t>(node.inputs[0])].dims[2]);
          const auto& a = in_ids(0);
          const auto& b = in_ids(1);
          std::vector<std::int32_t> terms(S);
          for (std::size_t c = 0; c < C; ++c) {
            for (std::size_t x = 0; x < X; ++x) {
              for (std::size_t y = 0; y < Y; ++y) {
                for (std::size_t s = 0; s < S; ++s) {
                  terms[s] = op(ScalarKind::mul, a[(c * X + x) * S + s], b[(c * S + s) * Y + y]);
                }
                ids[(c * X + x) * Y + y] = add_tree(terms);
              }
            }
          }
          break;
        }
        case OpKind::normalize: {
          const auto& a = in_ids(0);
          std::vector<std::int32_t> all(a.begin(), a.end());
          const std::int32_t total = add_tree(all);
          for (std::size_t e = 0; e < count; ++e) ids[e] = op(ScalarKind::div, a[e], total);
          break;
        }
      }
      for (int in : node.inputs) {
        if (last_use[static_cast<std::size_t>(in)] == static_cast<int>(i) && in != g.output) {
          std::vector<std::int32_t>().swap(ids_[static_cast<std::size_t>(in)]);
        }
      }
    }
    out_.outputs = ids_[static_cast<std::size_t>(g.output)];
    return std::move(out_);
  }

 private:
  std::vector<int> cards(const std::vector<int>& vars) const {
    std::vector<int> out;
    for (int v : vars) out.push_back(graph_.variables[static_cast<std::size_t>(v)].cardinality);
    return out;
  }

  std::vector<std::size_t> strides_within(const std::vector<int>& full, const std::vector<int>& sub) const {
    const auto sub_strides = detail::row_major_strides(cards(sub));
    std::vector<std::size_t> out(full.size(), 0);
    for (std::size_t k = 0; k < full.size(); ++k) {
      auto it = std::find(sub.begin(), sub.end(), full[k]);
      if (it != sub.end()) out[k] = sub_strides[static_cast<std::size_t>(it - sub.begin())];
    }
    return out;
  }

  std::int32_t op(ScalarKind kind, std::int32_t a, std::int32_t b) {
    if (out_.kind.size() >= static_cast<std::size_t>(INT32_MAX)) {
      throw ValidationError("scalar graph exceeds 2^31 nodes");
    }
    out_.kind.push_back(static_cast<std::uint8_t>(kind));
    out_.lhs.push_back(a);
    out_.rhs.push_back(b);
    return static_cast<std::int32_t>(out_.kind.size() - 1);
  }

  // Balanced pairwise sums; a single term is returned as is.
  std::int32_t add_tree(std::vector<std::int32_t> terms) {
    if (terms.empty()) throw CompileError("empty sum in scalar extraction");
    while (terms.size() > 1) {
      std::size_t w = 0;
      for (std::size_t k = 0; k + 1 < terms.size(); k += 2) terms[w++] = op(ScalarKind::add, terms[k], terms[k + 1]);
      if (terms.size() % 2) terms[w++] = terms.back();
      terms.resize(w);
    }
    return terms[0];
  }

  const OpsGraph& graph_;
  const ParamStore& params_;
  ScalarGraph out_;
  std::vector<std::vector<std::int32_t>> ids_;
};

}  // namespace

ScalarGraph extract_scalar_graph(const OpsGraph& graph, const ParamStore& params) {
  graph.validate();
  return Extractor(graph, params).run();
}

std::vector<double> scalar_row(const OpsGraph& graph, const Batch& batch, std::size_t row) {
  std::vector<double> out;
  for (const auto& name : graph.inputs) {
    const auto width = static_cast<std::size_t>(
        graph.variables[static_cast<std::size_t>(graph.variable_index(name))].full_cardinality);
    auto it = batch.evidence.find(name);
    if (it == batch.evidence.end()) {
      out.insert(out.end(), width, 1.0);
    } else {
      const auto* p = it->second.data() + row * width;
      out.insert(out.end(), p, p + width);
    }
  }
  return out;
}

std::vector<double> scalar_rows(const OpsGraph& graph, const Batch& batch) {
  std::vector<double> out;
  for (std::size_t r = 0; r < batch.size; ++r) {
    const auto row = scalar_row(graph, batch, r);
    out.insert(out.end(), row.begin(), row.end());
  }
  return out;
}

ScalarRunner::ScalarRunner(const ScalarGraph& g, std::size_t batch, bool vector_sweep)
    : g_(g), b_(batch), vector_(vector_sweep || batch > 1), values_(g.size() * batch, 0.0), flags_(batch, 0) {
  for (std::size_t k = 0; k < g.constants.size(); ++k) {
    std::fill_n(values_.begin() + static_cast<std::ptrdiff_t>(k * b_), b_, g.constants[k]);
  }
}

void ScalarRunner::bind(std::span<const double> rows) {
  if (rows.size() != b_ * g_.row_width) throw ValidationError("scalar input row has the wrong width");
  const std::size_t base = g_.constants.size();
  for (std::size_t k = 0; k < g_.input_column.size(); ++k) {
    double* v = values_.data() + (base + k) * b_;
    for (std::size_t j = 0; j < b_; ++j) v[j] = rows[j * g_.row_width + static_cast<std::size_t>(g_.input_column[k])];
  }
  std::fill(flags_.begin(), flags_.end(), 0);
}

void ScalarRunner::sweep() {
  const std::size_t n = g_.size();
  const auto* kind = g_.kind.data();
  const auto* lhs = g_.lhs.data();
  const auto* rhs = g_.rhs.data();
  double* v = values_.data();
  if (!vector_) {
    for (std::size_t i = g_.first_op(); i < n; ++i) {
      const double a = v[lhs[i]], b = v[rhs[i]];
      switch (static_cast<ScalarKind>(kind[i])) {
        case ScalarKind::add: v[i] = a + b; break;
        case ScalarKind::mul: v[i] = a * b; break;
        case ScalarKind::div:
          if (b == 0.0) {
            flags_[0] = 1;
            v[i] = 0.0;
          } else {
            v[i] = a / b;
          }
          break;
        default: break;
      }
    }
    return;
  }
  const std::size_t B = b_;
  for (std::size_t i = g_.first_op(); i < n; ++i) {
    const double* a = v + static_cast<std::size_t>(lhs[i]) * B;
    const double* b = v + static_cast<std::size_t>(rhs[i]) * B;
    double* o = v + i * B;
    switch (static_cast<ScalarKind>(kind[i])) {
      case ScalarKind::add:
        for (std::size_t j = 0; j < B; ++j) o[j] = a[j] + b[j];
        break;
      case ScalarKind::mul:
        for (std::size_t j = 0; j < B; ++j) o[j] = a[j] * b[j];
        break;
      case ScalarKind::div:
        for (std::size_t j = 0; j < B; ++j) {
          if (b[j] == 0.0) {
            flags_[j] = 1;
            o[j] = 0.0;
          } else {
            o[j] = a[j] / b[j];
          }
        }
        break;
      default: break;
    }
  }
}

ScalarResult ScalarRunner::result() const {
  ScalarResult r;
  r.zero_division = flags_;
  r.outputs.resize(b_ * g_.outputs.size());
  for (std::size_t j = 0; j < b_; ++j) {
    for (std::size_t q = 0; q < g_.outputs.size(); ++q) {
      r.outputs[j * g_.outputs.size() + q] = values_[static_cast<std::size_t>(g_.outputs[q]) * b_ + j];
    }
  }
  return r;
}

ScalarResult eval_scalar(const ScalarGraph& g, std::span<const double> row) {
  ScalarRunner runner(g, 1);
  runner.bind(row);
  runner.sweep();
  return runner.result();
}

ScalarResult eval_scalar_batch(const ScalarGraph& g, std::span<const double> rows, std::size_t b) {
  ScalarRunner runner(g, b, true);
  runner.bind(rows);
  runner.sweep();
  return runner.result();
}

}  // namespace fve
