#include "fve/engine.hpp"

#include <algorithm>
#include <cstdlib>
#include <thread>

#include "fve/error.hpp"
#include "fve/indexing.hpp"

namespace fve {

namespace {

std::vector<int> var_cards(const OpsGraph& g, const std::vector<int>& vars) {
  std::vector<int> cards;
  for (int v : vars) cards.push_back(g.variables[static_cast<std::size_t>(v)].cardinality);
  return cards;
}

// Strides of `sub` variables, laid out row-major, seen from the axes of
// `full`; variables of `full` missing from `sub` get stride 0.
std::vector<std::size_t> strides_within(const OpsGraph& g, const std::vector<int>& full,
                                        const std::vector<int>& sub) {
  const auto sub_strides = detail::row_major_strides(var_cards(g, sub));
  std::vector<std::size_t> out(full.size(), 0);
  for (std::size_t k = 0; k < full.size(); ++k) {
    auto it = std::find(sub.begin(), sub.end(), full[k]);
    if (it != sub.end()) out[k] = sub_strides[static_cast<std::size_t>(it - sub.begin())];
  }
  return out;
}

Batch slice_batch(const Batch& batch, std::size_t begin, std::size_t end) {
  Batch out;
  out.size = end - begin;
  for (const auto& [name, rows] : batch.evidence) {
    const std::size_t width = batch.size ? rows.size() / batch.size : 0;
    out.evidence[name].assign(rows.begin() + static_cast<std::ptrdiff_t>(begin * width),
                              rows.begin() + static_cast<std::ptrdiff_t>(end * width));
  }
  if (!batch.labels.empty()) {
    out.labels.assign(batch.labels.begin() + static_cast<std::ptrdiff_t>(begin),
                      batch.labels.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

}  // namespace

std::size_t Posteriors::zero_mass_count() const {
  return static_cast<std::size_t>(std::count(zero_mass.begin(), zero_mass.end(), 1));
}

Evaluator::Evaluator(OpsGraph graph) : graph_(std::move(graph)) {
  graph_.validate();
  const auto& g = graph_;
  const std::size_t n = g.nodes.size();
  plans_.resize(n);
  storage_.resize(n);
  last_use_.assign(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    const OpNode& node = g.nodes[i];
    Plan& p = plans_[i];
    p.count = g.element_count(static_cast<int>(i));
    storage_[i] = node.kind == OpKind::reshape ? storage_[static_cast<std::size_t>(node.inputs[0])]
                                               : static_cast<int>(i);
    for (int in : node.inputs) {
      last_use_[static_cast<std::size_t>(storage_[static_cast<std::size_t>(in)])] = static_cast<int>(i);
    }
    const auto flat = g.flat_vars(static_cast<int>(i));
    switch (node.kind) {
      case OpKind::parameter: {
        const auto offsets = parameter_offsets(node);
        p.map.assign(offsets.begin(), offsets.end());
        break;
      }
      case OpKind::input: {
        const auto& v = g.variables[static_cast<std::size_t>(flat[0])];
        p.width = static_cast<std::size_t>(v.full_cardinality);
        p.map.resize(p.count);
        for (std::size_t e = 0; e < p.count; ++e) {
          p.map[e] = static_cast<std::uint32_t>(v.keep.empty() ? static_cast<int>(e) : v.keep[e]);
        }
        break;
      }
      case OpKind::elem_multiply: {
        const auto other = g.flat_vars(node.inputs[1]);
        p.map = detail::offset_table(var_cards(g, flat), strides_within(g, flat, other));
        break;
      }
      case OpKind::reduce_sum: {
        const auto in = g.flat_vars(node.inputs[0]);
        p.map = detail::offset_table(var_cards(g, in), strides_within(g, in, flat));
        break;
      }
      case OpKind::transpose: {
        const OpNode& in = g.nodes[static_cast<std::size_t>(node.inputs[0])];
        std::vector<int> in_len;
        for (const auto& ax : in.dims) in_len.push_back(static_cast<int>(g.axis_length(ax)));
        const auto in_strides = detail::row_major_strides(in_len);
        // Merge output axes that are also adjacent in the input.
        std::vector<int> out_len;
        std::vector<std::size_t> strides;
        for (int k : node.perm) {
          const auto len = in_len[static_cast<std::size_t>(k)];
          const auto st = in_strides[static_cast<std::size_t>(k)];
          if (len == 1) continue;
          if (!strides.empty() && strides.back() == st * static_cast<std::size_t>(len)) {
            out_len.back() *= len;
            strides.back() = st;
            continue;
          }
          out_len.push_back(len);
          strides.push_back(st);
        }
        if (!out_len.empty()) {
          p.run = static_cast<std::size_t>(out_len.back());
          p.step = strides.back();
          out_len.pop_back();
          strides.pop_back();
        }
        p.map = detail::offset_table(out_len, strides);
        break;
      }
      case OpKind::multiply_project: {
        const OpNode& a = g.nodes[static_cast<std::size_t>(node.inputs[0])];
        p.c = g.axis_length(node.dims[0]);
        p.x = g.axis_length(node.dims[1]);
        p.y = g.axis_length(node.dims[2]);
        p.s = g.axis_length(a.dims[2]);
        break;
      }
      case OpKind::reshape:
      case OpKind::normalize:
        break;
    }
  }
  constexpr std::uint64_t kTileBytes = std::uint64_t{32} << 20;
  tile_rows_ = static_cast<std::size_t>(std::max<std::uint64_t>(1, kTileBytes / (sizeof(double) * std::max<std::uint64_t>(1, graph_size(g)))));
}

namespace {

// (C,X,S) x (C,S,Y) -> (C,X,Y). Y is fixed at compile time when nonzero.
template <std::size_t Y>
void project_kernel(const double* __restrict A, const double* __restrict B, double* __restrict O, std::size_t nc, std::size_t nx,
                    std::size_t ns, std::size_t ny) {
  const std::size_t y_len = Y ? Y : ny;
  for (std::size_t c = 0; c < nc; ++c) {
    const double* bblock = B + c * ns * y_len;
    for (std::size_t x = 0; x < nx; ++x) {
      const double* arow = A + (c * nx + x) * ns;
      double* o = O + (c * nx + x) * y_len;
      if constexpr (Y == 1) {
        double acc = 0.0;
        for (std::size_t s = 0; s < ns; ++s) acc += arow[s] * bblock[s];
        o[0] = acc;
      } else if constexpr (Y > 1) {
        double acc[Y];
        for (std::size_t y = 0; y < Y; ++y) acc[y] = arow[0] * bblock[y];
        for (std::size_t s = 1; s < ns; ++s) {
          const double av = arow[s];
          const double* brow = bblock + s * Y;
          for (std::size_t y = 0; y < Y; ++y) acc[y] += av * brow[y];
        }
        for (std::size_t y = 0; y < Y; ++y) o[y] = acc[y];
      } else {
        const double a0 = arow[0];
        for (std::size_t y = 0; y < y_len; ++y) o[y] = a0 * bblock[y];
        for (std::size_t s = 1; s < ns; ++s) {
          const double av = arow[s];
          const double* brow = bblock + s * y_len;
          for (std::size_t y = 0; y < y_len; ++y) o[y] += av * brow[y];
        }
      }
    }
  }
}

}  // namespace

Evaluator::Workspace Evaluator::forward(const ParamStore& params, const Batch& batch,
                                        bool keep_all) const {
  Workspace ws;
  forward(params, batch, ws, keep_all);
  return ws;
}

void Evaluator::plan_slots(Workspace& ws, std::size_t batch, bool keep_all) const {
  const auto& g = graph_;
  const std::size_t n = g.nodes.size();
  // Greedy over the same release schedule as forward: smallest free slot
  // that fits, else the largest free one (which grows).
  std::vector<std::size_t> cap;
  std::multimap<std::size_t, int> free_slots;
  std::vector<char> released(n, 0);
  ws.slot.assign(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    const OpNode& node = g.nodes[i];
    if (node.kind == OpKind::reshape) continue;
    const std::size_t need = (node.batched ? batch : 1) * plans_[i].count;
    int s = -1;
    if (!free_slots.empty()) {
      auto it = free_slots.lower_bound(need);
      if (it == free_slots.end()) it = std::prev(it);
      s = it->second;
      free_slots.erase(it);
      cap[static_cast<std::size_t>(s)] = std::max(cap[static_cast<std::size_t>(s)], need);
    } else {
      s = static_cast<int>(cap.size());
      cap.push_back(need);
    }
    ws.slot[i] = s;
    if (keep_all) continue;
    for (int in : node.inputs) {
      const int st = storage_[static_cast<std::size_t>(in)];
      if (last_use_[static_cast<std::size_t>(st)] == static_cast<int>(i) && st != storage_[static_cast<std::size_t>(g.output)] &&
          !released[static_cast<std::size_t>(st)]) {
        released[static_cast<std::size_t>(st)] = 1;
        const int freed = ws.slot[static_cast<std::size_t>(st)];
        free_slots.emplace(cap[static_cast<std::size_t>(freed)], freed);
      }
    }
  }
  if (ws.pool.size() < cap.size()) ws.pool.resize(cap.size());
  ws.planned_batch = batch;
  ws.planned_keep = keep_all;
}

void Evaluator::forward(const ParamStore& params, const Batch& batch, Workspace& ws, bool keep_all) const {
  const std::size_t B = batch.size;
  if (keep_all || B <= tile_rows_) {
    run(params, batch, ws, keep_all);
    return;
  }
  // Row tiles keep the intermediates of large graphs in cache; only the
  // output is assembled at full batch size.
  const auto& g = graph_;
  const auto out = static_cast<std::size_t>(storage_[static_cast<std::size_t>(g.output)]);
  const bool batched = g.nodes[out].batched;
  const std::size_t cols = plans_[out].count;
  if (!ws.tile) ws.tile = std::make_unique<Workspace>();
  ws.batch = B;
  ws.values.assign(g.nodes.size(), {});
  ws.slot.clear();
  ws.zero_mass.assign(B, 0);
  ws.values[out].resize((batched ? B : 1) * cols);
  for (std::size_t begin = 0; begin < B; begin += tile_rows_) {
    const std::size_t end = std::min(B, begin + tile_rows_);
    run(params, slice_batch(batch, begin, end), *ws.tile, false);
    const auto& part = ws.tile->values[out];
    if (batched) {
      std::copy(part.begin(), part.end(), ws.values[out].begin() + static_cast<std::ptrdiff_t>(begin * cols));
    } else if (begin == 0) {
      ws.values[out] = part;
    }
    std::copy(ws.tile->zero_mass.begin(), ws.tile->zero_mass.end(), ws.zero_mass.begin() + static_cast<std::ptrdiff_t>(begin));
  }
}

void Evaluator::run(const ParamStore& params, const Batch& batch, Workspace& ws, bool keep_all) const {
  const auto& g = graph_;
  const std::size_t B = batch.size;
  for (std::size_t i = 0; i < ws.values.size() && i < ws.slot.size(); ++i) {
    if (ws.slot[i] >= 0 && ws.values[i].capacity() > 0) ws.pool[static_cast<std::size_t>(ws.slot[i])] = std::move(ws.values[i]);
  }
  if (ws.slot.size() != g.nodes.size() || ws.planned_batch != B || ws.planned_keep != keep_all) {
    plan_slots(ws, B, keep_all);
  }
  ws.batch = B;
  ws.values.assign(g.nodes.size(), {});
  ws.zero_mass.assign(B, 0);
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    const OpNode& node = g.nodes[i];
    const Plan& p = plans_[i];
    if (node.kind == OpKind::reshape) continue;
    const std::size_t rows = node.batched ? B : 1;
    auto& out = ws.values[i];
    // Every kernel writes all of its output, so reused buffers are not cleared.
    out = std::move(ws.pool[static_cast<std::size_t>(ws.slot[i])]);
    out.resize(rows * p.count);
    auto input = [&](int k) -> const std::vector<double>& {
      return ws.values[static_cast<std::size_t>(storage_[static_cast<std::size_t>(node.inputs[static_cast<std::size_t>(k)])])];
    };
    auto batched = [&](int k) { return g.nodes[static_cast<std::size_t>(node.inputs[static_cast<std::size_t>(k)])].batched; };
    switch (node.kind) {
      case OpKind::parameter: {
        const auto& src = params.values(node.binding);
        for (std::size_t e = 0; e < p.count; ++e) out[e] = src[p.map[e]];
        break;
      }
      case OpKind::input: {
        auto it = batch.evidence.find(node.binding);
        if (it == batch.evidence.end()) {
          std::fill(out.begin(), out.end(), 1.0);
          break;
        }
        const auto& lam = it->second;
        if (lam.size() != B * p.width) {
          throw ValidationError("evidence for '" + node.binding + "' has the wrong width");
        }
        for (std::size_t r = 0; r < B; ++r) {
          for (std::size_t e = 0; e < p.count; ++e) out[r * p.count + e] = lam[r * p.width + p.map[e]];
        }
        break;
      }
      case OpKind::elem_multiply: {
        const auto& a = input(0);
        const auto& b = input(1);
        const std::size_t bn = b.size() / (batched(1) ? B : 1);
        for (std::size_t r = 0; r < rows; ++r) {
          const double* ar = a.data() + (batched(0) ? r : 0) * p.count;
          const double* br = b.data() + (batched(1) ? r : 0) * bn;
          double* o = out.data() + r * p.count;
          for (std::size_t e = 0; e < p.count; ++e) o[e] = ar[e] * br[p.map[e]];
        }
        break;
      }
      case OpKind::reduce_sum: {
        const auto& a = input(0);
        const std::size_t an = p.map.size();
        std::fill(out.begin(), out.end(), 0.0);
        for (std::size_t r = 0; r < rows; ++r) {
          const double* ar = a.data() + r * an;
          double* o = out.data() + r * p.count;
          for (std::size_t e = 0; e < an; ++e) o[p.map[e]] += ar[e];
        }
        break;
      }
      case OpKind::transpose: {
        const auto& a = input(0);
        const std::size_t L = p.run, st = p.step, blocks = p.map.size();
        for (std::size_t r = 0; r < rows; ++r) {
          const double* ar = a.data() + r * p.count;
          double* o = out.data() + r * p.count;
          if (st == 1) {
            for (std::size_t k = 0; k < blocks; ++k) std::copy_n(ar + p.map[k], L, o + k * L);
            continue;
          }
          for (std::size_t k = 0; k < blocks; ++k) {
            const double* src = ar + p.map[k];
            double* dst = o + k * L;
            for (std::size_t j = 0; j < L; ++j) dst[j] = src[j * st];
          }
        }
        break;
      }
      case OpKind::multiply_project: {
        const auto& a = input(0);
        const auto& b = input(1);
        const std::size_t an = p.c * p.x * p.s, bn = p.c * p.s * p.y;
        for (std::size_t r = 0; r < rows; ++r) {
          const double* A = a.data() + (batched(0) ? r : 0) * an;
          const double* Bm = b.data() + (batched(1) ? r : 0) * bn;
          double* O = out.data() + r * p.count;
          switch (p.y) {
            case 1: project_kernel<1>(A, Bm, O, p.c, p.x, p.s, 1); break;
            case 2: project_kernel<2>(A, Bm, O, p.c, p.x, p.s, 2); break;
            case 3: project_kernel<3>(A, Bm, O, p.c, p.x, p.s, 3); break;
            case 4: project_kernel<4>(A, Bm, O, p.c, p.x, p.s, 4); break;
            case 6: project_kernel<6>(A, Bm, O, p.c, p.x, p.s, 6); break;
            case 8: project_kernel<8>(A, Bm, O, p.c, p.x, p.s, 8); break;
            case 9: project_kernel<9>(A, Bm, O, p.c, p.x, p.s, 9); break;
            default: project_kernel<0>(A, Bm, O, p.c, p.x, p.s, p.y); break;
          }
        }
        break;
      }
      case OpKind::normalize: {
        const auto& a = input(0);
        for (std::size_t r = 0; r < rows; ++r) {
          const double* ar = a.data() + r * p.count;
          double total = 0.0;
          for (std::size_t e = 0; e < p.count; ++e) total += ar[e];
          if (!(total > 0.0)) {
            std::fill_n(out.begin() + static_cast<std::ptrdiff_t>(r * p.count), p.count, 0.0);
            if (node.batched) {
              ws.zero_mass[r] = 1;
            } else {
              std::fill(ws.zero_mass.begin(), ws.zero_mass.end(), 1);
            }
            continue;
          }
          for (std::size_t e = 0; e < p.count; ++e) out[r * p.count + e] = ar[e] / total;
        }
        break;
      }
      case OpKind::reshape:
        break;
    }
    if (!keep_all) {
      for (int in : node.inputs) {
        const int s = storage_[static_cast<std::size_t>(in)];
        if (last_use_[static_cast<std::size_t>(s)] == static_cast<int>(i) &&
            s != storage_[static_cast<std::size_t>(g.output)] && ws.values[static_cast<std::size_t>(s)].capacity() > 0) {
          ws.pool[static_cast<std::size_t>(ws.slot[static_cast<std::size_t>(s)])] = std::move(ws.values[static_cast<std::size_t>(s)]);
        }
      }
    }
  }
}

Posteriors Evaluator::posteriors(const Workspace& ws) const {
  Posteriors post;
  post.rows = ws.batch;
  post.cols = static_cast<std::size_t>(graph_.query_cardinality());
  post.zero_mass = ws.zero_mass;
  const auto& out = ws.values[static_cast<std::size_t>(storage_[static_cast<std::size_t>(graph_.output)])];
  const bool batched = graph_.nodes[static_cast<std::size_t>(graph_.output)].batched;
  post.values.resize(post.rows * post.cols);
  for (std::size_t r = 0; r < post.rows; ++r) {
    std::copy_n(out.begin() + static_cast<std::ptrdiff_t>((batched ? r : 0) * post.cols), post.cols,
                post.values.begin() + static_cast<std::ptrdiff_t>(r * post.cols));
  }
  return post;
}

Gradients Evaluator::backward(const Workspace& ws, const ParamStore& params,
                              std::span<const double> output_grad) const {
  const auto& g = graph_;
  const std::size_t B = ws.batch;
  const std::size_t Q = static_cast<std::size_t>(g.query_cardinality());
  if (output_grad.size() != B * Q) throw ValidationError("output gradient has the wrong size");
  std::vector<std::vector<double>> grad(g.nodes.size());
  auto grad_of = [&](int node) -> std::vector<double>& {
    const auto s = static_cast<std::size_t>(storage_[static_cast<std::size_t>(node)]);
    if (grad[s].empty()) grad[s].assign(ws.values[s].size(), 0.0);
    return grad[s];
  };
  {
    auto& go = grad_of(g.output);
    const bool batched = g.nodes[static_cast<std::size_t>(g.output)].batched;
    for (std::size_t r = 0; r < B; ++r) {
      if (ws.zero_mass[r]) continue;
      for (std::size_t q = 0; q < Q; ++q) go[(batched ? r : 0) * Q + q] += output_grad[r * Q + q];
    }
  }
  std::vector<std::vector<double>> slot_grad(params.slots().size());

  for (std::size_t i = g.nodes.size(); i-- > 0;) {
    const OpNode& node = g.nodes[i];
    if (node.kind == OpKind::reshape || grad[i].empty()) continue;
    const Plan& p = plans_[i];
    const std::size_t rows = node.batched ? B : 1;
    const auto& gout = grad[i];
    auto in_index = [&](int k) { return node.inputs[static_cast<std::size_t>(k)]; };
    auto value = [&](int k) -> const std::vector<double>& {
      return ws.values[static_cast<std::size_t>(storage_[static_cast<std::size_t>(in_index(k))])];
    };
    auto batched = [&](int k) { return g.nodes[static_cast<std::size_t>(in_index(k))].batched; };
    switch (node.kind) {
      case OpKind::parameter: {
        const std::size_t si = params.slot_index(node.binding);
        auto& sg = slot_grad[si];
        if (sg.empty()) sg.assign(params.slots()[si].values.size(), 0.0);
        for (std::size_t e = 0; e < p.count; ++e) sg[p.map[e]] += gout[e];
        break;
      }
      case OpKind::input:
        break;
      case OpKind::elem_multiply: {
        const auto& a = value(0);
        const auto& b = value(1);
        auto& ga = grad_of(in_index(0));
        auto& gb = grad_of(in_index(1));
        const std::size_t bn = b.size() / (batched(1) ? B : 1);
        for (std::size_t r = 0; r < rows; ++r) {
          const std::size_t ra = (batched(0) ? r : 0) * p.count, rb = (batched(1) ? r : 0) * bn;
          const double* go = gout.data() + r * p.count;
          for (std::size_t e = 0; e < p.count; ++e) {
            ga[ra + e] += go[e] * b[rb + p.map[e]];
            gb[rb + p.map[e]] += go[e] * a[ra + e];
          }
        }
        break;
      }
      case OpKind::reduce_sum: {
        auto& ga = grad_of(in_index(0));
        const std::size_t an = p.map.size();
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t e = 0; e < an; ++e) ga[r * an + e] += gout[r * p.count + p.map[e]];
        }
        break;
      }
      case OpKind::transpose: {
        auto& ga = grad_of(in_index(0));
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t k = 0; k < p.map.size(); ++k) {
            for (std::size_t j = 0; j < p.run; ++j) ga[r * p.count + p.map[k] + j * p.step] += gout[r * p.count + k * p.run + j];
          }
        }
        break;
      }
      case OpKind::multiply_project: {
        const auto& a = value(0);
        const auto& b = value(1);
        auto& ga = grad_of(in_index(0));
        auto& gb = grad_of(in_index(1));
        const std::size_t an = p.c * p.x * p.s, bn = p.c * p.s * p.y;
        for (std::size_t r = 0; r < rows; ++r) {
          const std::size_t ra = (batched(0) ? r : 0) * an, rb = (batched(1) ? r : 0) * bn;
          const double* go = gout.data() + r * p.count;
          for (std::size_t c = 0; c < p.c; ++c) {
            for (std::size_t x = 0; x < p.x; ++x) {
              const double* grow = go + (c * p.x + x) * p.y;
              for (std::size_t s = 0; s < p.s; ++s) {
                const std::size_t ai = ra + (c * p.x + x) * p.s + s;
                const std::size_t bi = rb + (c * p.s + s) * p.y;
                double acc = 0.0;
                for (std::size_t y = 0; y < p.y; ++y) {
                  acc += grow[y] * b[bi + y];
                  gb[bi + y] += a[ai] * grow[y];
                }
                ga[ai] += acc;
              }
            }
          }
        }
        break;
      }
      case OpKind::normalize: {
        const auto& a = value(0);
        const auto& o = ws.values[i];
        auto& ga = grad_of(in_index(0));
        for (std::size_t r = 0; r < rows; ++r) {
          const double* ar = a.data() + r * p.count;
          double total = 0.0;
          for (std::size_t e = 0; e < p.count; ++e) total += ar[e];
          if (!(total > 0.0)) continue;
          double dot = 0.0;
          for (std::size_t e = 0; e < p.count; ++e) dot += gout[r * p.count + e] * o[r * p.count + e];
          for (std::size_t e = 0; e < p.count; ++e) {
            ga[r * p.count + e] += (gout[r * p.count + e] - dot) / total;
          }
        }
        break;
      }
      case OpKind::reshape:
        break;
    }
  }
  Gradients out;
  for (std::size_t si = 0; si < slot_grad.size(); ++si) {
    const auto& s = params.slots()[si];
    if (s.frozen || slot_grad[si].empty()) continue;
    out[s.name] = params.logit_gradient(s, slot_grad[si]);
  }
  return out;
}

Posteriors evaluate(const OpsGraph& graph, const ParamStore& params, const Batch& batch) {
  const Evaluator ev(graph);
  return ev.posteriors(ev.forward(params, batch, false));
}

Gradients backward(const OpsGraph& graph, const ParamStore& params, const Batch& batch,
                   std::span<const double> output_grad) {
  const Evaluator ev(graph);
  return ev.backward(ev.forward(params, batch, true), params, output_grad);
}

unsigned thread_budget() {
  if (const char* env = std::getenv("FVE_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return static_cast<unsigned>(n);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

Posteriors evaluate_parallel(const Evaluator& ev, const ParamStore& params, const Batch& batch,
                             unsigned threads) {
  // Fixed-size row chunks keep the working set small; each row is computed
  // independently, so the result does not depend on the thread count.
  constexpr std::size_t kChunk = 32;
  const std::size_t chunks = (batch.size + kChunk - 1) / kChunk;
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(chunks, 1))));
  if (chunks <= 1) return ev.posteriors(ev.forward(params, batch, false));
  std::vector<Posteriors> parts(chunks);
  auto work = [&](unsigned t) {
    for (std::size_t k = t; k < chunks; k += threads) {
      const std::size_t begin = k * kChunk;
      const Batch part = slice_batch(batch, begin, std::min(batch.size, begin + kChunk));
      parts[k] = ev.posteriors(ev.forward(params, part, false));
    }
  };
  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work, t);
    for (auto& th : pool) th.join();
  }
  Posteriors out;
  out.rows = batch.size;
  out.cols = static_cast<std::size_t>(ev.graph().query_cardinality());
  for (auto& p : parts) {
    out.values.insert(out.values.end(), p.values.begin(), p.values.end());
    out.zero_mass.insert(out.zero_mass.end(), p.zero_mass.begin(), p.zero_mass.end());
  }
  return out;
}

}  // namespace fve
