#include <chrono>
#include <cmath>
#include <random>

#include "fve/scalar_ac.hpp"

#if defined(__SSE2__)
#include <xmmintrin.h>
#endif

namespace fve {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

class FlushDenormals {
 public:
  explicit FlushDenormals(bool on) {
#if defined(__SSE2__)
    saved_ = _mm_getcsr();
    if (on) _mm_setcsr(saved_ | 0x8040);  // FTZ | DAZ
#else
    (void)on;
#endif
  }
  ~FlushDenormals() {
#if defined(__SSE2__)
    _mm_setcsr(saved_);
#endif
  }
  FlushDenormals(const FlushDenormals&) = delete;
  FlushDenormals& operator=(const FlushDenormals&) = delete;

 private:
  unsigned saved_ = 0;
};

void mean_std(const std::vector<double>& xs, double& mean, double& sd) {
  mean = 0.0;
  sd = 0.0;
  if (xs.empty()) return;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  for (double x : xs) sd += (x - mean) * (x - mean);
  sd = xs.size() > 1 ? std::sqrt(sd / static_cast<double>(xs.size() - 1)) : 0.0;
}

Batch random_batch(const OpsGraph& graph, std::size_t size, std::mt19937_64& rng) {
  Batch batch;
  batch.size = size;
  for (const auto& name : graph.inputs) {
    const auto& var = graph.variables[static_cast<std::size_t>(graph.variable_index(name))];
    const auto width = static_cast<std::size_t>(var.full_cardinality);
    auto& lam = batch.evidence[name];
    lam.assign(size * width, 0.0);
    for (std::size_t r = 0; r < size; ++r) {
      // Hard evidence on a value the compiled graph kept, so rows have mass
      // more often than not.
      std::uniform_int_distribution<int> pick(0, var.cardinality - 1);
      const int v = pick(rng);
      lam[r * width + static_cast<std::size_t>(var.keep.empty() ? v : var.keep[static_cast<std::size_t>(v)])] = 1.0;
    }
  }
  return batch;
}

}  // namespace

std::vector<BenchRow> bench_compare(const OpsGraph& graph, const ParamStore& params,
                                    const BenchOptions& options) {
  std::vector<BenchRow> report;
  if (options.repetitions <= 0) return report;
  const FlushDenormals mode(options.flush_denormals);
  const std::uint64_t size = graph_size(graph);
  const double per_million = static_cast<double>(size) / 1e6;
  const Evaluator ev(graph);
  const ScalarGraph sg = extract_scalar_graph(graph, params);
  std::mt19937_64 rng(options.seed);
  for (std::size_t b : options.batch_sizes) {
    if (b == 0) continue;
    BenchRow row;
    row.batch = b;
    row.size = size;
    row.max_binary_rank = max_tensor_binary_rank(graph);
    const Batch batch = random_batch(graph, b, rng);
    const auto rows = scalar_rows(graph, batch);
    const double norm = static_cast<double>(b) * per_million;
    std::vector<double> tensor, scalar, scalar_batch;
    ScalarRunner single(sg, 1);
    const bool batch_fits = sg.size() * b * sizeof(double) <= options.memory_limit_bytes;
    // One untimed pass sizes the tensor buffers; timed passes reuse them.
    Evaluator::Workspace ws;
    ev.forward(params, batch, ws, false);
    for (int rep = 0; rep < options.repetitions; ++rep) {
      auto t0 = Clock::now();
      ev.forward(params, batch, ws, false);
      tensor.push_back(seconds_since(t0) / norm);

      double total = 0.0;
      for (std::size_t r = 0; r < b; ++r) {
        single.bind(std::span<const double>(rows).subspan(r * sg.row_width, sg.row_width));
        t0 = Clock::now();
        single.sweep();
        total += seconds_since(t0);
      }
      scalar.push_back(total / norm);

      if (batch_fits) {
        ScalarRunner many(sg, b, true);
        many.bind(rows);
        t0 = Clock::now();
        many.sweep();
        scalar_batch.push_back(seconds_since(t0) / norm);
      }
    }
    mean_std(tensor, row.tensor_mean, row.tensor_std);
    mean_std(scalar, row.scalar_mean, row.scalar_std);
    if (batch_fits) {
      mean_std(scalar_batch, row.scalar_batch_mean, row.scalar_batch_std);
    } else {
      row.scalar_batch_mean = row.scalar_batch_std = -1.0;
    }
    row.scalar_ratio = row.scalar_mean / row.tensor_mean;
    row.scalar_batch_ratio = batch_fits ? row.scalar_batch_mean / row.tensor_mean : -1.0;
    report.push_back(row);
  }
  return report;
}

}  // namespace fve
