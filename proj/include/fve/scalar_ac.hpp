#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fve/engine.hpp"

namespace fve {

enum class ScalarKind : std::uint8_t { constant, input, add, mul, div };

// One node per scalar; constants first, then inputs, then operations in
// topological order. Children of an operation always precede it.
struct ScalarGraph {
  std::vector<std::uint8_t> kind;
  std::vector<std::int32_t> lhs, rhs;  // operation children; -1 otherwise
  std::vector<double> constants;       // value of constant node k
  std::vector<std::int32_t> input_column;  // input node k reads row[input_column[k]]
  std::size_t row_width = 0;
  std::vector<std::int32_t> outputs;  // one per query value

  std::size_t size() const { return kind.size(); }
  std::size_t first_op() const { return constants.size() + input_column.size(); }
  std::size_t op_count() const { return size() - first_op(); }
  friend bool operator==(const ScalarGraph&, const ScalarGraph&) = default;
};

// Parameter entries become constants taken from `params`.
ScalarGraph extract_scalar_graph(const OpsGraph& graph, const ParamStore& params);

// Evidence row for the scalar graph: every input's full lambda vector,
// concatenated in graph input order.
std::vector<double> scalar_row(const OpsGraph& graph, const Batch& batch, std::size_t row);
std::vector<double> scalar_rows(const OpsGraph& graph, const Batch& batch);

struct ScalarResult {
  std::vector<double> outputs;  // rows x |Q|
  std::vector<char> zero_division;  // per row
};

ScalarResult eval_scalar(const ScalarGraph& g, std::span<const double> row);
// `rows`: b x row_width.
ScalarResult eval_scalar_batch(const ScalarGraph& g, std::span<const double> rows, std::size_t b);

// Reusable buffers so timing covers the arithmetic sweep only.
class ScalarRunner {
 public:
  // `vector_sweep` runs the scalar-batch sweep (per-node loops over the
  // batch) even when the batch has one row.
  explicit ScalarRunner(const ScalarGraph& g, std::size_t batch = 1, bool vector_sweep = false);
  void bind(std::span<const double> rows);  // batch x row_width
  void sweep();
  ScalarResult result() const;

 private:
  const ScalarGraph& g_;
  std::size_t b_;
  bool vector_;
  std::vector<double> values_;  // nodes x b
  std::vector<char> flags_;
};

struct BenchRow {
  std::size_t batch = 0;
  std::uint64_t size = 0;
  double max_binary_rank = 0.0;
  // Seconds per batch row per million graph entries; mean and stdev over
  // repetitions. Negative when the representation was skipped.
  double tensor_mean = 0, tensor_std = 0;
  double scalar_mean = 0, scalar_std = 0;
  double scalar_batch_mean = 0, scalar_batch_std = 0;
  double scalar_ratio = 0;        // scalar / tensor
  double scalar_batch_ratio = 0;  // scalar-batch / tensor
};

struct BenchOptions {
  std::vector<std::size_t> batch_sizes{1, 10, 20};
  int repetitions = 3;
  std::uint64_t seed = 0;
  // Scalar-batch runs whose value matrix would exceed this are skipped.
  std::size_t memory_limit_bytes = std::size_t{2} << 30;
  // All three representations run with subnormals flushed to zero (x86
  // only); the previous floating-point mode is restored afterwards.
  bool flush_denormals = true;
};

std::vector<BenchRow> bench_compare(const OpsGraph& graph, const ParamStore& params,
                                    const BenchOptions& options);

}  // namespace fve
