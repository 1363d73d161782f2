#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "fve/ops_graph.hpp"
#include "fve/params.hpp"

namespace fve {

struct Batch {
  std::size_t size = 0;
  // Per input variable: size x full_cardinality lambda values, row-major.
  // Inputs without an entry read all-ones rows.
  std::map<std::string, std::vector<double>> evidence;
  std::vector<int> labels;  // declared query value per row, or empty
};

struct Posteriors {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;   // rows x cols; zero rows where mass is zero
  std::vector<char> zero_mass;  // per row

  double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  std::size_t zero_mass_count() const;
};

// Precomputes index maps for a graph; cheap to share across threads.
class Evaluator {
 public:
  explicit Evaluator(OpsGraph graph);

  const OpsGraph& graph() const { return graph_; }

  struct Workspace {
    std::size_t batch = 0;
    std::vector<std::vector<double>> values;  // by storage slot
    std::vector<char> zero_mass;
    // Buffer reuse: node i computes into pool[slot[i]]; slots are planned
    // once per batch size so repeated calls allocate nothing.
    std::vector<std::vector<double>> pool;
    std::vector<int> slot;
    std::size_t planned_batch = 0;
    bool planned_keep = false;
    // Scratch for row tiles when intermediates are not kept.
    std::unique_ptr<Workspace> tile;
  };

  // `keep_all` retains every intermediate for backward; otherwise buffers
  // are released after their last use.
  Workspace forward(const ParamStore& params, const Batch& batch, bool keep_all = true) const;
  // Same, reusing the buffers of an earlier workspace.
  void forward(const ParamStore& params, const Batch& batch, Workspace& ws, bool keep_all) const;
  Posteriors posteriors(const Workspace& ws) const;
  // `output_grad`: batch x |Q| gradient of the loss wrt the posterior.
  Gradients backward(const Workspace& ws, const ParamStore& params,
                     std::span<const double> output_grad) const;

 private:
  void plan_slots(Workspace& ws, std::size_t batch, bool keep_all) const;
  void run(const ParamStore& params, const Batch& batch, Workspace& ws, bool keep_all) const;

  struct Plan {
    std::vector<std::uint32_t> map;  // kind-specific index map
    std::size_t count = 0;           // elements per row
    std::size_t c = 1, x = 1, s = 1, y = 1;  // multiply_project
    std::size_t width = 0;                    // input: evidence row width
    // transpose: `map` holds block starts; each block is `run` entries read
    // `step` apart.
    std::size_t run = 1, step = 1;
  };

  const std::vector<double>& row_source(const Workspace& ws, int node) const;

  OpsGraph graph_;
  std::vector<Plan> plans_;
  std::vector<int> storage_;   // node -> storage slot (reshape aliases)
  std::vector<int> last_use_;  // storage -> last consuming node
  std::size_t tile_rows_ = 1;  // rows per tile when intermediates are dropped
};

// One-shot helpers.
Posteriors evaluate(const OpsGraph& graph, const ParamStore& params, const Batch& batch);
Gradients backward(const OpsGraph& graph, const ParamStore& params, const Batch& batch,
                   std::span<const double> output_grad);

// Row r of `evidence` gives lambda for every input; threads read FVE_THREADS.
Posteriors evaluate_parallel(const Evaluator& ev, const ParamStore& params, const Batch& batch,
                             unsigned threads);

unsigned thread_budget();  // FVE_THREADS, default hardware concurrency

}  // namespace fve
