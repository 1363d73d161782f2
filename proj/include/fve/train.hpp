#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fve/engine.hpp"

namespace fve {

struct Dataset {
  std::vector<std::string> columns;    // evidence variables
  std::string label;                   // query variable
  std::vector<std::vector<int>> rows;  // declared value index, -1 when absent
  std::vector<int> labels;

  std::size_t size() const { return rows.size(); }
  Dataset subset(std::span<const std::size_t> indices) const;
};

// CSV with a header row; `?` marks absent evidence; the last column is the label.
Dataset load_dataset(const std::string& path);
void save_dataset(const Dataset& data, const std::string& path);

Batch make_batch(const OpsGraph& graph, const Dataset& data, std::span<const std::size_t> rows);
Batch make_batch(const OpsGraph& graph, const Dataset& data);

struct TrainConfig {
  double lr = 0.05;
  std::size_t batch_size = 16;
  int epochs = 10;
  std::uint64_t seed = 0;
  bool track_test = true;  // test accuracy after every epoch
};

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;  // mean cross-entropy over the epoch's examples
  double train_accuracy = 0.0;
  double test_accuracy = -1.0;  // -1 when not tracked
  std::size_t zero_mass = 0;
};

struct TrainResult {
  ParamStore params;
  std::vector<EpochRecord> history;
};

TrainResult train(const OpsGraph& graph, ParamStore params, const Dataset& train_set,
                  const Dataset& test_set, const TrainConfig& config);

// Argmax ties go to the lower value; zero-mass rows count as value 0.
double accuracy(const OpsGraph& graph, const ParamStore& params, const Dataset& data);
double accuracy(const Posteriors& post, std::span<const int> labels);

}  // namespace fve
