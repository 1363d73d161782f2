#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "fve/error.hpp"
#include "fve/train.hpp"

namespace fve {

double accuracy(const Posteriors& post, std::span<const int> labels) {
  if (post.rows == 0) return 0.0;
  std::size_t hits = 0;
  for (std::size_t r = 0; r < post.rows; ++r) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < post.cols; ++c) {
      if (post.at(r, c) > post.at(r, best)) best = c;
    }
    hits += static_cast<int>(best) == labels[r] ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(post.rows);
}

double accuracy(const OpsGraph& graph, const ParamStore& params, const Dataset& data) {
  const Evaluator ev(graph);
  const Batch batch = make_batch(graph, data);
  return accuracy(evaluate_parallel(ev, params, batch, thread_budget()), data.labels);
}

TrainResult train(const OpsGraph& graph, ParamStore params, const Dataset& train_set,
                  const Dataset& test_set, const TrainConfig& config) {
  if (config.batch_size == 0) throw ValidationError("batch size must be positive");
  if (!std::isfinite(config.lr) || config.lr < 0) throw ValidationError("learning rate must be finite and >= 0");
  const Evaluator ev(graph);
  const auto Q = static_cast<std::size_t>(graph.query_cardinality());
  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  const Batch test_batch = config.track_test ? make_batch(graph, test_set) : Batch{};

  TrainResult result;
  std::vector<double> losses(train_set.size());
  std::vector<char> hit(train_set.size());
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    EpochRecord rec;
    rec.epoch = epoch;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      const std::span<const std::size_t> rows(order.data() + begin, end - begin);
      const Batch batch = make_batch(graph, train_set, rows);
      const auto ws = ev.forward(params, batch, true);
      const Posteriors post = ev.posteriors(ws);
      std::vector<double> grad(post.rows * Q, 0.0);
      const double scale = 1.0 / static_cast<double>(rows.size());
      for (std::size_t r = 0; r < post.rows; ++r) {
        const std::size_t ex = rows[r];
        const auto label = static_cast<std::size_t>(batch.labels[r]);
        if (label >= Q) throw ValidationError("label out of range");
        std::size_t best = 0;
        for (std::size_t c = 1; c < Q; ++c) best = post.at(r, c) > post.at(r, best) ? c : best;
        hit[ex] = best == label;
        if (post.zero_mass[r]) {
          losses[ex] = 0.0;
          ++rec.zero_mass;
          continue;
        }
        const double p = post.at(r, label);
        losses[ex] = -std::log(p);
        if (!std::isfinite(losses[ex])) {
          throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + " (example " +
                              std::to_string(ex) + ", probability of label " + std::to_string(p) + ")");
        }
        grad[r * Q + label] = -scale / p;
      }
      params.step(ev.backward(ws, params, grad), config.lr);
    }
    double total = 0.0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < losses.size(); ++i) {
      total += losses[i];
      hits += hit[i] ? 1 : 0;
    }
    if (!losses.empty()) {
      rec.loss = total / static_cast<double>(losses.size());
      rec.train_accuracy = static_cast<double>(hits) / static_cast<double>(losses.size());
    }
    if (!std::isfinite(rec.loss)) throw TrainingError("loss diverged at epoch " + std::to_string(epoch));
    if (config.track_test && test_set.size() > 0) {
      rec.test_accuracy = accuracy(evaluate_parallel(ev, params, test_batch, thread_budget()), test_set.labels);
    }
    result.history.push_back(rec);
  }
  result.params = std::move(params);
  return result;
}

}  // namespace fve
