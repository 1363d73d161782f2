// Acceptance suite: one PASS/FAIL line per criterion. Pass criterion numbers
// as arguments to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "fve/cli.hpp"
#include "fve/compiler.hpp"
#include "fve/engine.hpp"
#include "fve/scalar_ac.hpp"
#include "fve/studies.hpp"
#include "fve/train.hpp"
#include "gradcheck.hpp"
#include "oracle.hpp"
#include "theorems.hpp"

using namespace fve;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Query all_evidence(const Network& net, const std::string& q) {
  Query out{q, {}};
  for (VarId e : net.evidence) out.evidence.push_back(net.name(e));
  return out;
}

Query last_given_rest(const Network& net) {
  const auto n = static_cast<VarId>(net.size());
  Query q{net.name(n - 1), {}};
  for (VarId v = 0; v + 1 < n; ++v) q.evidence.push_back(net.name(v));
  return q;
}

Batch stack(const Network& net, const std::vector<std::string>& ev, std::size_t rows, std::mt19937_64& rng) {
  Batch b;
  b.size = rows;
  for (std::size_t r = 0; r < rows; ++r) {
    for (const auto& [name, l] : ref::random_lambda(net, ev, rng)) {
      b.evidence[name].insert(b.evidence[name].end(), l.begin(), l.end());
    }
  }
  return b;
}

// 1. Compiled posteriors against joint enumeration.
Outcome exactness() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(1001);
  double worst = 0.0;
  int nets = 0, queries = 0, zero_rows = 0;
  bool flags_agree = true;
  for (double f : {0.0, 0.25, 0.5, 0.8}) {
    for (int k = 0; k < 60; ++k, ++nets) {
      const int n = 4 + static_cast<int>(rng() % 9);
      const auto net = random_network({n, 4, f, rng()});
      Query q{net.name(static_cast<VarId>(rng() % static_cast<std::uint64_t>(n))), {}};
      for (VarId v = 0; v < n; ++v) {
        if (rng() % 2) q.evidence.push_back(net.name(v));
      }
      const auto comp = compile_query(net, q);
      const auto params = ParamStore::from_network(net);
      for (int row = 0; row < 3; ++row, ++queries) {
        const auto lam = ref::random_lambda(net, q.evidence, rng);
        const auto post = evaluate(comp.graph, params, ref::single_row(lam));
        double mass = 0.0;
        auto want = ref::joint_posterior(net, q.query, lam, &mass);
        if (mass == 0.0) {
          ++zero_rows;
          flags_agree = flags_agree && post.zero_mass[0];
          continue;
        }
        flags_agree = flags_agree && !post.zero_mass[0];
        for (std::size_t c = 0; c < want.size(); ++c) worst = std::max(worst, std::abs(post.at(0, c) - want[c] / mass));
      }
    }
  }
  const double secs = since(t0);
  return {worst < 1e-9 && flags_agree && nets >= 200 && secs < 60.0,
          std::to_string(nets) + " networks, " + std::to_string(queries) + " queries (" + std::to_string(zero_rows) +
              " zero-mass), max diff " + fmt("%.2e", worst) + ", " + fmt("%.1f", secs) + " s"};
}

// 2. Factor identities on random instances.
Outcome identities() {
  std::mt19937_64 rng(1002);
  const std::vector<std::pair<const char*, std::function<double(std::mt19937_64&)>>> checks{
      {"sum-order", ref::check_sum_order},
      {"sum-distributes", ref::check_sum_distributes},
      {"functional-sum", ref::check_functional_sum},
      {"functional-split", ref::check_functional_split},
      {"functional-duplicate", ref::check_functional_duplicate}};
  bool ok = true;
  std::string detail;
  for (const auto& [name, check] : checks) {
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) worst = std::max(worst, check(rng));
    ok = ok && worst <= 1e-12;
    detail += std::string(detail.empty() ? "" : ", ") + name + " " + fmt("%.1e", worst);
  }
  return {ok, "1000 instances each: " + detail};
}

// 3. Rank reduction grows with the functional fraction.
Outcome rank_trend() {
  const auto t0 = Clock::now();
  std::vector<double> means;
  std::string detail;
  for (double f : {0.25, 0.5, 0.67, 0.8}) {
    double total = 0.0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto net = random_network({75, 4, f, 3000 + seed});
      const auto q = last_given_rest(net);
      const auto off = jointree_report(net, q, {false, true});
      const auto on = jointree_report(net, q, {true, true});
      total += off.stats.max_binary_rank - on.stats.max_binary_rank;
    }
    means.push_back(total / 10.0);
    detail += (detail.empty() ? "" : " / ") + fmt("%.2f", means.back());
  }
  bool increasing = true;
  for (std::size_t i = 1; i < means.size(); ++i) increasing = increasing && means[i] > means[i - 1];
  const double secs = since(t0);
  return {increasing && means.back() >= 5.0 && secs < 600.0,
          "mean reduction at 25/50/67/80%: " + detail + " bits, " + fmt("%.1f", secs) + " s"};
}

struct RankPair {
  double off = 0, on = 0, compile_seconds = 0;
};

RankPair shrink_ranks(const Network& net, const std::string& query) {
  const auto q = all_evidence(net, query);
  RankPair r;
  r.off = jointree_report(net, q, {false, true}).stats.max_binary_rank;
  const auto t0 = Clock::now();
  const auto comp = compile_query(net, q);
  r.compile_seconds = since(t0);
  r.on = comp.stats.max_binary_rank;
  return r;
}

// 4. Rectangle models.
Outcome rectangle_shrinking() {
  const auto r8 = shrink_ranks(rectangle_model(8), "label");
  const auto r10 = shrink_ranks(rectangle_model(10), "label");
  const bool ok = r8.on <= r8.off - 1.5 && r8.on <= 15.0 && r10.on <= r10.off - 2.5 && r8.compile_seconds < 120.0 &&
                  r10.compile_seconds < 120.0;
  return {ok, "8x8 " + fmt("%.1f", r8.off) + " -> " + fmt("%.1f", r8.on) + " (" + fmt("%.2f", r8.compile_seconds) +
                  " s), 10x10 " + fmt("%.1f", r10.off) + " -> " + fmt("%.1f", r10.on) + " (" +
                  fmt("%.2f", r10.compile_seconds) + " s)"};
}

// 5. Digits model.
Outcome digits_shrinking() {
  const auto r = shrink_ranks(digits_model(8), "digit");
  return {r.off >= 25.0 && r.on <= 16.0 && r.compile_seconds < 600.0,
          "8x8 " + fmt("%.1f", r.off) + " -> " + fmt("%.1f", r.on) + " (" + fmt("%.2f", r.compile_seconds) + " s)"};
}

// 6. Reverse mode against central differences.
Outcome gradients() {
  std::mt19937_64 rng(1006);
  std::set<OpKind> kinds;
  double worst = 0.0;
  std::size_t checked = 0;
  int graphs = 0;
  for (std::uint64_t seed = 0; seed < 24; ++seed, ++graphs) {
    const int n = 6 + static_cast<int>(seed % 7);
    const auto net = random_network({n, 4, seed % 3 == 0 ? 0.0 : 0.5, 6000 + seed});
    std::vector<std::string> ev;
    for (VarId v = 0; v < n; ++v) {
      if (rng() % 3) ev.push_back(net.name(v));
    }
    const Query q{net.name(static_cast<VarId>(rng() % static_cast<std::uint64_t>(n))), ev};
    const auto comp = compile_query(net, q, {seed % 2 == 0, seed % 4 != 1});
    for (const auto& node : comp.graph.nodes) kinds.insert(node.kind);
    const auto params = ParamStore::from_network(net, {seed % 2 == 1, seed, 0.5});
    const auto r = ref::check_gradients(comp.graph, params, stack(net, ev, 3, rng), rng);
    worst = std::max(worst, r.worst_relative);
    checked += r.checked;
  }
  // Rectangle models bring transposes and larger combines.
  for (int n : {4, 5}) {
    const auto net = rectangle_model(n);
    const auto q = all_evidence(net, "label");
    const auto comp = compile_query(net, q);
    for (const auto& node : comp.graph.nodes) kinds.insert(node.kind);
    const auto params = ParamStore::from_network(net, {true, 7, 0.5});
    const auto r = ref::check_gradients(comp.graph, params, stack(net, q.evidence, 2, rng), rng);
    worst = std::max(worst, r.worst_relative);
    checked += r.checked;
    ++graphs;
  }
  const std::size_t all_kinds = 8;
  return {worst < 1e-4 && graphs >= 20 && kinds.size() == all_kinds,
          std::to_string(graphs) + " graphs, " + std::to_string(checked) + " logits, " + std::to_string(kinds.size()) +
              "/8 node kinds, worst relative error " + fmt("%.2e", worst)};
}

// 7. Background knowledge against a fully trainable model.
Outcome learning() {
  const auto t0 = Clock::now();
  const int n = 8;
  const auto net = rectangle_model(n);
  const auto q = all_evidence(net, "label");
  const auto frozen = compile_query(net, q);
  const auto free = compile_query(net, q, {false, false});
  const auto train_all = rectangle_dataset(n, Split::train, 71);
  const auto test_all = rectangle_dataset(n, Split::test, 72);
  double frozen500 = 0, frozen100 = 0, free100 = 0;
  const int seeds = 5;
  for (int s = 0; s < seeds; ++s) {
    const auto seed = static_cast<std::uint64_t>(s);
    const auto test = sample_rows(test_all, 1000, 700 + seed);
    const auto train500 = sample_rows(train_all, 500, 800 + seed);
    const auto train100 = sample_rows(train_all, 100, 900 + seed);
    TrainConfig cfg;
    cfg.lr = 0.1;
    cfg.batch_size = 16;
    cfg.epochs = 5;
    cfg.seed = seed;
    cfg.track_test = false;
    const auto start = ParamStore::from_network(net, {true, seed, 0.5});
    frozen500 += accuracy(frozen.graph, train(frozen.graph, start, train500, test, cfg).params, test);
    frozen100 += accuracy(frozen.graph, train(frozen.graph, start, train100, test, cfg).params, test);
    // The unconstrained model gets eight times the epochs.
    cfg.epochs = 40;
    const auto open = ParamStore::from_network(net, {false, seed, 0.0});
    free100 += accuracy(free.graph, train(free.graph, open, train100, test, cfg).params, test);
  }
  frozen500 /= seeds;
  frozen100 /= seeds;
  free100 /= seeds;
  const double secs = since(t0);
  return {frozen500 >= 0.90 && frozen100 - free100 >= 0.10 && secs < 1200.0,
          "frozen@500 " + fmt("%.4f", frozen500) + ", frozen@100 " + fmt("%.4f", frozen100) + ", trainable@100 " +
              fmt("%.4f", free100) + " (" + std::to_string(seeds) + " seeds, " + fmt("%.0f", secs) + " s)"};
}

// 8. Scalar circuits agree with the tensor engine.
Outcome scalar_equivalence() {
  std::mt19937_64 rng(1008);
  double worst_engine = 0.0, worst_batch = 0.0;
  bool flags = true;
  int nets = 0;
  for (std::uint64_t seed = 0; seed < 60; ++seed, ++nets) {
    const int n = 5 + static_cast<int>(seed % 8);
    const auto net = random_network({n, 4, 0.25 * static_cast<double>(seed % 4), 8000 + seed});
    std::vector<std::string> ev;
    for (VarId v = 0; v < n; ++v) {
      if (rng() % 2) ev.push_back(net.name(v));
    }
    const Query q{net.name(static_cast<VarId>(rng() % static_cast<std::uint64_t>(n))), ev};
    const auto g = compile_query(net, q).graph;
    const auto params = ParamStore::from_network(net);
    const auto sg = extract_scalar_graph(g, params);
    const std::size_t b = 8;
    const auto batch = stack(net, ev, b, rng);
    const auto post = evaluate(g, params, batch);
    const auto all = eval_scalar_batch(sg, scalar_rows(g, batch), b);
    const std::size_t Q = sg.outputs.size();
    for (std::size_t r = 0; r < b; ++r) {
      const auto one = eval_scalar(sg, scalar_row(g, batch, r));
      flags = flags && (one.zero_division[0] != 0) == (post.zero_mass[r] != 0) &&
              one.zero_division[0] == all.zero_division[r];
      for (std::size_t k = 0; k < Q; ++k) {
        worst_engine = std::max(worst_engine, std::abs(one.outputs[k] - post.at(r, k)));
        worst_batch = std::max(worst_batch, std::abs(one.outputs[k] - all.outputs[r * Q + k]));
      }
    }
  }
  return {nets >= 50 && worst_engine <= 1e-9 && worst_batch <= 1e-12 && flags,
          std::to_string(nets) + " networks, scalar vs engine " + fmt("%.2e", worst_engine) +
              ", batch vs row " + fmt("%.2e", worst_batch)};
}

// 9. Tensor vs scalar vs scalar-batch timing on large random circuits.
Outcome representation_bench() {
  const auto t0 = Clock::now();
  const double limit = 5e6;
  const int wanted = 3;
  BenchOptions opts;
  opts.batch_sizes = {1, 10, 20};
  opts.repetitions = 5;
  std::vector<std::vector<BenchRow>> runs;
  std::uint64_t seed = 9000;
  while (static_cast<int>(runs.size()) < wanted && seed < 9500) {
    const auto net = random_network({100, 5, 0.5, seed++});
    const auto q = last_given_rest(net);
    if (jointree_report(net, q).stats.max_binary_rank > std::log2(limit) + 1.0) continue;
    auto comp = compile_query(net, q);
    const auto size = static_cast<double>(graph_size(comp.graph));
    if (size < limit || size > 4 * limit) continue;
    opts.seed = seed;
    runs.push_back(bench_compare(comp.graph, ParamStore::from_network(net), opts));
  }
  if (static_cast<int>(runs.size()) < wanted) return {false, "too few random circuits in the size range"};
  std::string detail;
  bool ok = true;
  double scalar1 = 0, batch1 = 0;
  for (std::size_t k = 0; k < opts.batch_sizes.size(); ++k) {
    double ratio = 0;
    for (const auto& run : runs) ratio += run[k].scalar_ratio / wanted;
    detail += "b=" + std::to_string(opts.batch_sizes[k]) + " scalar/tensor " + fmt("%.2f", ratio) + "; ";
    if (opts.batch_sizes[k] >= 10) ok = ok && ratio >= 2.0;
  }
  for (const auto& run : runs) {
    scalar1 += run[0].scalar_mean / wanted;
    batch1 += run[0].scalar_batch_mean / wanted;
  }
  ok = ok && scalar1 < batch1;
  std::string sizes;
  for (const auto& run : runs) sizes += (sizes.empty() ? "" : ",") + fmt("%.1fM", static_cast<double>(run[0].size) / 1e6);
  return {ok, std::to_string(wanted) + " circuits (" + sizes + "), " + detail + "b=1 scalar " + fmt("%.4f", scalar1) +
                  " vs scalar-batch " + fmt("%.4f", batch1) + " s/M, " + fmt("%.0f", since(t0)) + " s"};
}

// 10. Posteriors normalise and seeded commands reproduce their reports.
Outcome determinism() {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / ("fve_accept_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  auto p = [&](const std::string& name) { return (dir / name).string(); };
  auto slurp = [](const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  auto run = [&](const std::vector<std::string>& args, std::string& out) {
    std::ostringstream o, e;
    const int code = run_cli(args, o, e);
    out = o.str();
    return code == 0;
  };
  // Drop the timing columns (4..) of a bench report.
  auto bench_shape = [](const std::string& text) {
    std::istringstream in(text);
    std::string line, kept;
    while (std::getline(in, line)) {
      std::istringstream ls(line);
      std::string cell;
      for (int c = 0; c < 3 && std::getline(ls, cell, '\t'); ++c) kept += cell + '\t';
      kept += '\n';
    }
    return kept;
  };

  const std::vector<std::vector<std::string>> commands{
      {"generate", "--model", "rectangle", "--size", "6", "--seed", "5", "--out", p("net.json"), "--train-data",
       p("train.csv"), "--test-data", p("test.csv"), "--train-count", "200", "--test-count", "300"},
      {"compile", "--network", p("net.json"), "--query", "label", "--out", p("g.json")},
      {"stats", "--network", p("net.json"), "--query", "label", "--ac-size", "on"},
      {"train", "--graph", p("g.json"), "--network", p("net.json"), "--train", p("train.csv"), "--test", p("test.csv"),
       "--epochs", "2", "--seed", "3", "--init-noise", "0.5", "--out", p("trained.json")},
      {"evaluate", "--graph", p("g.json"), "--network", p("trained.json"), "--data", p("test.csv")},
      {"bench", "--nodes", "14", "--size-limit", "2000", "--batch", "1", "4", "--repetitions", "1", "--seed", "4"}};
  bool same = true, ran = true;
  std::string posteriors;
  std::vector<std::string> mismatched;
  for (const auto& cmd : commands) {
    std::string first, second;
    ran = ran && run(cmd, first);
    std::string files_first;
    for (const auto& f : {"net.json", "train.csv", "test.csv", "g.json", "trained.json"}) files_first += slurp(p(f));
    ran = ran && run(cmd, second);
    std::string files_second;
    for (const auto& f : {"net.json", "train.csv", "test.csv", "g.json", "trained.json"}) files_second += slurp(p(f));
    if (cmd[0] == "bench") {
      first = bench_shape(first);
      second = bench_shape(second);
    }
    if (cmd[0] == "evaluate") posteriors = first;
    if (first != second || files_first != files_second) {
      same = false;
      mismatched.push_back(cmd[0]);
    }
  }

  // Every posterior row of the evaluate report, plus engine rows on random networks.
  double worst = 0.0;
  std::size_t rows = 0;
  {
    std::istringstream in(posteriors);
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      std::istringstream ls(line);
      std::vector<std::string> cells;
      std::string cell;
      while (std::getline(ls, cell, '\t')) cells.push_back(cell);
      if (cells.size() < 3 || cells.back() == "1") continue;
      double total = 0.0;
      for (std::size_t c = 1; c + 1 < cells.size(); ++c) total += std::stod(cells[c]);
      worst = std::max(worst, std::abs(total - 1.0));
      ++rows;
    }
  }
  std::mt19937_64 rng(1010);
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto net = random_network({10, 4, 0.5, 10000 + seed});
    const auto q = last_given_rest(net);
    const auto post = evaluate(compile_query(net, q).graph, ParamStore::from_network(net), stack(net, q.evidence, 20, rng));
    for (std::size_t r = 0; r < post.rows; ++r) {
      if (post.zero_mass[r]) continue;
      double total = 0.0;
      for (std::size_t c = 0; c < post.cols; ++c) total += post.at(r, c);
      worst = std::max(worst, std::abs(total - 1.0));
      ++rows;
    }
  }
  fs::remove_all(dir);
  std::string bad;
  for (const auto& m : mismatched) bad += " " + m;
  return {ran && same && rows > 0 && worst <= 1e-9,
          std::to_string(commands.size()) + " commands repeated" + (same ? " identically" : ", differing:" + bad) +
              "; " + std::to_string(rows) + " posterior rows, max |sum - 1| " + fmt("%.1e", worst)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"exactness", exactness},
      {"identities", identities},
      {"rank-trend", rank_trend},
      {"rectangle-shrinking", rectangle_shrinking},
      {"digits-shrinking", digits_shrinking},
      {"gradients", gradients},
      {"learning", learning},
      {"scalar-equivalence", scalar_equivalence},
      {"representation-bench", representation_bench},
      {"determinism", determinism}};
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!only.empty() && !only.count(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += o.pass ? 0 : 1;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << id << " " << criteria[i].first << ": " << o.detail << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
