#include "fve/cli.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "fve/compiler.hpp"
#include "fve/error.hpp"
#include "fve/scalar_ac.hpp"
#include "fve/studies.hpp"

namespace fve {

namespace {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

// Delimited report; `table` pads columns for reading.
struct Report {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::string render(const std::string& format) const {
    std::ostringstream os;
    if (format == "table") {
      std::vector<std::size_t> width(header.size());
      for (std::size_t k = 0; k < header.size(); ++k) width[k] = header[k].size();
      for (const auto& r : rows) {
        for (std::size_t k = 0; k < r.size(); ++k) width[k] = std::max(width[k], r[k].size());
      }
      auto line = [&](const std::vector<std::string>& cells) {
        for (std::size_t k = 0; k < cells.size(); ++k) {
          os << (k ? "  " : "") << std::setw(static_cast<int>(width[k])) << cells[k];
        }
        os << '\n';
      };
      line(header);
      for (const auto& r : rows) line(r);
    } else {
      auto line = [&](const std::vector<std::string>& cells) {
        for (std::size_t k = 0; k < cells.size(); ++k) os << (k ? "\t" : "") << cells[k];
        os << '\n';
      };
      line(header);
      for (const auto& r : rows) line(r);
    }
    return os.str();
  }
};

std::string num(double v, int precision = 6) {
  std::ostringstream os;
  os << std::setprecision(precision) << v;
  return os.str();
}

std::string fixed(double v, int digits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

struct Run {
  std::string command;
  std::vector<std::string> args;
  std::vector<std::string> inputs, outputs;
  std::uint64_t seed = 0;
  Clock::time_point start = Clock::now();
  std::string manifest_path;

  void write() const {
    json doc;
    doc["command"] = command;
    doc["args"] = args;
    doc["seed"] = seed;
    json in = json::object(), outj = json::object();
    for (const auto& p : inputs) in[p] = file_digest(p);
    for (const auto& p : outputs) outj[p] = file_digest(p);
    doc["inputs"] = in;
    doc["outputs"] = outj;
    doc["wall_time_seconds"] = std::chrono::duration<double>(Clock::now() - start).count();
    std::ofstream os(manifest_path);
    if (!os) throw ValidationError("cannot write manifest " + manifest_path);
    os << doc.dump(1) << '\n';
  }
};

void emit(const std::string& text, const std::string& path, std::ostream& out, Run& run) {
  if (path.empty()) {
    out << text;
    return;
  }
  std::ofstream os(path);
  if (!os) throw ValidationError("cannot write " + path);
  os << text;
  os.close();
  run.outputs.push_back(path);
}

Query make_query(const Network& net, const std::string& query, const std::vector<std::string>& evidence) {
  Query q{query, {}};
  if (evidence.empty()) {
    for (VarId e : net.evidence) q.evidence.push_back(net.name(e));
  } else if (!(evidence.size() == 1 && evidence[0] == "none")) {
    q.evidence = evidence;
  }
  return q;
}

bool on_off(const std::string& v) { return v == "on"; }

}  // namespace

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return "missing";
  std::stringstream ss;
  ss << in.rdbuf();
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << fnv1a(ss.str());
  return os.str();
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Functional-aware variable elimination: compile, evaluate and train tensor circuits"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string format = "tsv";
  std::string manifest;
  app.add_option("--format", format, "report format")->check(CLI::IsMember({"tsv", "table"}));
  app.add_option("--manifest", manifest, "manifest path (default: <out>.manifest.json)");

  // generate
  auto* gen = app.add_subcommand("generate", "write a case-study network and datasets");
  std::string model = "rectangle", gen_out, train_out, test_out;
  int size = 8;
  RandomNetSpec rspec;
  std::uint64_t seed = 0;
  std::size_t train_count = 0, test_count = 0;
  gen->add_option("--model", model)->check(CLI::IsMember({"rectangle", "digits", "random"}));
  gen->add_option("--size", size, "image side");
  gen->add_option("--nodes", rspec.n, "random: node count");
  gen->add_option("--max-parents", rspec.k, "random: max parents");
  gen->add_option("--functional-fraction", rspec.f, "random: functional fraction of non-roots");
  gen->add_option("--seed", seed);
  gen->add_option("--out", gen_out, "network file")->required();
  gen->add_option("--train-data", train_out, "training dataset file");
  gen->add_option("--test-data", test_out, "test dataset file");
  gen->add_option("--train-count", train_count, "sample this many training rows (0: all)");
  gen->add_option("--test-count", test_count, "sample this many test rows (0: all)");

  // compile / stats
  std::string network_path, query, graph_out, functional = "on";
  std::vector<std::string> evidence;
  auto* comp = app.add_subcommand("compile", "compile a query into an ops graph");
  comp->add_option("--network", network_path)->required()->check(CLI::ExistingFile);
  comp->add_option("--query", query)->required();
  comp->add_option("--evidence", evidence, "input variables (default: declared; 'none' for no inputs)");
  comp->add_option("--functional", functional)->check(CLI::IsMember({"on", "off"}));
  std::string value_pruning = "on";
  comp->add_option("--value-pruning", value_pruning, "drop values ruled out by zero CPT entries")
      ->check(CLI::IsMember({"on", "off"}));
  comp->add_option("--out", graph_out, "ops graph file")->required();

  auto* stats = app.add_subcommand("stats", "jointree and circuit statistics with and without functional CPTs");
  std::string stats_out, which = "both", ac_size = "on";
  stats->add_option("--network", network_path)->required()->check(CLI::ExistingFile);
  stats->add_option("--query", query)->required();
  stats->add_option("--evidence", evidence);
  stats->add_option("--functional", which)->check(CLI::IsMember({"on", "off", "both"}));
  stats->add_option("--ac-size", ac_size, "also lower and report circuit size")->check(CLI::IsMember({"on", "off"}));
  stats->add_option("--out", stats_out);

  // evaluate
  std::string graph_path, data_path, eval_out;
  auto* eval = app.add_subcommand("evaluate", "posteriors for every dataset row");
  eval->add_option("--graph", graph_path)->required()->check(CLI::ExistingFile);
  eval->add_option("--network", network_path, "parameters")->required()->check(CLI::ExistingFile);
  eval->add_option("--data", data_path)->required()->check(CLI::ExistingFile);
  eval->add_option("--out", eval_out);

  // train
  TrainConfig config;
  std::string train_path, test_path, train_net_out, history_out, mode = "background";
  double init_noise = 0.0;
  auto* tr = app.add_subcommand("train", "gradient descent on cross-entropy");
  tr->add_option("--graph", graph_path)->required()->check(CLI::ExistingFile);
  tr->add_option("--network", network_path, "initial parameters")->required()->check(CLI::ExistingFile);
  tr->add_option("--train", train_path)->required()->check(CLI::ExistingFile);
  tr->add_option("--test", test_path)->check(CLI::ExistingFile);
  tr->add_option("--lr", config.lr);
  tr->add_option("--batch-size", config.batch_size);
  tr->add_option("--epochs", config.epochs);
  tr->add_option("--seed", config.seed);
  tr->add_option("--mode", mode, "background: freeze functional CPTs and fix zeros; trainable: learn everything")
      ->check(CLI::IsMember({"background", "trainable"}));
  tr->add_option("--init-noise", init_noise, "logit noise at initialisation (background mode)");
  tr->add_option("--out", train_net_out, "trained network file")->required();
  tr->add_option("--history", history_out, "per-epoch report (default: stdout)");

  // bench
  BenchOptions bench_opts;
  double size_limit = 5e6;
  std::string bench_out;
  auto* bench = app.add_subcommand("bench", "tensor vs scalar vs scalar-batch evaluation time");
  bench->add_option("--graph", graph_path, "ops graph (default: search random networks)")->check(CLI::ExistingFile);
  bench->add_option("--network", network_path, "parameters for --graph")->check(CLI::ExistingFile);
  bench->add_option("--batch", bench_opts.batch_sizes)->expected(1, -1);
  bench->add_option("--repetitions", bench_opts.repetitions);
  bench->add_option("--size-limit", size_limit, "minimum circuit size when searching random networks");
  bench->add_option("--nodes", rspec.n);
  bench->add_option("--max-parents", rspec.k);
  bench->add_option("--functional-fraction", rspec.f);
  bench->add_option("--seed", seed);
  bench->add_option("--out", bench_out);

  std::vector<const char*> argv{"fve"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return 0;
    }
    err << "error: " << e.what() << '\n';
    return e.get_exit_code() ? e.get_exit_code() : 2;
  }

  Run run;
  run.args = args;
  try {
    std::string primary_out;
    if (gen->parsed()) {
      run.command = "generate";
      run.seed = seed;
      Network net;
      std::string label;
      if (model == "rectangle") {
        net = rectangle_model(size);
      } else if (model == "digits") {
        net = digits_model(size);
      } else {
        rspec.seed = seed;
        net = random_network(rspec);
      }
      save_network(net, gen_out);
      run.outputs.push_back(gen_out);
      primary_out = gen_out;
      auto dataset = [&](Split split, std::uint64_t s) {
        if (model == "rectangle") return rectangle_dataset(size, split, s);
        if (model == "digits") return digits_dataset(size, split, s);
        throw ValidationError("random networks have no dataset");
      };
      if (!train_out.empty()) {
        Dataset d = dataset(Split::train, seed);
        if (train_count) d = sample_rows(d, train_count, seed + 1);
        save_dataset(d, train_out);
        run.outputs.push_back(train_out);
      }
      if (!test_out.empty()) {
        Dataset d = dataset(Split::test, seed + 2);
        if (test_count) d = sample_rows(d, test_count, seed + 3);
        save_dataset(d, test_out);
        run.outputs.push_back(test_out);
      }
      out << "nodes\t" << net.size() << '\n';
    } else if (comp->parsed()) {
      run.command = "compile";
      run.inputs.push_back(network_path);
      const Network net = load_network(network_path);
      CompileOptions opts;
      opts.functional = on_off(functional);
      opts.prune_values = on_off(value_pruning);
      const Compilation c = compile_query(net, make_query(net, query, evidence), opts);
      save_graph(c.graph, graph_out);
      run.outputs.push_back(graph_out);
      primary_out = graph_out;
      Report r{{"functional", "network_nodes", "max_cluster_rank", "max_binary_rank", "ac_size", "graph_nodes"},
               {{functional, std::to_string(c.network_nodes), std::to_string(c.stats.max_rank_vars),
                 fixed(c.stats.max_binary_rank, 1), std::to_string(graph_size(c.graph)),
                 std::to_string(c.graph.nodes.size())}}};
      out << r.render(format);
    } else if (stats->parsed()) {
      run.command = "stats";
      run.inputs.push_back(network_path);
      const Network net = load_network(network_path);
      const Query q = make_query(net, query, evidence);
      Report r{{"functional", "network_nodes", "max_cluster_rank", "max_binary_rank", "ac_size"}, {}};
      for (const bool f : {false, true}) {
        if ((which == "on" && !f) || (which == "off" && f)) continue;
        CompileOptions opts;
        opts.functional = f;
        std::size_t nodes = 0;
        ClusterStats cs;
        std::string size_cell = "-";
        if (ac_size == "on") {
          const Compilation c = compile_query(net, q, opts);
          nodes = c.network_nodes;
          cs = c.stats;
          size_cell = std::to_string(graph_size(c.graph));
        } else {
          const JointreeReport jr = jointree_report(net, q, opts);
          nodes = jr.network_nodes;
          cs = jr.stats;
        }
        r.rows.push_back({f ? "on" : "off", std::to_string(nodes), std::to_string(cs.max_rank_vars),
                          fixed(cs.max_binary_rank, 1), size_cell});
      }
      primary_out = stats_out;
      emit(r.render(format), stats_out, out, run);
    } else if (eval->parsed()) {
      run.command = "evaluate";
      run.inputs = {graph_path, network_path, data_path};
      const OpsGraph g = load_graph(graph_path);
      const Network net = load_network(network_path);
      const ParamStore params = ParamStore::from_network(net);
      const Dataset data = load_dataset(data_path);
      const Evaluator ev(g);
      const Posteriors post = evaluate_parallel(ev, params, make_batch(g, data), thread_budget());
      Report r;
      r.header.push_back("row");
      for (std::size_t c = 0; c < post.cols; ++c) r.header.push_back(g.query + "=" + std::to_string(c));
      r.header.push_back("zero_mass");
      for (std::size_t i = 0; i < post.rows; ++i) {
        std::vector<std::string> cells{std::to_string(i)};
        for (std::size_t c = 0; c < post.cols; ++c) cells.push_back(num(post.at(i, c), 17));
        cells.push_back(post.zero_mass[i] ? "1" : "0");
        r.rows.push_back(std::move(cells));
      }
      primary_out = eval_out;
      emit(r.render(format), eval_out, out, run);
      if (!data.labels.empty()) err << "accuracy\t" << num(accuracy(post, data.labels), 6) << '\n';
    } else if (tr->parsed()) {
      run.command = "train";
      run.seed = config.seed;
      run.inputs = {graph_path, network_path, train_path};
      if (!test_path.empty()) run.inputs.push_back(test_path);
      const OpsGraph g = load_graph(graph_path);
      Network net = load_network(network_path);
      ParamOptions popts;
      popts.background = mode == "background";
      popts.seed = config.seed;
      popts.init_noise = init_noise;
      ParamStore params = ParamStore::from_network(net, popts);
      const Dataset train_set = load_dataset(train_path);
      const Dataset test_set = test_path.empty() ? Dataset{} : load_dataset(test_path);
      config.track_test = !test_path.empty();
      const TrainResult res = train(g, std::move(params), train_set, test_set, config);
      res.params.write_back(net);
      if (!popts.background) {
        for (VarId v = 0; v < static_cast<VarId>(net.size()); ++v) net.cpt(v).functional = false;
      }
      save_network(net, train_net_out);
      run.outputs.push_back(train_net_out);
      primary_out = train_net_out;
      Report r{{"epoch", "loss", "train_accuracy", "test_accuracy", "zero_mass"}, {}};
      for (const auto& e : res.history) {
        r.rows.push_back({std::to_string(e.epoch), num(e.loss, 17), num(e.train_accuracy, 6),
                          e.test_accuracy < 0 ? "-" : num(e.test_accuracy, 6), std::to_string(e.zero_mass)});
      }
      emit(r.render(format), history_out, out, run);
    } else if (bench->parsed()) {
      run.command = "bench";
      run.seed = seed;
      bench_opts.seed = seed;
      OpsGraph g;
      ParamStore params;
      if (!graph_path.empty()) {
        if (network_path.empty()) throw ValidationError("--graph needs --network for parameters");
        run.inputs = {graph_path, network_path};
        g = load_graph(graph_path);
        params = ParamStore::from_network(load_network(network_path));
      } else {
        bool found = false;
        for (std::uint64_t s = seed; s < seed + 500 && !found; ++s) {
          rspec.seed = s;
          const Network net = random_network(rspec);
          Query q{net.name(static_cast<VarId>(net.size() - 1)), {}};
          for (VarId v = 0; v + 1 < static_cast<VarId>(net.size()); ++v) q.evidence.push_back(net.name(v));
          const JointreeReport jr = jointree_report(net, q);
          if (jr.stats.max_binary_rank > std::log2(size_limit) + 1.0) continue;
          Compilation c = compile_query(net, q);
          const auto sz = static_cast<double>(graph_size(c.graph));
          if (sz < size_limit || sz > 4 * size_limit) continue;
          g = std::move(c.graph);
          params = ParamStore::from_network(net);
          found = true;
        }
        if (!found) throw ValidationError("no random network reached the size limit; adjust --nodes");
      }
      const auto rows = bench_compare(g, params, bench_opts);
      Report r{{"batch", "size", "max_binary_rank", "tensor_time", "tensor_stdev", "scalar_time",
                "scalar_stdev", "scalar_batch_time", "scalar_batch_stdev", "scag_over_teng",
                "scabag_over_teng"},
               {}};
      for (const auto& b : rows) {
        r.rows.push_back({std::to_string(b.batch), std::to_string(b.size), fixed(b.max_binary_rank, 1),
                          num(b.tensor_mean), num(b.tensor_std), num(b.scalar_mean), num(b.scalar_std),
                          num(b.scalar_batch_mean), num(b.scalar_batch_std), fixed(b.scalar_ratio, 2),
                          fixed(b.scalar_batch_ratio, 2)});
      }
      primary_out = bench_out;
      emit(r.render(format), bench_out, out, run);
    }
    run.manifest_path = !manifest.empty()        ? manifest
                        : !primary_out.empty()   ? primary_out + ".manifest.json"
                                                 : "fve_" + run.command + ".manifest.json";
    run.write();
    return 0;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace fve
