#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include <unistd.h>

#include "fve/compiler.hpp"
#include "fve/network.hpp"
#include "fve/studies.hpp"
#include "nets.hpp"
#include "oracle.hpp"

using namespace fve;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
  return fs::temp_directory_path() / ("fve_test_" + std::to_string(::getpid()) + "_" + name);
}

}  // namespace

TEST(NetworkIo, RoundTrip) {
  auto net = ref::copy_ab();
  net.evidence = {net.id("A")};
  net.cpt(net.id("A")).tie_group = "g";
  const auto path = temp_file("rt.json");
  save_network(net, path.string());
  const auto back = load_network(path.string());
  fs::remove(path);
  EXPECT_EQ(back, net);
}

TEST(NetworkIo, RejectsCycle) {
  const char* text = R"({"variables":[{"id":"A","cardinality":2},{"id":"B","cardinality":2}],
    "cpts":[{"child":"A","parents":["B"],"values":[1,0,0,1]},
            {"child":"B","parents":["A"],"values":[1,0,0,1]}]})";
  EXPECT_THROW(network_from_json(text), ValidationError);
}

TEST(NetworkIo, RejectsBadRowSum) {
  const char* text = R"({"variables":[{"id":"A","cardinality":2}],
    "cpts":[{"child":"A","parents":[],"values":[0.5,0.4]}]})";
  EXPECT_THROW(network_from_json(text), ValidationError);
}

TEST(NetworkIo, RejectsShapeAndFlags) {
  EXPECT_THROW(network_from_json(R"({"variables":[{"id":"A","cardinality":2}],
    "cpts":[{"child":"A","parents":[],"values":[1]}]})"), ValidationError);
  EXPECT_THROW(network_from_json(R"({"variables":[{"id":"A","cardinality":2}],
    "cpts":[{"child":"A","parents":[],"values":[0.5,0.5],"functional":true}]})"), ValidationError);
  EXPECT_THROW(network_from_json(R"({"variables":[{"id":"A","cardinality":2}],"cpts":[]})"),
               ValidationError);
  EXPECT_THROW(network_from_json("{"), ValidationError);
  EXPECT_THROW(load_network("/nonexistent/net.json"), ValidationError);
}

TEST(Network, TopologicalOrderAndChildren) {
  const auto net = ref::five_node();
  const auto order = net.topological_order();
  std::vector<int> pos(net.size());
  for (std::size_t i = 0; i < order.size(); ++i) pos[static_cast<std::size_t>(order[i])] = static_cast<int>(i);
  for (std::size_t v = 0; v < net.size(); ++v) {
    for (VarId p : net.cpt(static_cast<VarId>(v)).parents) EXPECT_LT(pos[static_cast<std::size_t>(p)], pos[v]);
  }
  EXPECT_EQ(net.children(net.id("C")), (std::vector<VarId>{net.id("D"), net.id("E")}));
}

TEST(Prune, BarrenLeafRemoved) {
  const auto net = ref::chain_abc();
  const auto p = prune(net, {"B", {"A"}});
  EXPECT_EQ(p.size(), 2u);
  EXPECT_FALSE(p.find("C").has_value());
}

TEST(Prune, NothingToRemove) {
  const auto net = ref::chain_abc();
  const auto p = prune(net, {"B", {"A", "C"}});
  EXPECT_EQ(p.size(), 3u);
  for (std::size_t v = 0; v < 3; ++v) EXPECT_EQ(p.variable(static_cast<VarId>(v)).cardinality, 2);
}

TEST(Prune, ImpossibleValuesDropped) {
  // C only ever copies A's single possible value.
  const auto net = ref::NetBuilder{}
                       .var("A", 3).var("C", 3).var("D")
                       .cpt("A", {}, {0.5, 0.0, 0.5})
                       .cpt("C", {"A"}, {1, 0, 0, 0, 1, 0, 0, 0, 1}, true)
                       .cpt("D", {"C"}, {0.1, 0.9, 0.2, 0.8, 0.3, 0.7})
                       .build();
  const auto p = prune(net, {"D", {"C"}});
  EXPECT_EQ(p.variable(p.id("A")).cardinality, 2);
  EXPECT_EQ(p.variable(p.id("A")).domain, (std::vector<int>{0, 2}));
  EXPECT_EQ(p.cpt(p.id("D")).values, (std::vector<double>{0.1, 0.9, 0.3, 0.7}));
  EXPECT_EQ(p.cpt(p.id("D")).source_axes[0].keep, (std::vector<int>{0, 2}));
  const auto q = prune(net, {"A", {}});
  EXPECT_EQ(q.variable(q.id("A")).cardinality, 3) << "query values are never pruned";
  const auto r = prune(net, {"D", {"C"}}, false);
  EXPECT_EQ(r.variable(r.id("A")).cardinality, 3);
}

TEST(Prune, DigitsUncoveredPositionsLoseOnValue) {
  const int n = 8;
  const auto net = digits_model(n);
  Query q{"digit", {}};
  for (VarId e : net.evidence) q.evidence.push_back(net.name(e));
  const auto p = prune(net, q);
  const auto& boxes = segment_boxes();
  int never = 0;
  for (int s = 0; s < 7; ++s) {
    const auto& b = boxes[static_cast<std::size_t>(s)];
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        bool covered = false;
        for (int r = 0; r < n - 6; ++r) {
          for (int c = 0; c < n - 3; ++c) {
            covered = covered || (i >= r + b.row && i < r + b.row + b.height && j >= c + b.col &&
                                  j < c + b.col + b.width);
          }
        }
        const auto name = "p_" + std::to_string(s) + "_" + std::to_string(i) + "_" + std::to_string(j);
        EXPECT_EQ(p.variable(p.id(name)).cardinality, covered ? 2 : 1) << name;
        never += covered ? 0 : 1;
      }
    }
  }
  EXPECT_GT(never, 0);
}

TEST(Prune, PreservesPosteriors) {
  std::mt19937_64 rng(11);
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto net = random_network({8, 3, 0.5, seed});
    const auto query = net.name(static_cast<VarId>(rng() % net.size()));
    std::vector<std::string> evidence;
    for (std::size_t v = 0; v < net.size(); ++v) {
      if (net.name(static_cast<VarId>(v)) != query && rng() % 2) evidence.push_back(net.name(static_cast<VarId>(v)));
    }
    const auto pruned = prune(net, {query, evidence});
    const auto lam = ref::random_lambda(net, evidence, rng);
    // Restrict lambdas to the kept values.
    ref::Lambda sliced;
    for (const auto& [name, l] : lam) {
      const auto& info = pruned.variable(pruned.id(name));
      for (int x = 0; x < info.cardinality; ++x) sliced[name].push_back(l[static_cast<std::size_t>(info.original_value(x))]);
    }
    double z1 = 0, z2 = 0;
    const auto want = ref::joint_posterior(net, query, lam, &z1);
    const auto got = ref::joint_posterior(pruned, query, sliced, &z2);
    ASSERT_EQ(want.size(), got.size());
    for (std::size_t k = 0; k < want.size(); ++k) EXPECT_NEAR(want[k], got[k], 1e-12);
  }
}

TEST(Replicate, FunctionalWithTwoChildrenSplits) {
  const auto net = ref::five_node();
  const auto rep = replicate_functional(net);
  // C feeds D and E; B feeds only D.
  EXPECT_EQ(rep.network.size(), 6u);
  ASSERT_TRUE(rep.network.find("C#1").has_value());
  ASSERT_TRUE(rep.network.find("C#2").has_value());
  EXPECT_TRUE(rep.network.find("B").has_value());
  const auto c1 = *rep.network.find("C#1"), c2 = *rep.network.find("C#2");
  EXPECT_EQ(rep.network.children(c1).size(), 1u);
  EXPECT_EQ(rep.network.children(c2).size(), 1u);
  EXPECT_TRUE(rep.primary[static_cast<std::size_t>(c1)]);
  EXPECT_FALSE(rep.primary[static_cast<std::size_t>(c2)]);
  EXPECT_EQ(rep.original[static_cast<std::size_t>(c2)], net.id("C"));
  EXPECT_EQ(rep.network.cpt(c2).source, "C");
}

TEST(Replicate, FunctionalChainSplitsUpward) {
  // B = not A, C = B; C feeds D and E, so each C replica needs its own B.
  const auto net = ref::NetBuilder{}
                       .var("A").var("B").var("C").var("D").var("E")
                       .cpt("A", {}, {0.3, 0.7})
                       .cpt("B", {"A"}, {0, 1, 1, 0}, true)
                       .cpt("C", {"B"}, {1, 0, 0, 1}, true)
                       .cpt("D", {"C"}, {0.9, 0.1, 0.4, 0.6})
                       .cpt("E", {"C"}, {0.2, 0.8, 0.5, 0.5})
                       .build();
  const auto rep = replicate_functional(net);
  EXPECT_EQ(rep.network.size(), 7u);
  for (const char* name : {"B#1", "B#2", "C#1", "C#2"}) {
    const auto v = rep.network.find(name);
    ASSERT_TRUE(v.has_value()) << name;
    EXPECT_EQ(rep.network.children(*v).size(), 1u) << name;
  }
  EXPECT_EQ(rep.network.children(rep.network.id("A")).size(), 2u);
  EXPECT_NE(rep.network.cpt(rep.network.id("C#1")).parents, rep.network.cpt(rep.network.id("C#2")).parents);
  std::mt19937_64 rng(8);
  for (int t = 0; t < 5; ++t) {
    auto lam = ref::random_lambda(net, {"B", "D"}, rng);
    const ref::Lambda rl{{"B#1", lam["B"]}, {"D", lam["D"]}};
    const auto want = ref::brute_posterior(net, "E", lam);
    const auto got = ref::brute_posterior(rep.network, "E", rl);
    for (std::size_t k = 0; k < want.size(); ++k) EXPECT_NEAR(want[k], got[k], 1e-12);
  }
}

TEST(Replicate, SingleChildUnchanged) {
  const auto net = ref::copy_ab();
  const auto rep = replicate_functional(net);
  EXPECT_EQ(rep.network.size(), 2u);
  EXPECT_EQ(rep.network.name(0), "A");
  EXPECT_EQ(rep.network.name(1), "B");
}

TEST(Replicate, PreservesMarginals) {
  const auto net = ref::five_node();
  const auto rep = replicate_functional(net);
  std::mt19937_64 rng(3);
  for (const char* q : {"A", "B", "D", "E"}) {
    for (int t = 0; t < 5; ++t) {
      auto lam = ref::random_lambda(net, {"C", "E"}, rng);
      ref::Lambda rl{{"C#1", lam["C"]}, {"E", lam["E"]}};
      if (std::string(q) == "E") rl.erase("E"), lam.erase("E");
      const auto want = ref::brute_posterior(net, q, lam);
      const auto got = ref::brute_posterior(rep.network, q, rl);
      for (std::size_t k = 0; k < want.size(); ++k) EXPECT_NEAR(want[k], got[k], 1e-12) << q;
    }
  }
}

TEST(Replicate, RectangleNodeCounts) {
  const auto net = rectangle_model(8);
  Query q{"label", {}};
  for (VarId e : net.evidence) q.evidence.push_back(net.name(e));
  EXPECT_EQ(jointree_report(net, q, {false, true}).network_nodes, 85u);
  EXPECT_EQ(jointree_report(net, q, {true, true}).network_nodes, 197u);
}
