#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "fve/cli.hpp"

using namespace fve;
namespace fs = std::filesystem;

namespace {

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("fve_cli_" + std::to_string(::getpid()) + "_" +
                                        ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  int run(std::vector<std::string> args) {
    out_.str("");
    err_.str("");
    return run_cli(args, out_, err_);
  }

  static std::string slurp(const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  static std::vector<std::vector<std::string>> tsv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
      std::vector<std::string> cells;
      std::istringstream ls(line);
      std::string cell;
      while (std::getline(ls, cell, '\t')) cells.push_back(cell);
      rows.push_back(cells);
    }
    return rows;
  }

  void generate() {
    ASSERT_EQ(run({"generate", "--model", "rectangle", "--size", "5", "--seed", "3", "--out", path("net.json"),
                   "--train-data", path("train.csv"), "--test-data", path("test.csv"), "--train-count", "60",
                   "--test-count", "40"}),
              0)
        << err_.str();
  }

  fs::path dir_;
  std::ostringstream out_, err_;
};

}  // namespace

TEST_F(Cli, Pipeline) {
  generate();
  EXPECT_TRUE(fs::exists(path("net.json.manifest.json")));
  ASSERT_EQ(run({"compile", "--network", path("net.json"), "--query", "label", "--out", path("g.json")}), 0)
      << err_.str();
  ASSERT_EQ(run({"stats", "--network", path("net.json"), "--query", "label", "--out", path("stats.tsv")}), 0);
  const auto stats = tsv(slurp(path("stats.tsv")));
  ASSERT_EQ(stats.size(), 3u);
  EXPECT_EQ(stats[0][0], "functional");
  EXPECT_EQ(stats[1][0], "off");
  EXPECT_EQ(stats[2][0], "on");
  EXPECT_LT(std::stod(stats[2][3]), std::stod(stats[1][3]));

  ASSERT_EQ(run({"evaluate", "--graph", path("g.json"), "--network", path("net.json"), "--data", path("test.csv"),
                 "--out", path("post.tsv")}),
            0);
  const auto post = tsv(slurp(path("post.tsv")));
  ASSERT_EQ(post.size(), 41u);
  for (std::size_t r = 1; r < post.size(); ++r) {
    EXPECT_EQ(post[r][3], "0");
    EXPECT_NEAR(std::stod(post[r][1]) + std::stod(post[r][2]), 1.0, 1e-9);
  }

  ASSERT_EQ(run({"train", "--graph", path("g.json"), "--network", path("net.json"), "--train", path("train.csv"),
                 "--test", path("test.csv"), "--epochs", "2", "--init-noise", "0.5", "--out", path("trained.json"),
                 "--history", path("hist.tsv")}),
            0)
      << err_.str();
  const auto hist = tsv(slurp(path("hist.tsv")));
  ASSERT_EQ(hist.size(), 3u);
  EXPECT_EQ(hist[2][0], "2");
  ASSERT_EQ(run({"evaluate", "--graph", path("g.json"), "--network", path("trained.json"), "--data",
                 path("test.csv")}),
            0);
}

TEST_F(Cli, HardEvidenceOnQueryIsOneHot) {
  generate();
  ASSERT_EQ(run({"compile", "--network", path("net.json"), "--query", "label", "--evidence", "label", "pixel_0_0",
                 "--out", path("g.json")}),
            0)
      << err_.str();
  {
    std::ofstream os(path("rows.csv"));
    os << "label,pixel_0_0,label\n1,1,1\n0,?,0\n";
  }
  ASSERT_EQ(run({"evaluate", "--graph", path("g.json"), "--network", path("net.json"), "--data", path("rows.csv")}), 0)
      << err_.str();
  const auto post = tsv(out_.str());
  ASSERT_EQ(post.size(), 3u);
  EXPECT_EQ(post[1][1], "0");
  EXPECT_EQ(post[1][2], "1");
  EXPECT_EQ(post[2][1], "1");
  EXPECT_EQ(post[2][2], "0");
}

TEST_F(Cli, BadArguments) {
  EXPECT_NE(run({}), 0);
  EXPECT_NE(run({"frobnicate"}), 0);
  EXPECT_NE(run({"generate", "--model", "spiral", "--out", path("x.json")}), 0);
  EXPECT_NE(run({"compile", "--network", path("missing.json"), "--query", "A", "--out", path("g.json")}), 0);
  generate();
  EXPECT_EQ(run({"compile", "--network", path("net.json"), "--query", "nope", "--out", path("g.json")}), 1);
  EXPECT_NE(err_.str().find("error"), std::string::npos);
  EXPECT_NE(run({"--format", "xml", "stats", "--network", path("net.json"), "--query", "label"}), 0);
  EXPECT_NE(run({"bench", "--graph", path("net.json")}), 0);
}

TEST_F(Cli, BenchSearchesRandomNetworks) {
  ASSERT_EQ(run({"bench", "--nodes", "14", "--size-limit", "2000", "--batch", "1", "3", "--repetitions", "1",
                 "--seed", "2", "--out", path("bench.tsv")}),
            0)
      << err_.str();
  const auto rows = tsv(slurp(path("bench.tsv")));
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0][0], "batch");
  EXPECT_EQ(rows[1][0], "1");
  EXPECT_EQ(rows[2][0], "3");
  EXPECT_GE(std::stoull(rows[1][1]), 2000u);
}

TEST_F(Cli, SeededRunsAreReproducible) {
  generate();
  const auto net = slurp(path("net.json"));
  const auto train = slurp(path("train.csv"));
  generate();
  EXPECT_EQ(slurp(path("net.json")), net);
  EXPECT_EQ(slurp(path("train.csv")), train);
  ASSERT_EQ(run({"compile", "--network", path("net.json"), "--query", "label", "--out", path("g.json")}), 0);
  std::string hist[2];
  for (auto& h : hist) {
    ASSERT_EQ(run({"train", "--graph", path("g.json"), "--network", path("net.json"), "--train", path("train.csv"),
                   "--epochs", "2", "--seed", "7", "--init-noise", "0.3", "--out", path("t.json")}),
              0);
    h = out_.str() + slurp(path("t.json"));
  }
  EXPECT_EQ(hist[0], hist[1]);
}

TEST(Digest, Fnv1a) {
  EXPECT_EQ(fnv1a(""), 14695981039346656037ULL);
  EXPECT_EQ(fnv1a("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(file_digest("/nonexistent/file"), "missing");
}
