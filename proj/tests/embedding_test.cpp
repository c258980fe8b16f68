#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "hubs/embedding.hpp"
#include "hubs/errors.hpp"

namespace hubs {
namespace {

double distance(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

// Two stars joined at their centres: leaves 1, 2 share the row of centre 3,
// leaves 4, 5 share the row of centre 6.
SocialGraph two_cluster_graph() { return SocialGraph({1, 2, 3, 4, 5, 6}, {{1, 3}, {2, 3}, {4, 6}, {5, 6}, {3, 6}}); }

EmbedConfig small_config(std::uint64_t seed = 1) {
  EmbedConfig c;
  c.dim = 4;
  c.hidden_sizes = {8};
  c.epochs = 150;
  c.seed = seed;
  return c;
}

TEST(Embedding, IdenticalRowsEmbedClosest) {
  const SocialGraph g = two_cluster_graph();
  const NodeEmbeddings e = embed_graph(g, small_config());
  ASSERT_EQ(e.table.size(), 6u);
  for (const auto& [a, b] : std::vector<std::pair<UserId, UserId>>{{1, 2}, {4, 5}}) {
    const double twin = distance(lookup(e, a), lookup(e, b));
    for (UserId other : g.nodes()) {
      if (other == a || other == b) continue;
      EXPECT_LT(twin, distance(lookup(e, a), lookup(e, other))) << a << " vs " << other;
    }
  }
}

TEST(Embedding, ClustersSeparateOnLargerGraph) {
  // Two 6-cliques joined by one bridge.
  std::vector<UserPair> edges;
  for (UserId base : {0, 10}) {
    for (UserId u = 0; u < 6; ++u) {
      for (UserId v = u + 1; v < 6; ++v) edges.emplace_back(base + u, base + v);
    }
  }
  edges.emplace_back(0, 10);
  std::vector<UserId> nodes;
  for (const auto& [u, v] : edges) {
    nodes.push_back(u);
    nodes.push_back(v);
  }
  const SocialGraph g(nodes, edges);
  EmbedConfig c = small_config(3);
  c.alpha = 1.0;
  const NodeEmbeddings e = embed_graph(g, c);
  double within = 0.0, between = 0.0;
  int nw = 0, nb = 0;
  for (UserId u : g.nodes()) {
    for (UserId v : g.nodes()) {
      if (u >= v) continue;
      const double d = distance(lookup(e, u), lookup(e, v));
      if ((u < 10) == (v < 10)) {
        within += d;
        ++nw;
      } else {
        between += d;
        ++nb;
      }
    }
  }
  EXPECT_LT(within / nw, between / nb);
}

TEST(Embedding, LossIsEssentiallyNonIncreasing) {
  const SocialGraph g = two_cluster_graph();
  EmbedConfig c = small_config();
  c.epochs = 300;
  const NodeEmbeddings e = embed_graph(g, c);
  ASSERT_EQ(e.loss_history.size(), 300u);
  std::size_t violations = 0;
  for (std::size_t i = 1; i < e.loss_history.size(); ++i) {
    if (e.loss_history[i] > e.loss_history[i - 1] + 1e-6) ++violations;
  }
  EXPECT_LE(violations, e.loss_history.size() / 20) << violations;
  EXPECT_LT(e.loss_history.back(), e.loss_history.front());
}

TEST(Embedding, FixedSeedIsBitIdentical) {
  const SocialGraph g = two_cluster_graph();
  const NodeEmbeddings a = embed_graph(g, small_config(9));
  const NodeEmbeddings b = embed_graph(g, small_config(9));
  EXPECT_EQ(a.table, b.table);
  EXPECT_EQ(a.loss_history, b.loss_history);
  const NodeEmbeddings c = embed_graph(g, small_config(10));
  EXPECT_NE(a.table, c.table);
}

TEST(Embedding, EveryNodeHasOneFiniteVectorOfConfiguredWidth) {
  const SocialGraph g({1, 2, 3, 4, 9}, {{1, 2}, {2, 3}});
  const NodeEmbeddings e = embed_graph(g, small_config());
  EXPECT_EQ(e.dim, 4u);
  ASSERT_EQ(e.table.size(), 5u);
  for (const auto& [u, v] : e.table) {
    EXPECT_TRUE(g.has_node(u));
    ASSERT_EQ(v.size(), 4u);
    for (double x : v) EXPECT_TRUE(std::isfinite(x));
  }
}

TEST(Embedding, NodeOrderPermutesButDoesNotChangeDistances) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 3; ++trial) {
    std::vector<UserId> nodes = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29};
    std::vector<UserPair> edges;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      for (std::size_t j = i + 1; j < nodes.size(); ++j) {
        if (rng() % 3 == 0) edges.emplace_back(nodes[i], nodes[j]);
      }
    }
    const SocialGraph g(nodes, edges);
    EmbedConfig c = small_config(trial);
    c.epochs = 50;
    const NodeEmbeddings base = embed_graph(g, c);
    std::vector<UserId> order = nodes;
    std::shuffle(order.begin(), order.end(), rng);
    const NodeEmbeddings permuted = embed_graph(g, c, order);
    std::vector<double> da, db;
    for (UserId u : nodes) {
      for (UserId v : nodes) {
        if (u >= v) continue;
        // Same node pair on both sides: the vectors follow their nodes.
        da.push_back(distance(lookup(base, u), lookup(base, v)));
        db.push_back(distance(lookup(permuted, u), lookup(permuted, v)));
      }
    }
    for (std::size_t k = 0; k < da.size(); ++k) EXPECT_NEAR(da[k], db[k], 1e-9);
    std::sort(da.begin(), da.end());
    std::sort(db.begin(), db.end());
    for (std::size_t k = 0; k < da.size(); ++k) EXPECT_NEAR(da[k], db[k], 1e-9);
  }
}

TEST(Embedding, BadNodeOrderRejected) {
  const SocialGraph g = two_cluster_graph();
  const std::vector<UserId> short_order = {1, 2, 3};
  EXPECT_THROW(embed_graph(g, small_config(), short_order), ContractError);
  const std::vector<UserId> repeated = {1, 1, 2, 3, 4, 5};
  EXPECT_THROW(embed_graph(g, small_config(), repeated), ContractError);
  const std::vector<UserId> unknown = {1, 2, 3, 4, 5, 99};
  EXPECT_THROW(embed_graph(g, small_config(), unknown), LookupError);
}

TEST(Embedding, EdgelessGraphWarns) {
  const SocialGraph g({1, 2, 3}, {});
  const NodeEmbeddings e = embed_graph(g, small_config());
  ASSERT_EQ(e.warnings.size(), 1u);
  EXPECT_NE(e.warnings[0].find("no edges"), std::string::npos);
  EXPECT_EQ(e.table.size(), 3u);
}

TEST(Embedding, InvalidInputsRejected) {
  EXPECT_THROW(embed_graph(SocialGraph({1}, {}), small_config()), ContractError);
  EmbedConfig c = small_config();
  c.beta = 0.5;
  EXPECT_THROW(validate(c), ContractError);
  c = small_config();
  c.alpha = -1.0;
  EXPECT_THROW(validate(c), ContractError);
  c = small_config();
  c.dim = 0;
  EXPECT_THROW(validate(c), ContractError);
}

TEST(Embedding, InsertAndLookup) {
  NodeEmbeddings e;
  e.dim = 2;
  e.insert(5, {1.5, -2.0});
  EXPECT_EQ(lookup(e, 5), (std::vector<double>{1.5, -2.0}));
  EXPECT_THROW(lookup(e, 6), LookupError);
  EXPECT_THROW(e.insert(6, {1.0}), DimensionError);
  EXPECT_THROW(e.insert(7, {1.0, std::nan("")}), NumericError);
}

class EmbeddingFileTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = std::filesystem::temp_directory_path() /
          ("hubs_emb_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    std::filesystem::create_directories(dir);
  }
  void TearDown() override { std::filesystem::remove_all(dir); }
  std::filesystem::path dir;
};

TEST_F(EmbeddingFileTest, RoundTripAndLayout) {
  NodeEmbeddings e;
  e.dim = 2;
  e.insert(300, {0.25, -1.0});
  e.insert(7, {1.0 / 3.0, 2.0});
  save_embeddings(dir / "e.bin", e);
  EXPECT_EQ(std::filesystem::file_size(dir / "e.bin"), 8u + 4u + 4u + 2u * (8u + 16u));
  std::ifstream in(dir / "e.bin", std::ios::binary);
  const std::string bytes(std::istreambuf_iterator<char>(in), {});
  EXPECT_EQ(bytes.substr(0, 8), "HUBSEMB1");
  EXPECT_EQ(static_cast<unsigned char>(bytes[8]), 2);   // count, little-endian
  EXPECT_EQ(static_cast<unsigned char>(bytes[12]), 2);  // dim
  EXPECT_EQ(static_cast<unsigned char>(bytes[16]), 7);  // ascending ids
  const NodeEmbeddings back = load_embeddings(dir / "e.bin");
  EXPECT_EQ(back.dim, 2u);
  EXPECT_EQ(lookup(back, 7), lookup(e, 7));
  EXPECT_EQ(lookup(back, 300), lookup(e, 300));
}

TEST_F(EmbeddingFileTest, TrainedTableSurvivesRoundTrip) {
  const NodeEmbeddings e = embed_graph(two_cluster_graph(), small_config());
  save_embeddings(dir / "e.bin", e);
  EXPECT_EQ(load_embeddings(dir / "e.bin").table, e.table);
}

TEST_F(EmbeddingFileTest, CorruptFilesRejected) {
  NodeEmbeddings e;
  e.dim = 1;
  e.insert(1, {1.0});
  save_embeddings(dir / "e.bin", e);
  std::ifstream in(dir / "e.bin", std::ios::binary);
  const std::string bytes(std::istreambuf_iterator<char>(in), {});
  std::ofstream(dir / "magic.bin", std::ios::binary) << "HUBSCKPT" << bytes.substr(8);
  EXPECT_THROW(load_embeddings(dir / "magic.bin"), IncompatibleError);
  std::ofstream(dir / "short.bin", std::ios::binary) << bytes.substr(0, bytes.size() - 3);
  EXPECT_THROW(load_embeddings(dir / "short.bin"), IoError);
  std::ofstream(dir / "long.bin", std::ios::binary) << bytes << "zz";
  EXPECT_THROW(load_embeddings(dir / "long.bin"), IoError);
  EXPECT_THROW(load_embeddings(dir / "absent.bin"), IoError);
}

}  // namespace
}  // namespace hubs
