#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <random>

#include "hubs/errors.hpp"
#include "hubs/social_graph.hpp"
#include "hubs/synthetic.hpp"

using namespace hubs;

namespace {

BehaviorEvent ev(UserId u, std::uint32_t obj, std::string_view ts, BehaviorType type = BehaviorType::Library) {
  return {u, obj, parse_timestamp(ts), type, type == BehaviorType::Canteen ? -1.0 : 0.0};
}

std::vector<BehaviorEvent> random_events(std::mt19937_64& rng, std::size_t count) {
  std::uniform_int_distribution<UserId> user(1, 12);
  std::uniform_int_distribution<std::uint32_t> obj(0, 3);
  std::uniform_int_distribution<Timestamp> ts(0, 7200);
  std::bernoulli_distribution lib(0.5);
  std::vector<BehaviorEvent> out;
  for (std::size_t i = 0; i < count; ++i) {
    const auto type = lib(rng) ? BehaviorType::Library : BehaviorType::Canteen;
    out.push_back({user(rng), obj(rng), 1'500'000'000 + ts(rng), type, type == BehaviorType::Canteen ? -2.0 : 0.0});
  }
  return out;
}

}  // namespace

TEST(CountCooccurrences, SameGateWithinWindow) {
  const std::vector<BehaviorEvent> e = {ev(1, 7, "2016-10-16T19:17:02Z"), ev(2, 7, "2016-10-16T19:17:10Z")};
  const auto c = count_cooccurrences(e, VenueClass::Library);
  EXPECT_EQ(c.at(1, 2), 1u);
  EXPECT_EQ(c.at(2, 1), 1u);
  EXPECT_EQ(c.counts.size(), 1u);
}

TEST(CountCooccurrences, DifferentGatesDoNotCount) {
  const std::vector<BehaviorEvent> e = {ev(1, 7, "2016-10-16T19:17:02Z"), ev(2, 8, "2016-10-16T19:17:10Z")};
  EXPECT_EQ(count_cooccurrences(e, VenueClass::Library).at(1, 2), 0u);
}

TEST(CountCooccurrences, ThreeByThreeInOneWindow) {
  std::vector<BehaviorEvent> e;
  for (int k = 0; k < 3; ++k) {
    e.push_back(ev(1, 4, "2016-10-16T12:00:0" + std::to_string(k) + "Z", BehaviorType::Canteen));
    e.push_back(ev(2, 4, "2016-10-16T12:01:0" + std::to_string(k) + "Z", BehaviorType::Canteen));
  }
  EXPECT_EQ(count_cooccurrences(e, VenueClass::Canteen).at(1, 2), 9u);
  EXPECT_EQ(count_cooccurrences_brute_force(e, VenueClass::Canteen).at(1, 2), 9u);
  EXPECT_EQ(count_cooccurrences(e, VenueClass::Library).counts.size(), 0u);
}

TEST(CountCooccurrences, ClosedWindowAndSelfPairs) {
  const std::vector<BehaviorEvent> e = {ev(1, 1, "2016-10-16T10:00:00Z"), ev(2, 1, "2016-10-16T10:10:00Z"),
                                        ev(3, 1, "2016-10-16T10:20:01Z"), ev(3, 1, "2016-10-16T10:20:02Z")};
  const auto c = count_cooccurrences(e, VenueClass::Library, 600);
  EXPECT_EQ(c.at(1, 2), 1u);
  EXPECT_EQ(c.at(2, 3), 0u);
  EXPECT_EQ(c.counts.size(), 1u);
  EXPECT_THROW(count_cooccurrences(e, VenueClass::Library, -1), ContractError);
}

TEST(CountCooccurrences, SweepMatchesBruteForce) {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 10; ++trial) {
    const auto events = random_events(rng, 50 + 45 * static_cast<std::size_t>(trial));
    for (auto venue : {VenueClass::Library, VenueClass::Canteen}) {
      EXPECT_EQ(count_cooccurrences(events, venue).counts, count_cooccurrences_brute_force(events, venue).counts);
    }
  }
}

TEST(CountCooccurrences, InvariantUnderReordering) {
  std::mt19937_64 rng(5);
  auto events = random_events(rng, 300);
  const auto base = count_cooccurrences(events, VenueClass::Library);
  std::shuffle(events.begin(), events.end(), rng);
  EXPECT_EQ(count_cooccurrences(events, VenueClass::Library).counts, base.counts);
}

TEST(ShuffleNullModel, PreservesMultisetOfShuffledField) {
  const std::vector<BehaviorEvent> e = {ev(1, 1, "2016-10-16T10:00:00Z"), ev(2, 2, "2016-10-16T11:00:00Z"),
                                        ev(3, 3, "2016-10-16T12:00:00Z")};
  for (auto mode : {ShuffleMode::Object, ShuffleMode::Timestamp}) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto s = shuffle_null_model(e, mode, seed);
      ASSERT_EQ(s.size(), 3u);
      std::vector<Timestamp> ts;
      std::vector<std::uint32_t> objs;
      for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_EQ(s[i].user_id, e[i].user_id);
        EXPECT_EQ(s[i].behavior_type, e[i].behavior_type);
        EXPECT_EQ(s[i].amount, e[i].amount);
        if (mode == ShuffleMode::Object) EXPECT_EQ(s[i].timestamp, e[i].timestamp);
        if (mode == ShuffleMode::Timestamp) EXPECT_EQ(s[i].object_id, e[i].object_id);
        ts.push_back(s[i].timestamp);
        objs.push_back(s[i].object_id);
      }
      std::sort(ts.begin(), ts.end());
      std::sort(objs.begin(), objs.end());
      EXPECT_EQ(ts, (std::vector<Timestamp>{e[0].timestamp, e[1].timestamp, e[2].timestamp}));
      EXPECT_EQ(objs, (std::vector<std::uint32_t>{1, 2, 3}));
    }
  }
  EXPECT_EQ(shuffle_null_model(e, ShuffleMode::Object, 3), shuffle_null_model(e, ShuffleMode::Object, 3));
}

TEST(ShuffleNullModel, TwoEventsIdentityOrSwap) {
  const std::vector<BehaviorEvent> e = {ev(1, 1, "2016-10-16T10:00:00Z"), ev(2, 2, "2016-10-16T11:00:00Z")};
  bool saw_identity = false;
  bool saw_swap = false;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const auto s = shuffle_null_model(e, ShuffleMode::Timestamp, seed);
    if (s == e) saw_identity = true;
    if (s[0].timestamp == e[1].timestamp && s[1].timestamp == e[0].timestamp) saw_swap = true;
    EXPECT_TRUE(s == e || (s[0].timestamp == e[1].timestamp && s[1].timestamp == e[0].timestamp));
  }
  EXPECT_TRUE(saw_identity);
  EXPECT_TRUE(saw_swap);
  EXPECT_THROW(shuffle_null_model(std::span(e.data(), 1), ShuffleMode::Object, 1), ContractError);
}

TEST(ShuffleNullModel, NullMaxCountFarBelowPlanted) {
  GenConfig c;
  c.users = 120;
  c.active_days = 21;
  c.semester_days = 42;
  c.semesters = 1;
  const auto pop = generate_synthetic_population(c, 8);
  const auto real = count_cooccurrences(pop.events, VenueClass::Canteen).max_count();
  double null_mean = 0.0;
  for (std::uint64_t s = 0; s < 50; ++s) {
    null_mean += static_cast<double>(
        count_cooccurrences(shuffle_null_model(pop.events, ShuffleMode::Object, s), VenueClass::Canteen).max_count());
  }
  null_mean /= 50.0;
  EXPECT_LT(null_mean * 2.0, static_cast<double>(real));
}

TEST(InferFriendship, DefaultSemesterThresholds) {
  const auto t = friendship_thresholds(63, 126);
  EXPECT_EQ(t.library, 15.0);
  EXPECT_EQ(t.canteen, 10.0);
  const auto t2 = friendship_thresholds(126, 126);
  EXPECT_EQ(t2.library, 2.0 * t.library);
  EXPECT_EQ(t2.canteen, 2.0 * t.canteen);
  EXPECT_THROW(friendship_thresholds(127, 126), ContractError);
  EXPECT_THROW(friendship_thresholds(0, 126), ContractError);
}

TEST(InferFriendship, BoundaryIsInclusive) {
  CoOccurrenceCounts lib{VenueClass::Library, {{{1, 2}, 15}, {{3, 4}, 14}}};
  CoOccurrenceCounts can{VenueClass::Canteen, {{{3, 4}, 9}, {{5, 6}, 10}}};
  const auto g = infer_friendship(lib, can, 63, 126);
  EXPECT_TRUE(g.adjacent(1, 2));
  EXPECT_TRUE(g.adjacent(2, 1));
  EXPECT_FALSE(g.adjacent(3, 4));
  EXPECT_TRUE(g.adjacent(5, 6));
  EXPECT_EQ(g.node_count(), 6u);
  EXPECT_EQ(g.edge_count(), 2u);
  EXPECT_THROW(infer_friendship(can, lib, 63, 126), ContractError);
}

TEST(InferFriendship, FractionalThreshold) {
  CoOccurrenceCounts lib{VenueClass::Library, {{{1, 2}, 5}, {{1, 3}, 6}}};
  CoOccurrenceCounts can{VenueClass::Canteen, {}};
  const auto g = infer_friendship(lib, can, 25, 126);  // tau_Lib = 5.95...
  EXPECT_FALSE(g.adjacent(1, 2));
  EXPECT_TRUE(g.adjacent(1, 3));
}

TEST(InferFriendship, SymmetricWithZeroDiagonal) {
  std::mt19937_64 rng(2);
  const auto events = random_events(rng, 500);
  const auto g = infer_friendship(count_cooccurrences(events, VenueClass::Library, 3600),
                                  count_cooccurrences(events, VenueClass::Canteen, 3600), 3, 126);
  for (auto u : g.nodes()) {
    EXPECT_FALSE(g.adjacent(u, u));
    for (auto v : g.nodes()) EXPECT_EQ(g.adjacent(u, v), g.adjacent(v, u));
  }
}

TEST(GraphReport, Counts) {
  const auto empty = graph_report(SocialGraph({1, 2, 3}, {}));
  EXPECT_EQ(empty.edges, 0u);
  EXPECT_EQ(empty.isolated, 3u);
  const auto k4 = graph_report(SocialGraph({1, 2, 3, 4}, {{1, 2}, {1, 3}, {1, 4}, {2, 3}, {2, 4}, {3, 4}}));
  EXPECT_EQ(k4.nodes, 4u);
  EXPECT_EQ(k4.edges, 6u);
  EXPECT_EQ(k4.isolated, 0u);
  EXPECT_EQ(k4.degree_histogram.at(3), 4u);
}

TEST(GraphReport, PlantedPairsRecovered) {
  GenConfig c;
  c.users = 150;
  c.active_days = 63;
  c.semester_days = 126;
  c.semesters = 1;
  const auto pop = generate_synthetic_population(c, 13);
  const auto g = infer_friendship(count_cooccurrences(pop.events, VenueClass::Library),
                                  count_cooccurrences(pop.events, VenueClass::Canteen), 63, 126);
  const auto r = compare_edges(g, pop.planted_pairs);
  EXPECT_EQ(r.planted, pop.planted_pairs.size());
  EXPECT_GE(r.recall(), 0.95);
  EXPECT_GE(r.precision(), 0.9);
}

TEST(GraphFiles, RoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / ("hubs_graph_" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  const SocialGraph g({5, 1, 9, 3}, {{1, 5}, {3, 9}});
  GraphSidecar side;
  side.thresholds = friendship_thresholds(63, 126);
  side.n_days = 63;
  side.semester_days = 126;
  side.seed = 17;
  write_graph(dir / "edges.csv", dir / "graph.json", g, side);
  GraphSidecar back;
  const auto g2 = read_graph(dir / "edges.csv", dir / "graph.json", &back);
  EXPECT_EQ(g2.nodes(), (std::vector<UserId>{1, 3, 5, 9}));
  EXPECT_EQ(g2.edges(), g.edges());
  EXPECT_EQ(back.thresholds.library, 15.0);
  EXPECT_EQ(back.seed, 17u);
  EXPECT_THROW(read_graph(dir / "missing.csv", dir / "graph.json"), IoError);
  std::filesystem::remove_all(dir);
}

TEST(SocialGraph, RejectsUnknownNodesAndSelfEdges) {
  EXPECT_THROW(SocialGraph({1, 2}, {{1, 3}}), LookupError);
  EXPECT_THROW(SocialGraph({1, 2}, {{2, 2}}), ContractError);
  const SocialGraph g({1, 2}, {{1, 2}});
  EXPECT_THROW(g.index_of(4), LookupError);
}
