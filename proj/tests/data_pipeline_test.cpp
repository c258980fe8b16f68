#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "hubs/dataset.hpp"
#include "hubs/errors.hpp"
#include "hubs/features.hpp"
#include "hubs/social_graph.hpp"
#include "hubs/synthetic.hpp"

using namespace hubs;

namespace {

std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("hubs_test_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

BehaviorEvent at(UserId u, std::string_view ts, BehaviorType type, double amount = 0.0, std::uint32_t obj = 1) {
  return {u, obj, parse_timestamp(ts), type, amount};
}

GenConfig small_config() {
  GenConfig c;
  c.users = 60;
  c.active_days = 14;
  c.semester_days = 28;
  return c;
}

}  // namespace

TEST(Calendar, RoundTripsDatesAndTimestamps) {
  const DayIndex d = parse_date("2016-09-05");
  EXPECT_EQ(format_date(d), "2016-09-05");
  EXPECT_EQ(weekday_index(d), 0);  // a Monday
  EXPECT_EQ(weekday_index(d + 6), 6);
  const Timestamp ts = parse_timestamp("2016-10-16T19:17:02Z");
  EXPECT_EQ(format_timestamp(ts), "2016-10-16T19:17:02Z");
  EXPECT_EQ(parse_timestamp("2016-10-16 19:17:02"), ts);
  EXPECT_EQ(second_of_day(ts), 19 * 3600 + 17 * 60 + 2);
  EXPECT_THROW(parse_date("2016-13-01"), Error);
}

TEST(SignRule, MatchesBehaviorType) {
  EXPECT_TRUE(satisfies_sign_rule(at(1, "2016-09-05T08:00:00Z", BehaviorType::Library)));
  EXPECT_FALSE(satisfies_sign_rule(at(1, "2016-09-05T08:00:00Z", BehaviorType::Dorm, -1.0)));
  EXPECT_TRUE(satisfies_sign_rule(at(1, "2016-09-05T08:00:00Z", BehaviorType::Canteen, -1.0)));
  EXPECT_FALSE(satisfies_sign_rule(at(1, "2016-09-05T08:00:00Z", BehaviorType::Store, 1.0)));
  EXPECT_TRUE(satisfies_sign_rule(at(1, "2016-09-05T08:00:00Z", BehaviorType::Recharge, 5.0)));
  EXPECT_FALSE(satisfies_sign_rule(at(1, "2016-09-05T08:00:00Z", BehaviorType::Recharge, -5.0)));
}

TEST(BehaviorTypes, ParseAndDimensions) {
  const std::vector<std::size_t> dims = {16, 8, 3, 2, 2, 2};
  for (std::size_t i = 0; i < kAllBehaviorTypes.size(); ++i) {
    EXPECT_EQ(feature_dim(kAllBehaviorTypes[i]), dims[i]);
    EXPECT_EQ(parse_behavior_type(to_string(kAllBehaviorTypes[i])), kAllBehaviorTypes[i]);
  }
  EXPECT_THROW(parse_behavior_type("Gym"), ContractError);
  EXPECT_THROW(feature_dim(static_cast<BehaviorType>(17)), ContractError);
}

TEST(ExtractDailyFeatures, LibraryHourlySlots) {
  const DayIndex day = parse_date("2016-10-16");
  const std::vector<BehaviorEvent> ev = {at(1, "2016-10-16T08:15:00Z", BehaviorType::Library),
                                         at(1, "2016-10-16T08:40:00Z", BehaviorType::Library),
                                         at(1, "2016-10-16T22:10:00Z", BehaviorType::Library)};
  const auto b = extract_daily_features(ev, day, BehaviorType::Library);
  ASSERT_EQ(b.size(), 16u);
  for (std::size_t i = 0; i < 16; ++i) EXPECT_EQ(b[i], i == 1 ? 2.0 : (i == 15 ? 1.0 : 0.0)) << i;
}

TEST(ExtractDailyFeatures, EmptyDayIsZero) {
  for (auto type : kAllBehaviorTypes) {
    const auto b = extract_daily_features({}, 100, type);
    EXPECT_EQ(b.size(), feature_dim(type));
    for (double v : b) EXPECT_EQ(v, 0.0);
  }
}

TEST(ExtractDailyFeatures, CanteenMealCosts) {
  const DayIndex day = parse_date("2016-10-16");
  const std::vector<BehaviorEvent> ev = {at(1, "2016-10-16T07:30:00Z", BehaviorType::Canteen, -0.8),
                                         at(1, "2016-10-16T11:40:00Z", BehaviorType::Canteen, -1.5),
                                         at(1, "2016-10-16T17:30:00Z", BehaviorType::Canteen, -2.2)};
  const auto b = extract_daily_features(ev, day, BehaviorType::Canteen);
  ASSERT_EQ(b.size(), 3u);
  EXPECT_DOUBLE_EQ(b[0], 0.8);
  EXPECT_DOUBLE_EQ(b[1], 1.5);
  EXPECT_DOUBLE_EQ(b[2], 2.2);
}

TEST(ExtractDailyFeatures, DormAndTransactions) {
  const DayIndex day = parse_date("2016-10-16");
  const std::vector<BehaviorEvent> ev = {at(1, "2016-10-16T12:05:00Z", BehaviorType::Dorm),
                                         at(1, "2016-10-16T17:00:00Z", BehaviorType::Dorm),
                                         at(1, "2016-10-16T23:59:59Z", BehaviorType::Dorm),
                                         at(1, "2016-10-16T09:00:00Z", BehaviorType::Dorm),
                                         at(1, "2016-10-16T09:00:00Z", BehaviorType::Store, -3.0),
                                         at(1, "2016-10-16T10:00:00Z", BehaviorType::Store, -4.5),
                                         at(1, "2016-10-17T10:00:00Z", BehaviorType::Store, -9.0)};
  const auto dorm = extract_daily_features(ev, day, BehaviorType::Dorm);
  EXPECT_EQ(dorm, (std::vector<double>{1, 1, 0, 0, 0, 0, 0, 1}));
  const auto store = extract_daily_features(ev, day, BehaviorType::Store);
  EXPECT_EQ(store, (std::vector<double>{2.0, 7.5}));
  const auto seq = extract_feature_sequence(ev, day, 2, BehaviorType::Store);
  EXPECT_EQ(seq, (std::vector<double>{2.0, 7.5, 1.0, 9.0}));
}

TEST(Normalize, Examples) {
  EXPECT_DOUBLE_EQ(normalize(5.0, ScaleMode::Unit, {0, 10}), 0.5);
  EXPECT_DOUBLE_EQ(normalize(5.0, ScaleMode::Symmetric, {0, 10}), 0.0);
  EXPECT_EQ(normalize(123.0, ScaleMode::Unit, {4, 4}), 0.0);
  EXPECT_EQ(normalize(-7.0, ScaleMode::Symmetric, {4, 4}), 0.0);
  EXPECT_EQ(normalize(20.0, ScaleMode::Unit, {0, 10}), 1.0);
  EXPECT_EQ(normalize(-20.0, ScaleMode::Symmetric, {0, 10}), -1.0);
}

TEST(Normalize, RoundTripWithinBounds) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-50.0, 80.0);
  const Bounds b{-50.0, 80.0};
  for (int i = 0; i < 1000; ++i) {
    const double x = u(rng);
    EXPECT_NEAR(rescale(normalize(x, ScaleMode::Unit, b), ScaleMode::Unit, b), x, 1e-12);
    EXPECT_NEAR(rescale(normalize(x, ScaleMode::Symmetric, b), ScaleMode::Symmetric, b), x, 1e-12);
  }
}

TEST(ContextVector, Encoding) {
  WeatherTable w;
  const DayIndex monday = parse_date("2016-09-05");
  w[monday] = 1u << static_cast<unsigned>(Weather::Clear);
  w[monday + 1] = (1u << static_cast<unsigned>(Weather::Rain)) | (1u << static_cast<unsigned>(Weather::Wind));
  const auto c = build_context_vector(monday, w);
  ASSERT_EQ(c.size(), 13u);
  EXPECT_EQ(c[0], 1.0);
  EXPECT_EQ(c[7], 1.0);
  EXPECT_EQ(std::accumulate(c.begin(), c.end(), 0.0), 2.0);
  EXPECT_EQ(build_context_vector(monday, w), c);
  const auto r = build_context_vector(monday + 1, w);
  EXPECT_EQ(r[1], 1.0);
  EXPECT_EQ(std::accumulate(r.begin() + 7, r.end(), 0.0), 2.0);
  EXPECT_EQ(r[7 + 2], 1.0);
  EXPECT_EQ(r[7 + 5], 1.0);
  EXPECT_THROW(build_context_vector(monday + 2, w), LookupError);
}

TEST(CsvFiles, RoundTrip) {
  const auto dir = scratch_dir("csv");
  const auto pop = generate_synthetic_population(small_config(), 3);
  write_events_csv(dir / "events.csv", pop.events);
  EXPECT_EQ(read_events_csv(dir / "events.csv"), pop.events);
  write_demographics_csv(dir / "demo.csv", pop.demographics);
  const auto demo = read_demographics_csv(dir / "demo.csv");
  ASSERT_EQ(demo.size(), pop.demographics.size());
  for (std::size_t i = 0; i < demo.size(); ++i) {
    EXPECT_EQ(demo[i].user_id, pop.demographics[i].user_id);
    EXPECT_EQ(demo[i].categories, pop.demographics[i].categories);
  }
  write_targets_csv(dir / "targets.csv", pop.targets);
  const auto targets = read_targets_csv(dir / "targets.csv");
  ASSERT_EQ(targets.size(), pop.targets.size());
  for (std::size_t i = 0; i < targets.size(); ++i) EXPECT_EQ(targets[i].value, pop.targets[i].value);
  write_weather_csv(dir / "weather.csv", pop.weather);
  EXPECT_EQ(read_weather_csv(dir / "weather.csv"), pop.weather);

  std::ifstream in(dir / "events.csv");
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "user_id,object_id,timestamp,behavior_type,amount");
  std::filesystem::remove_all(dir);
}

TEST(CsvFiles, RejectsBadInput) {
  const auto dir = scratch_dir("badcsv");
  EXPECT_THROW(read_events_csv(dir / "missing.csv"), IoError);
  std::ofstream(dir / "bad.csv") << "user,object\n1,2\n";
  EXPECT_THROW(read_events_csv(dir / "bad.csv"), IoError);
  std::ofstream(dir / "bad2.csv") << "user_id,object_id,timestamp,behavior_type,amount\n1,2,2016-09-05T08:00:00Z,Gym,0\n";
  EXPECT_THROW(read_events_csv(dir / "bad2.csv"), Error);
  std::filesystem::remove_all(dir);
}

TEST(Generator, TwoUsersOneDayOnePair) {
  GenConfig c;
  c.users = 2;
  c.active_days = 1;
  c.semester_days = 1;
  c.friend_prob = 1.0;
  const auto pop = generate_synthetic_population(c, 11);
  ASSERT_EQ(pop.planted_pairs.size(), 1u);
  EXPECT_EQ(pop.planted_pairs[0], (std::pair<UserId, UserId>{1, 2}));
}

TEST(Generator, RejectsEmptyConfig) {
  GenConfig c;
  c.users = 0;
  EXPECT_THROW(generate_synthetic_population(c, 1), ContractError);
  c.users = 5;
  c.active_days = 0;
  EXPECT_THROW(generate_synthetic_population(c, 1), ContractError);
}

TEST(Generator, SameSeedByteIdenticalFiles) {
  const auto dir = scratch_dir("det");
  write_events_csv(dir / "a.csv", generate_synthetic_population(small_config(), 42).events);
  write_events_csv(dir / "b.csv", generate_synthetic_population(small_config(), 42).events);
  write_events_csv(dir / "c.csv", generate_synthetic_population(small_config(), 43).events);
  EXPECT_EQ(slurp(dir / "a.csv"), slurp(dir / "b.csv"));
  EXPECT_NE(slurp(dir / "a.csv"), slurp(dir / "c.csv"));
  std::filesystem::remove_all(dir);
}

TEST(Generator, EventsRespectDayRangeAndSignRule) {
  for (auto task : {TaskKind::Regression, TaskKind::Classification}) {
    GenConfig c = small_config();
    c.task = task;
    const auto pop = generate_synthetic_population(c, 5);
    std::set<DayIndex> allowed;
    for (int s = 0; s < c.semesters; ++s) {
      for (int n = 0; n < c.active_days; ++n) allowed.insert(semester_day(c, s, n));
    }
    for (const auto& e : pop.events) {
      EXPECT_TRUE(allowed.count(day_of(e.timestamp))) << format_timestamp(e.timestamp);
      EXPECT_TRUE(satisfies_sign_rule(e));
      EXPECT_GE(e.user_id, 1u);
      EXPECT_LE(e.user_id, c.users);
      if (e.behavior_type == BehaviorType::Library) {
        const auto b = extract_daily_features(std::span(&e, 1), day_of(e.timestamp), e.behavior_type);
        EXPECT_EQ(std::accumulate(b.begin(), b.end(), 0.0), 1.0);
      }
    }
    EXPECT_TRUE(std::is_sorted(pop.events.begin(), pop.events.end(),
                               [](const auto& a, const auto& b) { return a.timestamp < b.timestamp; }));
  }
}

TEST(Generator, ClassificationLevelsAreImbalanced) {
  GenConfig c;
  c.users = 1000;
  c.active_days = 1;
  c.semester_days = 1;
  c.task = TaskKind::Classification;
  const auto pop = generate_synthetic_population(c, 9);
  std::array<double, 3> share{};
  for (const auto& t : pop.targets) share[static_cast<std::size_t>(t.value) - 1] += 1.0;
  for (auto& s : share) s /= static_cast<double>(pop.targets.size());
  EXPECT_NEAR(share[0], 0.13, 0.02);
  EXPECT_NEAR(share[1], 0.15, 0.02);
  EXPECT_NEAR(share[2], 0.72, 0.02);
}

TEST(Generator, FriendPairsDominateCanteenCoOccurrence) {
  GenConfig c;
  c.users = 16;
  c.active_days = 7;
  c.semester_days = 7;
  c.semesters = 1;
  c.canteen_pos = 4;
  std::vector<std::uint64_t> friends;
  std::vector<std::uint64_t> others;
  for (std::uint64_t seed = 0; seed < 120; ++seed) {
    const auto pop = generate_synthetic_population(c, seed);
    const auto counts = count_cooccurrences(pop.events, VenueClass::Canteen);
    const std::set<std::pair<UserId, UserId>> planted(pop.planted_pairs.begin(), pop.planted_pairs.end());
    for (UserId u = 1; u <= c.users; ++u) {
      for (UserId v = u + 1; v <= c.users; ++v) (planted.count({u, v}) ? friends : others).push_back(counts.at(u, v));
    }
  }
  ASSERT_FALSE(friends.empty());
  ASSERT_FALSE(others.empty());
  const auto survival = [](const std::vector<std::uint64_t>& xs, std::uint64_t k) {
    return static_cast<double>(std::count_if(xs.begin(), xs.end(), [k](auto x) { return x >= k; })) /
           static_cast<double>(xs.size());
  };
  double gap = 0.0;
  for (std::uint64_t k = 1; k <= 10; ++k) {
    EXPECT_GE(survival(friends, k), survival(others, k)) << "k=" << k;
    gap = std::max(gap, survival(friends, k) - survival(others, k));
  }
  EXPECT_GT(gap, 0.3);
}

namespace {

struct Assembled {
  SyntheticPopulation pop;
  SplitSpec spec;
};

Assembled synthetic_inputs(std::size_t users, int active_days, int semester_days) {
  GenConfig c;
  c.users = users;
  c.active_days = active_days;
  c.semester_days = semester_days;
  Assembled a{generate_synthetic_population(c, 21), {}};
  a.spec.n_days = active_days;
  a.spec.semester_days = semester_days;
  a.spec.train_start = semester_day(c, 0, 0);
  a.spec.test_start = semester_day(c, 1, 0);
  a.spec.seed = 4;
  return a;
}

}  // namespace

TEST(AssembleDataset, NinetyTenSplitOfHundredUsers) {
  auto in = synthetic_inputs(100, 10, 20);
  const auto ds = assemble_dataset(in.pop.events, in.pop.demographics, in.pop.targets, in.pop.weather, in.spec);
  EXPECT_EQ(ds.train.size(), 90u);
  EXPECT_EQ(ds.val.size(), 10u);
  EXPECT_EQ(ds.test.size(), 100u);
  std::set<UserId> seen;
  for (const auto& s : ds.train) EXPECT_TRUE(seen.insert(s.user_id).second);
  for (const auto& s : ds.val) EXPECT_TRUE(seen.insert(s.user_id).second);
  for (const auto& s : ds.test) EXPECT_EQ(s.period, 1);
  EXPECT_EQ(ds.manifest.train_count, 90u);
  EXPECT_EQ(ds.manifest.num_types(), 2u);
  EXPECT_TRUE(ds.manifest.skipped.empty());
}

TEST(AssembleDataset, ShapesAndRanges) {
  auto in = synthetic_inputs(80, 12, 24);
  for (auto task : {TaskKind::Regression, TaskKind::Classification}) {
    GenConfig c;
    c.users = 80;
    c.active_days = 12;
    c.semester_days = 24;
    c.task = task;
    const auto pop = generate_synthetic_population(c, 2);
    in.spec.task = task;
    in.spec.types.clear();
    const auto ds = assemble_dataset(pop.events, pop.demographics, pop.targets, pop.weather, in.spec);
    const auto& types = ds.manifest.types;
    for (const auto* split : {&ds.train, &ds.val, &ds.test}) {
      for (const auto& s : *split) {
        ASSERT_EQ(s.features.size(), types.size());
        for (std::size_t m = 0; m < types.size(); ++m) {
          EXPECT_EQ(s.features[m].size(), feature_dim(types[m]) * 12);
          for (double v : s.features[m]) {
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, 1.0);
          }
        }
        EXPECT_EQ(s.contexts.size(), 12 * kContextDim);
        EXPECT_GE(s.target_history.size(), 1u);
        if (task == TaskKind::Regression) {
          EXPECT_GE(s.label, -1.0);
          EXPECT_LE(s.label, 1.0);
          EXPECT_NEAR(ds.manifest.rescale_label(ds.manifest.scale_label(s.raw_label)),
                      std::clamp(s.raw_label, ds.manifest.label_bounds.min, ds.manifest.label_bounds.max), 1e-9);
        } else {
          EXPECT_GE(s.label, 1.0);
          EXPECT_LE(s.label, 3.0);
          for (double h : s.target_history) EXPECT_TRUE(h == 0.0 || h == 0.5 || h == 1.0);
        }
      }
    }
    for (const auto& bounds : ds.manifest.feature_bounds) {
      for (auto b : bounds) EXPECT_LE(b.min, b.max);
    }
  }
}

TEST(AssembleDataset, UsesFirstNDaysOfSemester) {
  auto in = synthetic_inputs(40, 126, 126);
  in.spec.n_days = 63;
  in.spec.semester_days = 126;
  const auto base = assemble_dataset(in.pop.events, in.pop.demographics, in.pop.targets, in.pop.weather, in.spec);
  EXPECT_EQ(base.train.front().features[0].size(), 16u * 63u);
  // Events after day 63 of a semester never reach the samples.
  std::vector<BehaviorEvent> trimmed;
  for (const auto& e : in.pop.events) {
    const DayIndex d = day_of(e.timestamp);
    const bool first_half = (d >= in.spec.train_start && d < in.spec.train_start + 63) ||
                            (d >= in.spec.test_start && d < in.spec.test_start + 63);
    if (first_half) trimmed.push_back(e);
  }
  ASSERT_LT(trimmed.size(), in.pop.events.size());
  const auto cut = assemble_dataset(trimmed, in.pop.demographics, in.pop.targets, in.pop.weather, in.spec);
  ASSERT_EQ(cut.train.size(), base.train.size());
  for (std::size_t i = 0; i < cut.train.size(); ++i) EXPECT_EQ(cut.train[i].features, base.train[i].features);
  in.spec.n_days = 127;
  EXPECT_THROW(assemble_dataset(in.pop.events, in.pop.demographics, in.pop.targets, in.pop.weather, in.spec),
               ContractError);
}

TEST(AssembleDataset, SkipsUsersWithoutHistory) {
  auto in = synthetic_inputs(30, 5, 10);
  std::vector<TargetRecord> targets;
  for (const auto& t : in.pop.targets) {
    if (t.user_id == 7) continue;
    targets.push_back(t);
  }
  // User 7 keeps only the two period labels.
  targets.push_back({7, 1, 70.0});
  targets.push_back({7, 2, 72.0});
  std::vector<UserDemographics> demo = in.pop.demographics;
  demo.erase(std::remove_if(demo.begin(), demo.end(), [](const auto& d) { return d.user_id == 9; }), demo.end());
  const auto ds = assemble_dataset(in.pop.events, demo, targets, in.pop.weather, in.spec);
  ASSERT_EQ(ds.manifest.skipped.size(), 2u);
  EXPECT_EQ(ds.manifest.skipped[0].user_id, 7u);
  EXPECT_EQ(ds.manifest.skipped[0].reason, "no target history");
  EXPECT_EQ(ds.manifest.skipped[1].user_id, 9u);
  EXPECT_EQ(ds.train.size() + ds.val.size(), 28u);
  for (const auto& s : ds.test) EXPECT_TRUE(s.user_id != 7 && s.user_id != 9);
}

TEST(AssembleDataset, TestPeriodNeverMovesBounds) {
  auto in = synthetic_inputs(50, 8, 16);
  const auto base = assemble_dataset(in.pop.events, in.pop.demographics, in.pop.targets, in.pop.weather, in.spec);
  auto events = in.pop.events;
  for (int k = 0; k < 40; ++k) {
    events.push_back({1, 0, day_start(in.spec.test_start) + 9 * 3600 + k, BehaviorType::Library, 0.0});
  }
  auto targets = in.pop.targets;
  for (auto& t : targets) {
    if (t.user_id == 1 && t.t == in.pop.targets.back().t) t.value = 0.0;
  }
  const auto moved = assemble_dataset(events, in.pop.demographics, targets, in.pop.weather, in.spec);
  for (std::size_t m = 0; m < base.manifest.feature_bounds.size(); ++m) {
    for (std::size_t j = 0; j < base.manifest.feature_bounds[m].size(); ++j) {
      EXPECT_EQ(base.manifest.feature_bounds[m][j].max, moved.manifest.feature_bounds[m][j].max);
    }
  }
  EXPECT_EQ(base.manifest.label_bounds.min, moved.manifest.label_bounds.min);
}

TEST(AssembleDataset, EmptySplitRejected) {
  auto in = synthetic_inputs(1, 3, 6);
  EXPECT_THROW(assemble_dataset(in.pop.events, in.pop.demographics, in.pop.targets, in.pop.weather, in.spec),
               ContractError);
}

TEST(AssembleDataset, DeterministicPerSeed) {
  auto in = synthetic_inputs(40, 6, 12);
  const auto a = assemble_dataset(in.pop.events, in.pop.demographics, in.pop.targets, in.pop.weather, in.spec);
  const auto b = assemble_dataset(in.pop.events, in.pop.demographics, in.pop.targets, in.pop.weather, in.spec);
  ASSERT_EQ(a.val.size(), b.val.size());
  for (std::size_t i = 0; i < a.val.size(); ++i) EXPECT_EQ(a.val[i].user_id, b.val[i].user_id);
}

TEST(Manifest, RoundTrip) {
  const auto dir = scratch_dir("manifest");
  auto in = synthetic_inputs(30, 5, 10);
  const auto ds = assemble_dataset(in.pop.events, in.pop.demographics, in.pop.targets, in.pop.weather, in.spec);
  write_manifest(dir / "manifest.json", ds.manifest);
  const auto m = read_manifest(dir / "manifest.json");
  EXPECT_EQ(m.task, ds.manifest.task);
  EXPECT_EQ(m.types, ds.manifest.types);
  EXPECT_EQ(m.n_days, 5);
  EXPECT_EQ(m.t_max, ds.manifest.t_max);
  EXPECT_EQ(m.label_bounds.min, ds.manifest.label_bounds.min);
  EXPECT_EQ(m.label_bounds.max, ds.manifest.label_bounds.max);
  EXPECT_EQ(m.feature_bounds.size(), 2u);
  EXPECT_EQ(m.feature_bounds[0][3].max, ds.manifest.feature_bounds[0][3].max);
  EXPECT_EQ(m.split_spec().train_start, in.spec.train_start);
  write_split_csv(dir / "val.csv", ds.val);
  const auto ids = read_split_csv(dir / "val.csv");
  ASSERT_EQ(ids.size(), ds.val.size());
  for (std::size_t i = 0; i < ids.size(); ++i) EXPECT_EQ(ids[i], ds.val[i].user_id);
  std::ofstream(dir / "broken.json") << "{\"task\": \"regression\"}";
  EXPECT_THROW(read_manifest(dir / "broken.json"), IoError);
  std::filesystem::remove_all(dir);
}
