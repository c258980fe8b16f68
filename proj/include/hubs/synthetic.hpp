#pragma once

// Synthetic campus population with planted friendships.
//
// Each user carries latent habit traits (diligence, regularity, wealth) that
// drive event rates, plus a club-level social trait that never shows up in
// the user's own events. Friends are planted as small groups inside a club,
// joined by a few bridge friendships, and co-visit the canteen or library on
// a configurable share of days. Target values depend on the user's own traits
// and on the mean social trait of their planted friends, so the friendship
// graph carries label information that the behavior sequences do not.

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "hubs/events.hpp"

namespace hubs {

struct GenConfig {
  std::size_t users = 200;
  int semester_days = 126;
  // Days with events at the start of every event semester.
  int active_days = 63;
  // Semesters with events; the last one is the held-out (test) semester.
  int semesters = 2;
  // Prior semesters with target observations only, drawn from [1, max_history].
  int max_history = 4;
  std::string start_date = "2016-09-05";
  TaskKind task = TaskKind::Regression;

  std::uint32_t library_gates = 8;
  std::uint32_t dorm_buildings = 20;
  std::uint32_t canteen_pos = 40;
  std::uint32_t store_pos = 10;
  std::uint32_t bathroom_pos = 6;
  std::uint32_t recharge_points = 4;

  std::size_t clubs = 8;
  // Probability that a user joins a friend group.
  double friend_prob = 0.9;
  int group_size_max = 4;
  // Per grouped user, probability of one extra friend in another group of the same club.
  double bridge_prob = 0.5;
  // Per day, probability that a group lunches together / a bridge pair studies together.
  double co_visit_prob = 0.5;

  double diligence_coef = 1.0;
  double regularity_coef = 0.4;
  double wealth_coef = 1.0;
  double social_coef = 0.3;
  double social_trait_sd = 2.0;
  double social_trait_noise = 0.3;
  double trait_shock_sd = 0.5;
  double label_noise_sd = 0.2;
  // Class shares for difficulty levels 1 (high), 2 (medium), 3 (none).
  std::array<double, 3> class_prior = {0.13, 0.15, 0.72};

  // Context modulation of library visits.
  double weekend_library_rate = 0.6;
  double rain_library_rate = 0.75;
  // Multiplier on the diligence effect for weekend and rainy days.
  double voluntary_diligence_gain = 2.0;
};

struct SyntheticPopulation {
  std::vector<BehaviorEvent> events;  // sorted by (timestamp, user, type, object)
  std::vector<UserDemographics> demographics;
  std::vector<TargetRecord> targets;  // per user t = 1..H+semesters; last `semesters` align with event semesters
  WeatherTable weather;
  std::vector<std::pair<UserId, UserId>> planted_pairs;  // u < v, sorted
  std::vector<std::size_t> club_of_user;                   // index by user position (id - 1)
};

// Deterministic for a fixed (config, seed). Throws ContractError for zero
// users or days and for inconsistent day counts.
SyntheticPopulation generate_synthetic_population(const GenConfig& config, std::uint64_t seed);

// Calendar day of day `n` (0-based) of event semester `s`.
DayIndex semester_day(const GenConfig& config, int semester, int n);

}  // namespace hubs
