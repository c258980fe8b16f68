#include "hubs/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "hubs/errors.hpp"

namespace hubs {

namespace {

using Rng = std::mt19937_64;

struct Traits {
  double diligence = 0.0;
  double regularity = 0.0;
  double wealth = 0.0;
  double social = 0.0;
};

double round_cents(double v) { return std::round(v * 100.0) / 100.0; }

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
double normal(Rng& rng, double mean, double sd) { return std::normal_distribution<double>(mean, sd)(rng); }
bool bernoulli(Rng& rng, double p) { return std::bernoulli_distribution(std::clamp(p, 0.0, 1.0))(rng); }
int poisson(Rng& rng, double rate) { return rate <= 0.0 ? 0 : std::poisson_distribution<int>(rate)(rng); }
std::uint32_t pick(Rng& rng, std::uint32_t n) { return std::uniform_int_distribution<std::uint32_t>(0, n - 1)(rng); }

// Second of the day, hours given as fractional values, clamped into [lo, hi).
std::int64_t clamp_seconds(double hours, double lo, double hi) {
  const double h = std::clamp(hours, lo, std::nextafter(hi, lo));
  return static_cast<std::int64_t>(std::floor(h * 3600.0));
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

bool has(std::uint8_t mask, Weather w) { return (mask >> static_cast<unsigned>(w)) & 1u; }

std::uint8_t draw_weather(Rng& rng) {
  std::uint8_t mask = 0;
  auto set = [&](Weather w) { mask |= static_cast<std::uint8_t>(1u << static_cast<unsigned>(w)); };
  const bool rain = bernoulli(rng, 0.2);
  const bool snow = bernoulli(rng, 0.04);
  const bool storm = bernoulli(rng, 0.03);
  if (rain || storm) set(Weather::Rain);
  if (snow) set(Weather::Snow);
  if (storm) set(Weather::Storm);
  if (bernoulli(rng, 0.15)) set(Weather::Wind);
  if (!rain && !storm && !snow) set(bernoulli(rng, 0.35) ? Weather::Cloudy : Weather::Clear);
  return mask;
}

}  // namespace

DayIndex semester_day(const GenConfig& config, int semester, int n) {
  return parse_date(config.start_date) + static_cast<DayIndex>(semester) * config.semester_days + n;
}

SyntheticPopulation generate_synthetic_population(const GenConfig& config, std::uint64_t seed) {
  if (config.users == 0) throw ContractError("generator: user count must be positive");
  if (config.active_days <= 0 || config.semester_days <= 0) throw ContractError("generator: day counts must be positive");
  if (config.active_days > config.semester_days) throw ContractError("generator: active_days exceeds semester_days");
  if (config.semesters <= 0) throw ContractError("generator: semesters must be positive");
  if (config.max_history < 1) throw ContractError("generator: max_history must be at least 1");
  if (config.group_size_max < 2) throw ContractError("generator: group_size_max must be at least 2");
  if (config.clubs == 0) throw ContractError("generator: clubs must be positive");
  if (config.library_gates == 0 || config.dorm_buildings == 0 || config.canteen_pos == 0 || config.store_pos == 0 ||
      config.bathroom_pos == 0 || config.recharge_points == 0) {
    throw ContractError("generator: venue counts must be positive");
  }

  Rng rng(seed);
  SyntheticPopulation pop;
  const std::size_t n_users = config.users;
  const auto id_of = [](std::size_t i) { return static_cast<UserId>(i + 1); };

  // Calendar and weather.
  for (int s = 0; s < config.semesters; ++s) {
    for (int n = 0; n < config.semester_days; ++n) pop.weather[semester_day(config, s, n)] = draw_weather(rng);
  }

  // Persistent traits.
  std::vector<Traits> traits(n_users);
  for (auto& t : traits) {
    t.diligence = normal(rng, 0.0, 1.0);
    t.regularity = normal(rng, 0.0, 1.0);
    t.wealth = normal(rng, 0.0, 1.0);
  }

  // Friend groups, then clubs per group.
  std::vector<std::size_t> order(n_users);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::size_t> joiners;
  for (auto u : order) {
    if (bernoulli(rng, config.friend_prob)) joiners.push_back(u);
  }
  std::vector<std::vector<std::size_t>> groups;
  for (std::size_t pos = 0; pos + 1 < joiners.size();) {
    std::size_t size = std::uniform_int_distribution<std::size_t>(2, config.group_size_max)(rng);
    size = std::min(size, joiners.size() - pos);
    if (joiners.size() - pos - size == 1) ++size;  // no stranded single
    groups.emplace_back(joiners.begin() + pos, joiners.begin() + pos + size);
    pos += size;
  }
  pop.club_of_user.assign(n_users, 0);
  std::vector<bool> grouped(n_users, false);
  std::vector<std::size_t> group_of(n_users, 0);
  std::vector<std::vector<std::size_t>> club_groups(config.clubs);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const std::size_t club = g % config.clubs;
    club_groups[club].push_back(g);
    for (auto u : groups[g]) {
      pop.club_of_user[u] = club;
      grouped[u] = true;
      group_of[u] = g;
    }
  }
  for (std::size_t u = 0; u < n_users; ++u) {
    if (!grouped[u]) pop.club_of_user[u] = pick(rng, static_cast<std::uint32_t>(config.clubs));
  }

  std::set<std::pair<std::size_t, std::size_t>> pair_set;
  for (const auto& g : groups) {
    for (std::size_t a = 0; a < g.size(); ++a) {
      for (std::size_t b = a + 1; b < g.size(); ++b) pair_set.emplace(std::min(g[a], g[b]), std::max(g[a], g[b]));
    }
  }
  std::vector<std::pair<std::size_t, std::size_t>> bridges;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const auto& peers = club_groups[pop.club_of_user[groups[g].front()]];
    if (peers.size() < 2) continue;
    for (auto u : groups[g]) {
      if (!bernoulli(rng, config.bridge_prob)) continue;
      std::size_t other = peers[pick(rng, static_cast<std::uint32_t>(peers.size()))];
      if (other == g) other = peers[(std::find(peers.begin(), peers.end(), g) - peers.begin() + 1) % peers.size()];
      const auto& members = groups[other];
      const std::size_t v = members[pick(rng, static_cast<std::uint32_t>(members.size()))];
      const auto key = std::make_pair(std::min(u, v), std::max(u, v));
      if (pair_set.insert(key).second) bridges.push_back(key);
    }
  }
  for (const auto& [u, v] : pair_set) pop.planted_pairs.emplace_back(id_of(u), id_of(v));

  std::vector<std::vector<std::size_t>> friends(n_users);
  for (const auto& [u, v] : pair_set) {
    friends[u].push_back(v);
    friends[v].push_back(u);
  }

  // Social trait: club level plus a small personal deviation.
  std::vector<double> club_level(config.clubs);
  for (auto& c : club_level) c = normal(rng, 0.0, config.social_trait_sd);
  for (std::size_t u = 0; u < n_users; ++u) {
    traits[u].social = club_level[pop.club_of_user[u]] + normal(rng, 0.0, config.social_trait_noise);
  }
  std::vector<double> friend_social(n_users, 0.0);
  for (std::size_t u = 0; u < n_users; ++u) {
    if (friends[u].empty()) continue;
    double s = 0.0;
    for (auto v : friends[u]) s += traits[v].social;
    friend_social[u] = s / static_cast<double>(friends[u].size());
  }

  // Target series with per-semester trait shocks. The last `semesters`
  // entries line up with the event semesters and drive their event rates.
  std::vector<int> history(n_users);
  std::vector<std::vector<Traits>> semester_traits(n_users);
  std::vector<std::vector<double>> scores(n_users);
  for (std::size_t u = 0; u < n_users; ++u) {
    history[u] = std::uniform_int_distribution<int>(1, config.max_history)(rng);
    const int total = history[u] + config.semesters;
    for (int t = 0; t < total; ++t) {
      Traits st = traits[u];
      st.diligence += normal(rng, 0.0, config.trait_shock_sd);
      st.wealth += normal(rng, 0.0, config.trait_shock_sd);
      const double noise = normal(rng, 0.0, config.label_noise_sd);
      double score = 0.0;
      if (config.task == TaskKind::Regression) {
        score = config.diligence_coef * st.diligence + config.regularity_coef * st.regularity +
                config.social_coef * friend_social[u] + noise;
      } else {
        score = config.wealth_coef * st.wealth + config.social_coef * friend_social[u] + noise;
      }
      semester_traits[u].push_back(st);
      scores[u].push_back(score);
    }
  }
  if (config.task == TaskKind::Regression) {
    for (std::size_t u = 0; u < n_users; ++u) {
      for (std::size_t t = 0; t < scores[u].size(); ++t) {
        const double wag = round_cents(std::clamp(75.0 + 8.0 * scores[u][t], 0.0, 100.0));
        pop.targets.push_back({id_of(u), static_cast<int>(t) + 1, wag});
      }
    }
  } else {
    // Difficulty levels by population quantiles of the score (low score = high difficulty).
    std::vector<double> all;
    for (const auto& s : scores) all.insert(all.end(), s.begin(), s.end());
    std::sort(all.begin(), all.end());
    const auto quantile = [&](double q) {
      const auto idx = static_cast<std::size_t>(std::floor(q * static_cast<double>(all.size())));
      return all[std::min(idx, all.size() - 1)];
    };
    const double cut1 = quantile(config.class_prior[0]);
    const double cut2 = quantile(config.class_prior[0] + config.class_prior[1]);
    for (std::size_t u = 0; u < n_users; ++u) {
      for (std::size_t t = 0; t < scores[u].size(); ++t) {
        const double s = scores[u][t];
        const double level = s < cut1 ? 1.0 : (s < cut2 ? 2.0 : 3.0);
        pop.targets.push_back({id_of(u), static_cast<int>(t) + 1, level});
      }
    }
  }

  // Demographics; grade follows the number of prior semesters.
  for (std::size_t u = 0; u < n_users; ++u) {
    UserDemographics d;
    d.user_id = id_of(u);
    d.categories = {pick(rng, 8), bernoulli(rng, 0.05) ? 1u : 0u, pick(rng, 2),
                    static_cast<std::uint32_t>(std::min(history[u], 4) - 1), pick(rng, 6)};
    pop.demographics.push_back(d);
  }

  const std::vector<std::uint32_t> dorm_of = [&] {
    std::vector<std::uint32_t> v(n_users);
    for (auto& x : v) x = pick(rng, config.dorm_buildings);
    return v;
  }();

  auto& events = pop.events;
  auto emit = [&](std::size_t u, std::uint32_t object, DayIndex day, std::int64_t second, BehaviorType type,
                  double amount) {
    events.push_back({id_of(u), object, day_start(day) + second, type, amount});
  };

  for (int s = 0; s < config.semesters; ++s) {
    for (int n = 0; n < config.active_days; ++n) {
      const DayIndex day = semester_day(config, s, n);
      const std::uint8_t weather = pop.weather.at(day);
      const bool weekend = weekday_index(day) >= 5;
      const bool wet = has(weather, Weather::Rain) || has(weather, Weather::Storm) || has(weather, Weather::Snow);

      // Joint activities: group lunches and bridge-pair library visits.
      std::vector<bool> joint_lunch(n_users, false);
      for (const auto& g : groups) {
        if (!bernoulli(rng, config.co_visit_prob)) continue;
        const std::uint32_t pos = pick(rng, config.canteen_pos);
        const double hour = normal(rng, 11.75, 0.4);
        const std::int64_t base = clamp_seconds(hour, 10.0, 14.9);
        for (auto u : g) {
          const double cost = round_cents(5.0 * std::exp(0.3 * semester_traits[u][history[u] + s].wealth + normal(rng, 0.0, 0.15)));
          emit(u, pos, day, base + static_cast<std::int64_t>(uniform(rng, 0.0, 180.0)), BehaviorType::Canteen,
               -std::max(cost, 0.01));
          joint_lunch[u] = true;
        }
      }
      for (const auto& [u, v] : bridges) {
        if (!bernoulli(rng, config.co_visit_prob)) continue;
        const std::uint32_t gate = pick(rng, config.library_gates);
        const std::int64_t base = clamp_seconds(uniform(rng, 8.0, 21.5), 7.0, 23.0);
        emit(u, gate, day, base, BehaviorType::Library, 0.0);
        emit(v, gate, day, std::min<std::int64_t>(base + static_cast<std::int64_t>(uniform(rng, 0.0, 120.0)), 23 * 3600 - 1),
             BehaviorType::Library, 0.0);
      }

      for (std::size_t u = 0; u < n_users; ++u) {
        const Traits& st = semester_traits[u][history[u] + s];

        // Library: context scales the rate and how strongly diligence shows.
        double rate = 1.0;
        double gain = 1.0;
        if (weekend) {
          rate *= config.weekend_library_rate;
          gain *= config.voluntary_diligence_gain;
        }
        if (wet) {
          rate *= config.rain_library_rate;
          gain *= config.voluntary_diligence_gain;
        }
        const int visits = poisson(rng, 2.4 * rate * sigmoid(0.7 * gain * st.diligence));
        for (int k = 0; k < visits; ++k) {
          emit(u, pick(rng, config.library_gates), day, clamp_seconds(uniform(rng, 7.0, 23.0), 7.0, 23.0),
               BehaviorType::Library, 0.0);
        }

        // Dorm: evening return time tracks regularity; optional noon visit.
        const int returns = 1 + poisson(rng, 0.5);
        for (int k = 0; k < returns; ++k) {
          const double hour = normal(rng, 21.0 - 0.8 * st.regularity, 0.6 + 0.4 * sigmoid(-st.regularity));
          emit(u, dorm_of[u], day, clamp_seconds(hour, 17.0, 24.0), BehaviorType::Dorm, 0.0);
        }
        if (bernoulli(rng, sigmoid(-0.5 + 0.6 * st.regularity))) {
          emit(u, dorm_of[u], day, clamp_seconds(uniform(rng, 12.0, 13.0), 12.0, 13.0), BehaviorType::Dorm, 0.0);
        }
        for (int k = poisson(rng, 0.4); k > 0; --k) {
          emit(u, dorm_of[u], day, clamp_seconds(uniform(rng, 7.0, 17.0), 7.0, 17.0), BehaviorType::Dorm, 0.0);
        }

        // Canteen meals.
        const double meal_scale = std::exp(0.3 * st.wealth);
        const std::array<double, 3> peak = {7.5, 11.75, 17.5};
        const std::array<double, 3> lo = {5.0, 10.0, 15.0};
        const std::array<double, 3> hi = {10.0, 15.0, 22.0};
        const std::array<double, 3> base_cost = {2.5, 5.0, 4.5};
        const std::array<double, 3> prob = {sigmoid(0.3 + 0.8 * st.regularity) * (weekend ? 0.5 : 1.0), 0.9,
                                            wet ? 0.75 : 0.85};
        for (std::size_t meal = 0; meal < 3; ++meal) {
          if (meal == 1 && joint_lunch[u]) continue;
          if (!bernoulli(rng, prob[meal])) continue;
          const double cost = round_cents(base_cost[meal] * meal_scale * std::exp(normal(rng, 0.0, 0.15)));
          emit(u, pick(rng, config.canteen_pos), day, clamp_seconds(normal(rng, peak[meal], 0.45), lo[meal], hi[meal]),
               BehaviorType::Canteen, -std::max(cost, 0.01));
        }

        // Store, bathroom, recharge.
        for (int k = poisson(rng, 0.4 * std::exp(0.4 * st.wealth) * (weekend ? 1.5 : 1.0)); k > 0; --k) {
          const double cost = round_cents(6.0 * std::exp(0.4 * st.wealth + normal(rng, 0.0, 0.4)));
          emit(u, pick(rng, config.store_pos), day, clamp_seconds(uniform(rng, 7.0, 22.0), 7.0, 22.0),
               BehaviorType::Store, -std::max(cost, 0.01));
        }
        for (int k = poisson(rng, has(weather, Weather::Snow) ? 0.7 : 0.5); k > 0; --k) {
          const double cost = round_cents(1.5 + uniform(rng, 0.0, 1.0) + 0.2 * st.wealth);
          emit(u, pick(rng, config.bathroom_pos), day, clamp_seconds(uniform(rng, 18.0, 23.0), 18.0, 23.0),
               BehaviorType::Bathroom, -std::max(cost, 0.01));
        }
        if (bernoulli(rng, 0.06 * std::exp(-0.2 * st.wealth))) {
          const double amount = round_cents(50.0 * std::exp(0.3 * st.wealth));
          emit(u, pick(rng, config.recharge_points), day, clamp_seconds(uniform(rng, 8.0, 20.0), 8.0, 20.0),
               BehaviorType::Recharge, std::max(amount, 0.01));
        }
      }
    }
  }

  std::sort(events.begin(), events.end(), [](const BehaviorEvent& a, const BehaviorEvent& b) {
    return std::tie(a.timestamp, a.user_id, a.behavior_type, a.object_id, a.amount) <
           std::tie(b.timestamp, b.user_id, b.behavior_type, b.object_id, b.amount);
  });
  return pop;
}

}  // namespace hubs
