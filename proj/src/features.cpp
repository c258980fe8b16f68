#include "hubs/features.hpp"

#include <algorithm>
#include <cmath>

#include "hubs/errors.hpp"

namespace hubs {

namespace {

// Dorm slot for an hour of day, or -1 outside the recorded hours.
int dorm_slot(int hour) {
  if (hour == 12) return 0;
  if (hour >= 17 && hour <= 23) return hour - 16;
  return -1;
}

int meal_slot(int hour) {
  if (hour >= 5 && hour < 10) return 0;
  if (hour >= 10 && hour < 15) return 1;
  if (hour >= 15 && hour < 22) return 2;
  return -1;
}

void accumulate(std::span<double> out, const BehaviorEvent& e) {
  const int hour = static_cast<int>(second_of_day(e.timestamp) / 3600);
  switch (e.behavior_type) {
    case BehaviorType::Library:
      if (hour >= 7 && hour < 23) out[hour - 7] += 1.0;
      break;
    case BehaviorType::Dorm:
      if (const int s = dorm_slot(hour); s >= 0) out[s] += 1.0;
      break;
    case BehaviorType::Canteen:
      if (const int s = meal_slot(hour); s >= 0) out[s] += std::abs(e.amount);
      break;
    case BehaviorType::Store:
    case BehaviorType::Bathroom:
    case BehaviorType::Recharge:
      out[0] += 1.0;
      out[1] += std::abs(e.amount);
      break;
  }
}

}  // namespace

std::vector<double> extract_daily_features(std::span<const BehaviorEvent> events, DayIndex day, BehaviorType type) {
  std::vector<double> out(feature_dim(type), 0.0);
  for (const auto& e : events) {
    if (e.behavior_type == type && day_of(e.timestamp) == day) accumulate(out, e);
  }
  return out;
}

std::vector<double> extract_feature_sequence(std::span<const BehaviorEvent> events, DayIndex first_day, int days,
                                             BehaviorType type) {
  if (days < 0) throw ContractError("feature sequence: negative day count");
  const std::size_t dim = feature_dim(type);
  std::vector<double> out(dim * static_cast<std::size_t>(days), 0.0);
  for (const auto& e : events) {
    if (e.behavior_type != type) continue;
    const DayIndex offset = day_of(e.timestamp) - first_day;
    if (offset < 0 || offset >= days) continue;
    accumulate(std::span<double>(out).subspan(static_cast<std::size_t>(offset) * dim, dim), e);
  }
  return out;
}

std::vector<double> build_context_vector(DayIndex day, const WeatherTable& weather) {
  const auto it = weather.find(day);
  if (it == weather.end()) throw LookupError("no weather record for " + format_date(day));
  std::vector<double> out(kContextDim, 0.0);
  out[weekday_index(day)] = 1.0;
  for (std::size_t i = 0; i < kWeatherCategories; ++i) {
    if (it->second & (1u << i)) out[7 + i] = 1.0;
  }
  return out;
}

double normalize(double value, ScaleMode mode, Bounds b) {
  if (b.max == b.min) return 0.0;
  const double unit = std::clamp((value - b.min) / (b.max - b.min), 0.0, 1.0);
  return mode == ScaleMode::Unit ? unit : 2.0 * unit - 1.0;
}

double rescale(double scaled, ScaleMode mode, Bounds b) {
  if (b.max == b.min) return b.min;
  const double unit = mode == ScaleMode::Unit ? scaled : (scaled + 1.0) / 2.0;
  return b.min + unit * (b.max - b.min);
}

std::vector<double> normalize(std::span<const double> values, ScaleMode mode, Bounds bounds) {
  std::vector<double> out;
  out.reserve(values.size());
  for (double v : values) out.push_back(normalize(v, mode, bounds));
  return out;
}

std::vector<double> rescale(std::span<const double> scaled, ScaleMode mode, Bounds bounds) {
  std::vector<double> out;
  out.reserve(scaled.size());
  for (double v : scaled) out.push_back(rescale(v, mode, bounds));
  return out;
}

}  // namespace hubs
