#pragma once

#include <span>
#include <vector>

#include "hubs/events.hpp"

namespace hubs {

// Daily feature vector B for one user, one day and one behavior type.
//   Library  : 16 hourly entry counts over [07:00, 23:00)
//   Dorm     : 8 hourly entry counts, [12:00, 13:00) then [17:00, 24:00) hour by hour
//   Canteen  : absolute meal cost summed per window: breakfast [05,10), lunch [10,15), dinner [15,22)
//   Store, Bathroom, Recharge : [event count, total absolute amount]
// Events of other types or outside `day` are ignored. Empty input yields zeros.
std::vector<double> extract_daily_features(std::span<const BehaviorEvent> events, DayIndex day, BehaviorType type);

// Same binning for `days` consecutive days starting at `first_day`, returned
// day-major: entry [n * feature_dim(type) + j].
std::vector<double> extract_feature_sequence(std::span<const BehaviorEvent> events, DayIndex first_day, int days,
                                             BehaviorType type);

// Day-of-week one-hot (Monday first) followed by the multi-hot weather bits.
// Throws LookupError when the day is missing from the table.
std::vector<double> build_context_vector(DayIndex day, const WeatherTable& weather);

struct Bounds {
  double min = 0.0;
  double max = 0.0;
};

enum class ScaleMode { Unit, Symmetric };  // [0, 1] or [-1, 1]

// Affine min-max map into the target range, clamped. min == max maps to 0.
double normalize(double value, ScaleMode mode, Bounds bounds);
// Inverse of normalize for values inside the range. Degenerate bounds give min.
double rescale(double scaled, ScaleMode mode, Bounds bounds);

std::vector<double> normalize(std::span<const double> values, ScaleMode mode, Bounds bounds);
std::vector<double> rescale(std::span<const double> scaled, ScaleMode mode, Bounds bounds);

}  // namespace hubs
