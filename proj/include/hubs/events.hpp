#pragma once

// Raw behavior records, calendar helpers and the CSV file formats that carry
// them between pipeline stages.

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace hubs {

using UserId = std::uint64_t;
using Timestamp = std::int64_t;  // seconds since epoch, UTC
using DayIndex = std::int64_t;   // days since epoch, UTC

inline constexpr Timestamp kSecondsPerDay = 86400;

enum class TaskKind { Regression, Classification };

std::string_view to_string(TaskKind task);
TaskKind parse_task_kind(std::string_view name);

enum class BehaviorType { Library, Dorm, Canteen, Store, Bathroom, Recharge };

inline constexpr std::array<BehaviorType, 6> kAllBehaviorTypes = {
    BehaviorType::Library, BehaviorType::Dorm,     BehaviorType::Canteen,
    BehaviorType::Store,   BehaviorType::Bathroom, BehaviorType::Recharge};

std::string_view to_string(BehaviorType type);
// Throws ContractError for unknown names.
BehaviorType parse_behavior_type(std::string_view name);
// Daily feature width of a behavior type: 16, 8, 3, 2, 2, 2.
std::size_t feature_dim(BehaviorType type);

struct BehaviorEvent {
  UserId user_id = 0;
  std::uint32_t object_id = 0;  // gate or POS terminal
  Timestamp timestamp = 0;
  BehaviorType behavior_type = BehaviorType::Library;
  double amount = 0.0;  // < 0 payment, > 0 recharge, 0 entrance

  bool operator==(const BehaviorEvent&) const = default;
};

// Entrance events carry no money, payments are negative, recharges positive.
bool satisfies_sign_rule(const BehaviorEvent& event);

// ---- calendar -------------------------------------------------------------

DayIndex day_of(Timestamp ts);
Timestamp day_start(DayIndex day);
// Seconds since midnight UTC.
std::int64_t second_of_day(Timestamp ts);
// 0 = Monday ... 6 = Sunday.
int weekday_index(DayIndex day);
// "YYYY-MM-DD" <-> DayIndex.
DayIndex parse_date(std::string_view text);
std::string format_date(DayIndex day);
// "YYYY-MM-DDTHH:MM:SSZ"; parsing also accepts a space separator and a
// missing trailing Z.
Timestamp parse_timestamp(std::string_view text);
std::string format_timestamp(Timestamp ts);

// ---- weather / context ----------------------------------------------------

enum class Weather : std::uint8_t { Clear, Cloudy, Rain, Snow, Storm, Wind };
inline constexpr std::size_t kWeatherCategories = 6;
inline constexpr std::size_t kContextDim = 7 + kWeatherCategories;

std::string_view to_string(Weather w);
Weather parse_weather(std::string_view name);

// Multi-hot weather conditions per calendar day (bit i = Weather(i)).
using WeatherTable = std::map<DayIndex, std::uint8_t>;

// ---- demographics / targets ------------------------------------------------

inline constexpr std::size_t kDemographicAttributes = 5;
inline constexpr std::array<std::string_view, kDemographicAttributes> kDemographicNames = {
    "province", "nationality", "gender", "grade", "school"};

// Category index per attribute, in kDemographicNames order.
struct UserDemographics {
  UserId user_id = 0;
  std::array<std::uint32_t, kDemographicAttributes> categories{};
};

// One observation of the target behavior: semester t (1-based, per user)
// and its value (grade points or difficulty level).
struct TargetRecord {
  UserId user_id = 0;
  int t = 0;
  double value = 0.0;
};

// ---- CSV files -------------------------------------------------------------

// Shortest text that parses back to the same double.
std::string format_double(double v);

void write_events_csv(const std::filesystem::path& path, const std::vector<BehaviorEvent>& events);
std::vector<BehaviorEvent> read_events_csv(const std::filesystem::path& path);

void write_demographics_csv(const std::filesystem::path& path, const std::vector<UserDemographics>& rows);
std::vector<UserDemographics> read_demographics_csv(const std::filesystem::path& path);

void write_targets_csv(const std::filesystem::path& path, const std::vector<TargetRecord>& rows);
std::vector<TargetRecord> read_targets_csv(const std::filesystem::path& path);

void write_weather_csv(const std::filesystem::path& path, const WeatherTable& table);
WeatherTable read_weather_csv(const std::filesystem::path& path);

void write_pairs_csv(const std::filesystem::path& path, const std::vector<std::pair<UserId, UserId>>& pairs);
std::vector<std::pair<UserId, UserId>> read_pairs_csv(const std::filesystem::path& path);

}  // namespace hubs
