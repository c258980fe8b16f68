#include "hubs/events.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "hubs/errors.hpp"

namespace hubs {

namespace {

constexpr std::array<std::string_view, 6> kTypeNames = {"Library", "Dorm", "Canteen", "Store", "Bathroom", "Recharge"};
constexpr std::array<std::string_view, 6> kWeatherNames = {"clear", "cloudy", "rain", "snow", "storm", "wind"};

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.remove_suffix(1);
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  return s;
}

template <typename T>
T parse_number(std::string_view s, const std::string& where) {
  s = trim(s);
  T value{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw IoError(where + ": cannot parse number '" + std::string(s) + "'");
  }
  return value;
}

double parse_double(std::string_view s, const std::string& where) {
  s = trim(s);
  std::string buf(s);
  char* end = nullptr;
  const double v = std::strtod(buf.c_str(), &end);
  if (buf.empty() || end != buf.c_str() + buf.size() || !std::isfinite(v)) {
    throw IoError(where + ": cannot parse number '" + buf + "'");
  }
  return v;
}

class CsvReader {
 public:
  CsvReader(const std::filesystem::path& path, std::string_view expected_header) : path_(path.string()), in_(path) {
    if (!in_) throw IoError("cannot open " + path_);
    std::string header;
    if (!std::getline(in_, header)) throw IoError(path_ + ": missing header");
    if (trim(header) != expected_header) {
      throw IoError(path_ + ": expected header '" + std::string(expected_header) + "', got '" + header + "'");
    }
  }

  // Next non-empty row split into exactly `columns` fields.
  bool next(std::vector<std::string_view>& fields, std::size_t columns) {
    while (std::getline(in_, line_)) {
      ++line_no_;
      if (trim(line_).empty()) continue;
      fields = split(trim(line_), ',');
      if (fields.size() != columns) {
        throw IoError(where() + ": expected " + std::to_string(columns) + " fields, got " +
                      std::to_string(fields.size()));
      }
      return true;
    }
    return false;
  }

  std::string where() const { return path_ + ":" + std::to_string(line_no_ + 1); }

 private:
  std::string path_;
  std::ifstream in_;
  std::string line_;
  std::size_t line_no_ = 0;
};

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string_view to_string(TaskKind task) {
  return task == TaskKind::Regression ? "regression" : "classification";
}

TaskKind parse_task_kind(std::string_view name) {
  if (name == "regression") return TaskKind::Regression;
  if (name == "classification") return TaskKind::Classification;
  throw ContractError("unknown task kind '" + std::string(name) + "'");
}

std::string_view to_string(BehaviorType type) {
  const auto i = static_cast<std::size_t>(type);
  if (i >= kTypeNames.size()) throw ContractError("unknown behavior type " + std::to_string(i));
  return kTypeNames[i];
}

BehaviorType parse_behavior_type(std::string_view name) {
  for (std::size_t i = 0; i < kTypeNames.size(); ++i) {
    if (kTypeNames[i] == name) return static_cast<BehaviorType>(i);
  }
  throw ContractError("unknown behavior type '" + std::string(name) + "'");
}

std::size_t feature_dim(BehaviorType type) {
  switch (type) {
    case BehaviorType::Library:
      return 16;
    case BehaviorType::Dorm:
      return 8;
    case BehaviorType::Canteen:
      return 3;
    case BehaviorType::Store:
    case BehaviorType::Bathroom:
    case BehaviorType::Recharge:
      return 2;
  }
  throw ContractError("unknown behavior type " + std::to_string(static_cast<int>(type)));
}

bool satisfies_sign_rule(const BehaviorEvent& e) {
  switch (e.behavior_type) {
    case BehaviorType::Library:
    case BehaviorType::Dorm:
      return e.amount == 0.0;
    case BehaviorType::Canteen:
    case BehaviorType::Store:
    case BehaviorType::Bathroom:
      return e.amount < 0.0;
    case BehaviorType::Recharge:
      return e.amount > 0.0;
  }
  return false;
}

// ---- calendar -------------------------------------------------------------

DayIndex day_of(Timestamp ts) {
  return ts >= 0 ? ts / kSecondsPerDay : -((-ts + kSecondsPerDay - 1) / kSecondsPerDay);
}

Timestamp day_start(DayIndex day) { return day * kSecondsPerDay; }

std::int64_t second_of_day(Timestamp ts) { return ts - day_start(day_of(ts)); }

int weekday_index(DayIndex day) {
  const std::chrono::sys_days d{std::chrono::days{day}};
  return static_cast<int>(std::chrono::weekday{d}.iso_encoding()) - 1;
}

DayIndex parse_date(std::string_view text) {
  text = trim(text);
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') {
    throw IoError("invalid date '" + std::string(text) + "', expected YYYY-MM-DD");
  }
  const int y = parse_number<int>(text.substr(0, 4), "date");
  const unsigned m = parse_number<unsigned>(text.substr(5, 2), "date");
  const unsigned d = parse_number<unsigned>(text.substr(8, 2), "date");
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
  if (!ymd.ok()) throw IoError("invalid calendar date '" + std::string(text) + "'");
  return std::chrono::sys_days{ymd}.time_since_epoch().count();
}

std::string format_date(DayIndex day) {
  const std::chrono::year_month_day ymd{std::chrono::sys_days{std::chrono::days{day}}};
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                static_cast<unsigned>(ymd.day()));
  return buf;
}

Timestamp parse_timestamp(std::string_view text) {
  text = trim(text);
  if (!text.empty() && text.back() == 'Z') text.remove_suffix(1);
  if (text.size() != 19 || (text[10] != 'T' && text[10] != ' ') || text[13] != ':' || text[16] != ':') {
    throw IoError("invalid timestamp '" + std::string(text) + "', expected YYYY-MM-DDTHH:MM:SSZ");
  }
  const DayIndex day = parse_date(text.substr(0, 10));
  const int hh = parse_number<int>(text.substr(11, 2), "timestamp");
  const int mm = parse_number<int>(text.substr(14, 2), "timestamp");
  const int ss = parse_number<int>(text.substr(17, 2), "timestamp");
  if (hh > 23 || mm > 59 || ss > 59) throw IoError("invalid time of day in '" + std::string(text) + "'");
  return day_start(day) + hh * 3600 + mm * 60 + ss;
}

std::string format_timestamp(Timestamp ts) {
  const auto sod = second_of_day(ts);
  char buf[16];
  std::snprintf(buf, sizeof(buf), "T%02d:%02d:%02dZ", static_cast<int>(sod / 3600), static_cast<int>(sod / 60 % 60),
                static_cast<int>(sod % 60));
  return format_date(day_of(ts)) + buf;
}

// ---- weather --------------------------------------------------------------

std::string_view to_string(Weather w) { return kWeatherNames.at(static_cast<std::size_t>(w)); }

Weather parse_weather(std::string_view name) {
  for (std::size_t i = 0; i < kWeatherNames.size(); ++i) {
    if (kWeatherNames[i] == name) return static_cast<Weather>(i);
  }
  throw IoError("unknown weather category '" + std::string(name) + "'");
}

// ---- CSV files -------------------------------------------------------------

void write_events_csv(const std::filesystem::path& path, const std::vector<BehaviorEvent>& events) {
  auto out = open_out(path);
  out << "user_id,object_id,timestamp,behavior_type,amount\n";
  for (const auto& e : events) {
    out << e.user_id << ',' << e.object_id << ',' << format_timestamp(e.timestamp) << ',' << to_string(e.behavior_type)
        << ',' << format_double(e.amount) << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

std::vector<BehaviorEvent> read_events_csv(const std::filesystem::path& path) {
  CsvReader reader(path, "user_id,object_id,timestamp,behavior_type,amount");
  std::vector<BehaviorEvent> events;
  std::vector<std::string_view> f;
  while (reader.next(f, 5)) {
    BehaviorEvent e;
    e.user_id = parse_number<UserId>(f[0], reader.where());
    e.object_id = parse_number<std::uint32_t>(f[1], reader.where());
    e.timestamp = parse_timestamp(f[2]);
    try {
      e.behavior_type = parse_behavior_type(trim(f[3]));
    } catch (const ContractError& err) {
      throw IoError(reader.where() + ": " + err.what());
    }
    e.amount = parse_double(f[4], reader.where());
    if (!satisfies_sign_rule(e)) throw IoError(reader.where() + ": amount sign does not match behavior type");
    events.push_back(e);
  }
  return events;
}

void write_demographics_csv(const std::filesystem::path& path, const std::vector<UserDemographics>& rows) {
  auto out = open_out(path);
  out << "user_id,province,nationality,gender,grade,school\n";
  for (const auto& r : rows) {
    out << r.user_id;
    for (auto c : r.categories) out << ',' << c;
    out << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

std::vector<UserDemographics> read_demographics_csv(const std::filesystem::path& path) {
  CsvReader reader(path, "user_id,province,nationality,gender,grade,school");
  std::vector<UserDemographics> rows;
  std::vector<std::string_view> f;
  while (reader.next(f, 1 + kDemographicAttributes)) {
    UserDemographics r;
    r.user_id = parse_number<UserId>(f[0], reader.where());
    for (std::size_t k = 0; k < kDemographicAttributes; ++k) {
      r.categories[k] = parse_number<std::uint32_t>(f[k + 1], reader.where());
    }
    rows.push_back(r);
  }
  return rows;
}

void write_targets_csv(const std::filesystem::path& path, const std::vector<TargetRecord>& rows) {
  auto out = open_out(path);
  out << "user_id,t,value\n";
  for (const auto& r : rows) out << r.user_id << ',' << r.t << ',' << format_double(r.value) << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

std::vector<TargetRecord> read_targets_csv(const std::filesystem::path& path) {
  CsvReader reader(path, "user_id,t,value");
  std::vector<TargetRecord> rows;
  std::vector<std::string_view> f;
  while (reader.next(f, 3)) {
    TargetRecord r;
    r.user_id = parse_number<UserId>(f[0], reader.where());
    r.t = parse_number<int>(f[1], reader.where());
    r.value = parse_double(f[2], reader.where());
    rows.push_back(r);
  }
  return rows;
}

void write_weather_csv(const std::filesystem::path& path, const WeatherTable& table) {
  auto out = open_out(path);
  out << "date,weather\n";
  for (const auto& [day, mask] : table) {
    out << format_date(day) << ',';
    bool first = true;
    for (std::size_t i = 0; i < kWeatherCategories; ++i) {
      if (mask & (1u << i)) {
        if (!first) out << '|';
        out << kWeatherNames[i];
        first = false;
      }
    }
    out << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

WeatherTable read_weather_csv(const std::filesystem::path& path) {
  CsvReader reader(path, "date,weather");
  WeatherTable table;
  std::vector<std::string_view> f;
  while (reader.next(f, 2)) {
    std::uint8_t mask = 0;
    if (!trim(f[1]).empty()) {
      for (auto name : split(trim(f[1]), '|')) mask |= static_cast<std::uint8_t>(1u << static_cast<unsigned>(parse_weather(name)));
    }
    table[parse_date(f[0])] = mask;
  }
  return table;
}

void write_pairs_csv(const std::filesystem::path& path, const std::vector<std::pair<UserId, UserId>>& pairs) {
  auto out = open_out(path);
  out << "u,v\n";
  for (const auto& [u, v] : pairs) out << u << ',' << v << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

std::vector<std::pair<UserId, UserId>> read_pairs_csv(const std::filesystem::path& path) {
  CsvReader reader(path, "u,v");
  std::vector<std::pair<UserId, UserId>> pairs;
  std::vector<std::string_view> f;
  while (reader.next(f, 2)) {
    pairs.emplace_back(parse_number<UserId>(f[0], reader.where()), parse_number<UserId>(f[1], reader.where()));
  }
  return pairs;
}

}  // namespace hubs
