#pragma once

// Turns raw events, demographics and target records into model-ready samples.
//
// Every user has two labelled periods: the training semester and the later
// test semester. Their labels are the user's last two target records, and all
// earlier records form the target history. Training-semester samples are
// shuffled and split into train / validation; test-semester samples form the
// test split. Normalization bounds come from the train split only.

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hubs/events.hpp"
#include "hubs/features.hpp"

namespace hubs {

struct SplitSpec {
  TaskKind task = TaskKind::Regression;
  std::vector<BehaviorType> types;  // empty: the task's default support behaviors
  int n_days = 63;                  // N, counted from the start of each semester
  int semester_days = 126;
  DayIndex train_start = 0;  // first calendar day of the training semester
  DayIndex test_start = 0;   // first calendar day of the test semester
  double train_fraction = 0.9;
  int num_classes = 3;
  std::uint64_t seed = 0;
};

// Library + Dorm for regression, the four transaction types for classification.
std::vector<BehaviorType> default_behavior_types(TaskKind task);

inline constexpr std::array<std::uint32_t, kDemographicAttributes> kDefaultDemographicSizes = {8, 2, 2, 4, 6};

struct DailySample {
  UserId user_id = 0;
  int period = 0;  // 0 training semester, 1 test semester
  // Per behavior type, N daily vectors stored day-major and scaled into [0, 1].
  std::vector<std::vector<double>> features;
  // N context vectors, day-major, kContextDim each.
  std::vector<double> contexts;
  UserDemographics demographics;
  std::vector<double> target_history;  // scaled, oldest first
  // Regression: scaled into [-1, 1]. Classification: class level 1..C.
  double label = 0.0;
  double raw_label = 0.0;  // original units

  std::size_t class_index() const { return static_cast<std::size_t>(label) - 1; }
};

struct SkippedUser {
  UserId user_id = 0;
  std::string reason;
};

struct DatasetManifest {
  TaskKind task = TaskKind::Regression;
  std::vector<BehaviorType> types;
  int n_days = 0;
  int t_max = 0;
  int num_classes = 0;
  int semester_days = 0;
  std::string train_start;
  std::string test_start;
  double train_fraction = 0.9;
  std::uint64_t seed = 0;
  std::array<std::uint32_t, kDemographicAttributes> demographic_sizes = kDefaultDemographicSizes;
  std::vector<std::vector<Bounds>> feature_bounds;  // [type][coordinate]
  Bounds label_bounds;                              // regression only
  std::size_t train_count = 0;
  std::size_t val_count = 0;
  std::size_t test_count = 0;
  std::vector<SkippedUser> skipped;

  std::size_t num_types() const { return types.size(); }
  // Maps a model output back to original units (regression) or passes the level through.
  double rescale_label(double scaled) const;
  double scale_label(double raw) const;
  SplitSpec split_spec() const;
};

struct Dataset {
  std::vector<DailySample> train;
  std::vector<DailySample> val;
  std::vector<DailySample> test;
  DatasetManifest manifest;
};

// Throws ContractError when N exceeds the semester length, a split ends up
// empty, or a classification label lies outside 1..num_classes. Users with
// no demographics, no labels for both periods, or no history before the
// training label are excluded and listed in manifest.skipped.
Dataset assemble_dataset(const std::vector<BehaviorEvent>& events, const std::vector<UserDemographics>& demographics,
                         const std::vector<TargetRecord>& targets, const WeatherTable& weather, const SplitSpec& spec);

std::string manifest_to_json(const DatasetManifest& manifest);
// `origin` names the source in error messages.
DatasetManifest manifest_from_json(const std::string& text, const std::string& origin = "manifest");
void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);
DatasetManifest read_manifest(const std::filesystem::path& path);

// One user id per line under the header `user_id`.
void write_split_csv(const std::filesystem::path& path, const std::vector<DailySample>& samples);
std::vector<UserId> read_split_csv(const std::filesystem::path& path);

}  // namespace hubs
