#include "hubs/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <map>
#include <random>

#include <json.hpp>

#include "hubs/errors.hpp"

namespace hubs {

using nlohmann::json;

std::vector<BehaviorType> default_behavior_types(TaskKind task) {
  if (task == TaskKind::Regression) return {BehaviorType::Library, BehaviorType::Dorm};
  return {BehaviorType::Canteen, BehaviorType::Store, BehaviorType::Bathroom, BehaviorType::Recharge};
}

double DatasetManifest::rescale_label(double scaled) const {
  if (task == TaskKind::Classification) return scaled;
  return rescale(scaled, ScaleMode::Symmetric, label_bounds);
}

double DatasetManifest::scale_label(double raw) const {
  if (task == TaskKind::Classification) return raw;
  return normalize(raw, ScaleMode::Symmetric, label_bounds);
}

SplitSpec DatasetManifest::split_spec() const {
  SplitSpec s;
  s.task = task;
  s.types = types;
  s.n_days = n_days;
  s.semester_days = semester_days;
  s.train_start = parse_date(train_start);
  s.test_start = parse_date(test_start);
  s.train_fraction = train_fraction;
  s.num_classes = num_classes;
  s.seed = seed;
  return s;
}

namespace {

struct UserRecord {
  const UserDemographics* demographics = nullptr;
  std::vector<TargetRecord> targets;
  std::vector<BehaviorEvent> events;
};

Bounds widen(Bounds b, double v, bool first) {
  if (first) return {v, v};
  return {std::min(b.min, v), std::max(b.max, v)};
}

}  // namespace

Dataset assemble_dataset(const std::vector<BehaviorEvent>& events, const std::vector<UserDemographics>& demographics,
                         const std::vector<TargetRecord>& targets, const WeatherTable& weather, const SplitSpec& spec) {
  if (spec.n_days <= 0) throw ContractError("assemble_dataset: N must be positive");
  if (spec.n_days > spec.semester_days) {
    throw ContractError("assemble_dataset: N = " + std::to_string(spec.n_days) + " exceeds the " +
                        std::to_string(spec.semester_days) + " available days");
  }
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) {
    throw ContractError("assemble_dataset: train_fraction must lie in (0, 1)");
  }
  if (spec.task == TaskKind::Classification && spec.num_classes < 2) {
    throw ContractError("assemble_dataset: classification needs at least 2 classes");
  }

  Dataset ds;
  DatasetManifest& man = ds.manifest;
  man.task = spec.task;
  man.types = spec.types.empty() ? default_behavior_types(spec.task) : spec.types;
  man.n_days = spec.n_days;
  man.num_classes = spec.task == TaskKind::Classification ? spec.num_classes : 0;
  man.semester_days = spec.semester_days;
  man.train_start = format_date(spec.train_start);
  man.test_start = format_date(spec.test_start);
  man.train_fraction = spec.train_fraction;
  man.seed = spec.seed;

  std::map<UserId, UserRecord> users;
  for (const auto& d : demographics) {
    users[d.user_id].demographics = &d;
    for (std::size_t k = 0; k < kDemographicAttributes; ++k) {
      man.demographic_sizes[k] = std::max(man.demographic_sizes[k], d.categories[k] + 1);
    }
  }
  for (const auto& t : targets) users[t.user_id].targets.push_back(t);
  for (const auto& e : events) {
    if (auto it = users.find(e.user_id); it != users.end()) it->second.events.push_back(e);
  }

  // Contexts are shared by all users of a period.
  const auto period_contexts = [&](DayIndex start) {
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(spec.n_days) * kContextDim);
    for (int n = 0; n < spec.n_days; ++n) {
      const auto c = build_context_vector(start + n, weather);
      out.insert(out.end(), c.begin(), c.end());
    }
    return out;
  };
  const std::vector<double> contexts[2] = {period_contexts(spec.train_start), period_contexts(spec.test_start)};

  std::vector<DailySample> pool;  // training-period samples
  std::vector<DailySample> test;
  std::vector<std::vector<double>> raw_history_pool;
  std::vector<std::vector<double>> raw_history_test;
  for (auto& [uid, rec] : users) {
    if (rec.demographics == nullptr) {
      man.skipped.push_back({uid, "no demographics"});
      continue;
    }
    std::sort(rec.targets.begin(), rec.targets.end(), [](const auto& a, const auto& b) { return a.t < b.t; });
    if (rec.targets.size() < 2) {
      man.skipped.push_back({uid, rec.targets.empty() ? "no target records" : "missing label for a period"});
      continue;
    }
    if (rec.targets.size() < 3) {
      man.skipped.push_back({uid, "no target history"});
      continue;
    }
    if (spec.task == TaskKind::Classification) {
      for (const auto& t : rec.targets) {
        if (t.value != std::round(t.value) || t.value < 1.0 || t.value > spec.num_classes) {
          throw ContractError("assemble_dataset: user " + std::to_string(uid) + " has class level " +
                              std::to_string(t.value) + " outside 1.." + std::to_string(spec.num_classes));
        }
      }
    }
    const std::size_t total = rec.targets.size();
    for (int period = 0; period < 2; ++period) {
      const std::size_t label_pos = total - 2 + static_cast<std::size_t>(period);
      DailySample s;
      s.user_id = uid;
      s.period = period;
      s.demographics = *rec.demographics;
      s.raw_label = rec.targets[label_pos].value;
      s.label = s.raw_label;
      s.contexts = contexts[period];
      const DayIndex start = period == 0 ? spec.train_start : spec.test_start;
      for (auto type : man.types) s.features.push_back(extract_feature_sequence(rec.events, start, spec.n_days, type));
      std::vector<double> history;
      for (std::size_t i = 0; i < label_pos; ++i) history.push_back(rec.targets[i].value);
      (period == 0 ? raw_history_pool : raw_history_test).push_back(std::move(history));
      (period == 0 ? pool : test).push_back(std::move(s));
    }
  }

  // Seeded 90 / 10 split of the training-period pool.
  std::vector<std::size_t> order(pool.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::mt19937_64 rng(spec.seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_train = static_cast<std::size_t>(std::llround(spec.train_fraction * static_cast<double>(pool.size())));
  if (n_train == 0 || n_train >= pool.size() || test.empty()) {
    throw ContractError("assemble_dataset: empty split (" + std::to_string(pool.size()) + " usable users)");
  }
  std::vector<std::size_t> train_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> val_idx(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(val_idx.begin(), val_idx.end());

  // Bounds from the train split only.
  man.feature_bounds.assign(man.types.size(), {});
  for (std::size_t m = 0; m < man.types.size(); ++m) {
    const std::size_t dim = feature_dim(man.types[m]);
    auto& bounds = man.feature_bounds[m];
    bounds.assign(dim, Bounds{});
    bool first = true;
    for (auto i : train_idx) {
      const auto& f = pool[i].features[m];
      for (std::size_t n = 0; n < f.size() / dim; ++n) {
        for (std::size_t j = 0; j < dim; ++j) bounds[j] = widen(bounds[j], f[n * dim + j], first);
        first = false;
      }
    }
  }
  if (spec.task == TaskKind::Regression) {
    bool first = true;
    for (auto i : train_idx) {
      man.label_bounds = widen(man.label_bounds, pool[i].raw_label, first);
      first = false;
    }
  }

  const auto finish = [&](DailySample& s, const std::vector<double>& history) {
    for (std::size_t m = 0; m < man.types.size(); ++m) {
      const auto& bounds = man.feature_bounds[m];
      auto& f = s.features[m];
      for (std::size_t k = 0; k < f.size(); ++k) f[k] = normalize(f[k], ScaleMode::Unit, bounds[k % bounds.size()]);
    }
    s.target_history.clear();
    for (double y : history) {
      if (spec.task == TaskKind::Regression) {
        s.target_history.push_back(normalize(y, ScaleMode::Symmetric, man.label_bounds));
      } else {
        s.target_history.push_back((y - 1.0) / static_cast<double>(spec.num_classes - 1));
      }
    }
    if (spec.task == TaskKind::Regression) s.label = normalize(s.raw_label, ScaleMode::Symmetric, man.label_bounds);
    man.t_max = std::max(man.t_max, static_cast<int>(s.target_history.size()));
  };

  for (auto i : train_idx) {
    finish(pool[i], raw_history_pool[i]);
    ds.train.push_back(std::move(pool[i]));
  }
  for (auto i : val_idx) {
    finish(pool[i], raw_history_pool[i]);
    ds.val.push_back(std::move(pool[i]));
  }
  for (std::size_t i = 0; i < test.size(); ++i) {
    finish(test[i], raw_history_test[i]);
    ds.test.push_back(std::move(test[i]));
  }
  man.train_count = ds.train.size();
  man.val_count = ds.val.size();
  man.test_count = ds.test.size();
  return ds;
}

namespace {

json bounds_json(Bounds b) { return json::array({b.min, b.max}); }

Bounds bounds_from(const json& j) {
  Bounds b{j.at(0).get<double>(), j.at(1).get<double>()};
  if (b.min > b.max) throw IoError("manifest: bounds with min > max");
  return b;
}

}  // namespace

std::string manifest_to_json(const DatasetManifest& m) {
  json j;
  j["task"] = std::string(to_string(m.task));
  j["M"] = m.types.size();
  j["N"] = m.n_days;
  j["T_max"] = m.t_max;
  j["num_classes"] = m.num_classes;
  j["seed"] = m.seed;
  j["semester_days"] = m.semester_days;
  j["train_start"] = m.train_start;
  j["test_start"] = m.test_start;
  j["train_fraction"] = m.train_fraction;
  json types = json::array();
  for (auto t : m.types) types.push_back(std::string(to_string(t)));
  j["behavior_types"] = types;
  json demo = json::object();
  for (std::size_t k = 0; k < kDemographicAttributes; ++k) demo[std::string(kDemographicNames[k])] = m.demographic_sizes[k];
  j["demographic_sizes"] = demo;
  json fb = json::object();
  for (std::size_t i = 0; i < m.types.size(); ++i) {
    json arr = json::array();
    for (auto b : m.feature_bounds.at(i)) arr.push_back(bounds_json(b));
    fb[std::string(to_string(m.types[i]))] = arr;
  }
  j["feature_bounds"] = fb;
  j["label_bounds"] = bounds_json(m.label_bounds);
  j["counts"] = {{"train", m.train_count}, {"val", m.val_count}, {"test", m.test_count}};
  json skipped = json::array();
  for (const auto& s : m.skipped) skipped.push_back({{"user_id", s.user_id}, {"reason", s.reason}});
  j["skipped"] = skipped;
  return j.dump(2);
}

void write_manifest(const std::filesystem::path& path, const DatasetManifest& m) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << manifest_to_json(m) << '\n';
}

DatasetManifest manifest_from_json(const std::string& text, const std::string& origin) {
  try {
    const json j = json::parse(text);
    DatasetManifest m;
    m.task = parse_task_kind(j.at("task").get<std::string>());
    m.n_days = j.at("N").get<int>();
    m.t_max = j.at("T_max").get<int>();
    m.num_classes = j.at("num_classes").get<int>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.semester_days = j.at("semester_days").get<int>();
    m.train_start = j.at("train_start").get<std::string>();
    m.test_start = j.at("test_start").get<std::string>();
    m.train_fraction = j.at("train_fraction").get<double>();
    for (const auto& t : j.at("behavior_types")) m.types.push_back(parse_behavior_type(t.get<std::string>()));
    if (j.at("M").get<std::size_t>() != m.types.size()) throw IoError("manifest: M disagrees with behavior_types");
    for (std::size_t k = 0; k < kDemographicAttributes; ++k) {
      m.demographic_sizes[k] = j.at("demographic_sizes").at(std::string(kDemographicNames[k])).get<std::uint32_t>();
    }
    for (auto t : m.types) {
      std::vector<Bounds> bounds;
      for (const auto& b : j.at("feature_bounds").at(std::string(to_string(t)))) bounds.push_back(bounds_from(b));
      if (bounds.size() != feature_dim(t)) throw IoError("manifest: wrong bound count for " + std::string(to_string(t)));
      m.feature_bounds.push_back(std::move(bounds));
    }
    m.label_bounds = bounds_from(j.at("label_bounds"));
    m.train_count = j.at("counts").at("train").get<std::size_t>();
    m.val_count = j.at("counts").at("val").get<std::size_t>();
    m.test_count = j.at("counts").at("test").get<std::size_t>();
    for (const auto& s : j.at("skipped")) {
      m.skipped.push_back({s.at("user_id").get<UserId>(), s.at("reason").get<std::string>()});
    }
    return m;
  } catch (const json::exception& e) {
    throw IoError(origin + ": " + e.what());
  } catch (const ContractError& e) {
    throw IoError(origin + ": " + e.what());
  }
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return manifest_from_json(text.str(), path.string());
}

void write_split_csv(const std::filesystem::path& path, const std::vector<DailySample>& samples) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "user_id\n";
  for (const auto& s : samples) out << s.user_id << '\n';
}

std::vector<UserId> read_split_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "user_id") throw IoError(path.string() + ": expected header 'user_id'");
  std::vector<UserId> ids;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      std::size_t used = 0;
      ids.push_back(std::stoull(line, &used));
      if (used != line.size()) throw std::invalid_argument(line);
    } catch (const std::exception&) {
      throw IoError(path.string() + ": bad user id '" + line + "'");
    }
  }
  return ids;
}

}  // namespace hubs
