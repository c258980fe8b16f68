#include "run_config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>

#include "hubs/errors.hpp"

namespace hubs::cli {

using nlohmann::json;

HyperParams blank_model() {
  HyperParams hp;
  hp.hidden_sizes.clear();
  hp.facet_dim = 0;
  return hp;
}

HyperParams RunConfig::hyperparams_for(const DatasetManifest& manifest) const {
  const HyperParams defaults = default_hyperparams(manifest.task);
  HyperParams hp = model;
  hp.task = manifest.task;
  hp.types = manifest.types;
  if (hp.hidden_sizes.empty()) {
    hp.hidden_sizes = manifest.types == defaults.types ? defaults.hidden_sizes
                                                       : std::vector<std::size_t>(manifest.types.size(), 4);
  }
  if (hp.facet_dim == 0) hp.facet_dim = defaults.facet_dim;
  hp.n_days = manifest.n_days;
  hp.demographic_sizes = manifest.demographic_sizes;
  hp.num_classes = manifest.task == TaskKind::Classification ? manifest.num_classes : defaults.num_classes;
  hp = apply_variant(hp, variant);
  validate(hp);
  return hp;
}

namespace {

// Reads a key (when present) into a target, or writes the target back out,
// depending on the direction.
class Section {
 public:
  Section(std::string name, const json* in, json* out) : name_(std::move(name)), in_(in), out_(out) {
    if (in_ != nullptr && !in_->is_object()) throw ContractError("config: section '" + name_ + "' must be an object");
  }

  template <class T>
  void field(const std::string& key, T& target) {
    known_.insert(key);
    if (out_ != nullptr) {
      (*out_)[key] = to_json(target);
      return;
    }
    if (in_ == nullptr || !in_->contains(key)) return;
    try {
      from_json(in_->at(key), target);
    } catch (const json::exception&) {
      throw ContractError("config: " + name_ + "." + key + " has the wrong type");
    } catch (const ContractError& e) {
      throw ContractError("config: " + name_ + "." + key + ": " + e.what());
    }
  }

  void finish() const {
    if (in_ == nullptr) return;
    for (const auto& [key, value] : in_->items()) {
      if (!known_.count(key)) throw ContractError("config: unknown key '" + name_ + "." + key + "'");
    }
  }

 private:
  template <class T>
  static void integer(const json& j, T& target) {
    if (!j.is_number_integer()) throw json::type_error::create(302, "integer expected", &j);
    if constexpr (std::is_unsigned_v<T>) {
      if (!j.is_number_unsigned()) throw ContractError("must be non-negative");
    }
    target = j.get<T>();
  }

  template <class T>
    requires std::is_integral_v<T> && (!std::is_same_v<T, bool>)
  static void from_json(const json& j, T& t) {
    integer(j, t);
  }
  static void from_json(const json& j, double& t) {
    if (!j.is_number()) throw json::type_error::create(302, "number expected", &j);
    t = j.get<double>();
  }
  static void from_json(const json& j, bool& t) { t = j.get<bool>(); }
  static void from_json(const json& j, std::string& t) { t = j.get<std::string>(); }
  template <class T>
  static void from_json(const json& j, std::vector<T>& t) {
    if (!j.is_array()) throw json::type_error::create(302, "array expected", &j);
    std::vector<T> out(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) from_json(j[i], out[i]);
    t = std::move(out);
  }
  template <class T, std::size_t N>
  static void from_json(const json& j, std::array<T, N>& t) {
    if (!j.is_array() || j.size() != N) throw ContractError("expected " + std::to_string(N) + " values");
    for (std::size_t i = 0; i < N; ++i) from_json(j[i], t[i]);
  }
  static void from_json(const json& j, TaskKind& t) { t = parse_task_kind(j.get<std::string>()); }
  static void from_json(const json& j, ContextMode& t) { t = parse_context_mode(j.get<std::string>()); }
  static void from_json(const json& j, Variant& t) { t = parse_variant(j.get<std::string>()); }

  template <class T>
  static json to_json(const T& v) {
    if constexpr (std::is_same_v<T, TaskKind> || std::is_same_v<T, ContextMode> || std::is_same_v<T, Variant>) {
      return std::string(to_string(v));
    } else {
      return json(v);
    }
  }

  std::string name_;
  const json* in_;
  json* out_;
  std::set<std::string> known_;
};

// Visits every configurable field once, section by section.
template <class Fn>
void visit(RunConfig& c, Fn&& section) {
  section("generator", [&](Section& s) {
    GenConfig& g = c.generator;
    s.field("seed", c.generator_seed);
    s.field("users", g.users);
    s.field("semester_days", g.semester_days);
    s.field("active_days", g.active_days);
    s.field("semesters", g.semesters);
    s.field("max_history", g.max_history);
    s.field("start_date", g.start_date);
    s.field("task", g.task);
    s.field("library_gates", g.library_gates);
    s.field("dorm_buildings", g.dorm_buildings);
    s.field("canteen_pos", g.canteen_pos);
    s.field("store_pos", g.store_pos);
    s.field("bathroom_pos", g.bathroom_pos);
    s.field("recharge_points", g.recharge_points);
    s.field("clubs", g.clubs);
    s.field("friend_prob", g.friend_prob);
    s.field("group_size_max", g.group_size_max);
    s.field("bridge_prob", g.bridge_prob);
    s.field("co_visit_prob", g.co_visit_prob);
    s.field("diligence_coef", g.diligence_coef);
    s.field("regularity_coef", g.regularity_coef);
    s.field("wealth_coef", g.wealth_coef);
    s.field("social_coef", g.social_coef);
    s.field("social_trait_sd", g.social_trait_sd);
    s.field("social_trait_noise", g.social_trait_noise);
    s.field("trait_shock_sd", g.trait_shock_sd);
    s.field("label_noise_sd", g.label_noise_sd);
    s.field("class_prior", g.class_prior);
    s.field("weekend_library_rate", g.weekend_library_rate);
    s.field("rain_library_rate", g.rain_library_rate);
    s.field("voluntary_diligence_gain", g.voluntary_diligence_gain);
  });
  section("graph", [&](Section& s) {
    s.field("n_days", c.graph.n_days);
    s.field("semester_days", c.graph.semester_days);
    s.field("window_seconds", c.graph.window_seconds);
    s.field("seed", c.graph.seed);
  });
  section("embedding", [&](Section& s) {
    EmbedConfig& e = c.embedding;
    s.field("dim", e.dim);
    s.field("hidden_sizes", e.hidden_sizes);
    s.field("alpha", e.alpha);
    s.field("beta", e.beta);
    s.field("epochs", e.epochs);
    s.field("learning_rate", e.learning_rate);
    s.field("seed", e.seed);
  });
  section("model", [&](Section& s) {
    HyperParams& m = c.model;
    s.field("hidden_sizes", m.hidden_sizes);
    s.field("facets", m.facets);
    s.field("facet_dim", m.facet_dim);
    s.field("demographic_widths", m.demographic_widths);
    s.field("trend_hidden", m.trend_hidden);
    s.field("social_raw", m.social_raw);
    s.field("social_dim", m.social_dim);
    s.field("resblocks", m.resblocks);
    s.field("resblock_width", m.resblock_width);
    s.field("dropout", m.dropout);
    s.field("gamma", m.gamma);
    s.field("context_mode", m.context_mode);
    s.field("use_social", m.use_social);
    s.field("residual", m.residual);
    s.field("num_classes", m.num_classes);
  });
  section("training", [&](Section& s) {
    TrainConfig& t = c.training;
    s.field("batch_size", t.batch_size);
    s.field("learning_rate", t.adam.learning_rate);
    s.field("beta1", t.adam.beta1);
    s.field("beta2", t.adam.beta2);
    s.field("epsilon", t.adam.epsilon);
    s.field("max_epochs", t.max_epochs);
    s.field("patience", t.patience);
    s.field("seed", t.seed);
    s.field("n_days", c.n_days);
    s.field("train_fraction", c.train_fraction);
    s.field("variant", c.variant);
  });
  section("paths", [&](Section& s) {
    s.field("data", c.paths.data);
    s.field("graph", c.paths.graph);
    s.field("embeddings", c.paths.embeddings);
    s.field("run", c.paths.run);
  });
}

const std::set<std::string> kSections = {"generator", "graph", "embedding", "model", "training", "paths"};

}  // namespace

RunConfig parse_run_config(const json& doc) {
  if (!doc.is_object()) throw ContractError("config: the document must be a JSON object");
  for (const auto& [key, value] : doc.items()) {
    if (!kSections.count(key)) throw ContractError("config: unknown section '" + key + "'");
  }
  RunConfig c;
  visit(c, [&](const std::string& name, auto&& body) {
    Section s(name, doc.contains(name) ? &doc.at(name) : nullptr, nullptr);
    body(s);
    s.finish();
  });
  if (c.n_days <= 0) throw ContractError("config: training.n_days must be positive");
  if (!(c.train_fraction > 0.0 && c.train_fraction < 1.0)) {
    throw ContractError("config: training.train_fraction must lie in (0, 1)");
  }
  validate(c.embedding);
  validate(c.training);
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ContractError("config " + path.string() + ": " + e.what());
  }
  return parse_run_config(doc);
}

json resolved_json(const RunConfig& config) {
  RunConfig copy = config;
  json out = json::object();
  visit(copy, [&](const std::string& name, auto&& body) {
    json section = json::object();
    Section s(name, nullptr, &section);
    body(s);
    out[name] = section;
  });
  return out;
}

void apply_seed_override(RunConfig& config) {
  const char* env = std::getenv("HUBS_SEED");
  if (env == nullptr || *env == '\0') return;
  std::uint64_t seed = 0;
  try {
    std::size_t used = 0;
    seed = std::stoull(env, &used);
    if (used != std::string(env).size()) throw std::invalid_argument("trailing");
  } catch (const std::exception&) {
    throw ContractError(std::string("HUBS_SEED must be a non-negative integer, got '") + env + "'");
  }
  config.generator_seed = seed;
  config.graph.seed = seed;
  config.embedding.seed = seed;
  config.training.seed = seed;
}

}  // namespace hubs::cli
