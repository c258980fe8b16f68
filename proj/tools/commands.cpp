#include "commands.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "hubs/dataset.hpp"
#include "hubs/embedding.hpp"
#include "hubs/errors.hpp"
#include "hubs/events.hpp"
#include "hubs/init.hpp"
#include "hubs/model.hpp"
#include "hubs/social_graph.hpp"
#include "hubs/synthetic.hpp"
#include "hubs/training.hpp"
#include "run_config.hpp"

namespace hubs::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class OverwriteError : public Error {
 public:
  using Error::Error;
};

// File names inside the command directories.
constexpr const char* kEvents = "events.csv";
constexpr const char* kDemographics = "demographics.csv";
constexpr const char* kTargets = "targets.csv";
constexpr const char* kWeather = "weather.csv";
constexpr const char* kPlanted = "planted_pairs.csv";
constexpr const char* kDataManifest = "manifest.json";
constexpr const char* kResolved = "resolved_config.json";
constexpr const char* kEdges = "edges.csv";
constexpr const char* kSidecar = "graph.json";
constexpr const char* kGraphReport = "graph_report.json";
constexpr const char* kNullHistogram = "null_histogram.csv";
constexpr const char* kEmbeddings = "embeddings.bin";
constexpr const char* kEmbeddingLoss = "embedding_loss.csv";
constexpr const char* kCheckpoint = "checkpoint.hubs";
constexpr const char* kLoss = "loss.csv";
constexpr const char* kDatasetManifest = "dataset_manifest.json";
constexpr const char* kSummary = "train_summary.json";
constexpr const char* kMetrics = "metrics.json";

void guard(const std::vector<fs::path>& outputs, bool force) {
  if (force) return;
  for (const auto& p : outputs) {
    if (fs::exists(p)) throw OverwriteError("refusing to overwrite " + p.string() + " (pass --force)");
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

RunConfig load_config(const std::string& path) {
  RunConfig config = path.empty() ? parse_run_config(json::object()) : load_run_config(path);
  apply_seed_override(config);
  return config;
}

void write_resolved(const fs::path& dir, const RunConfig& config) {
  write_text(dir / kResolved, resolved_json(config).dump(2) + "\n");
}

// Flag value, else the configured default; an error naming both when neither is set.
std::string pick(const std::string& flag, const std::string& fallback, const std::string& what) {
  if (!flag.empty()) return flag;
  if (!fallback.empty()) return fallback;
  throw ContractError("no " + what + " given (pass --" + what + " or set paths." + what + ")");
}

void print_warnings(std::ostream& err, const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) err << "warning: " << w << '\n';
}

Dataset load_dataset(const fs::path& dir, const SplitSpec& spec) {
  const auto events = read_events_csv(dir / kEvents);
  const auto demographics = read_demographics_csv(dir / kDemographics);
  const auto targets = read_targets_csv(dir / kTargets);
  const auto weather = read_weather_csv(dir / kWeather);
  return assemble_dataset(events, demographics, targets, weather, spec);
}

// Loads the embedding table a model needs, or nothing when it does not use one.
std::optional<NodeEmbeddings> load_model_embeddings(const HyperParams& hp, const std::string& dir) {
  if (!hp.use_social) return std::nullopt;
  if (dir.empty()) throw ContractError("this model uses social embeddings; pass --embeddings");
  NodeEmbeddings emb = load_embeddings(fs::path(dir) / kEmbeddings);
  if (emb.dim != hp.social_raw) {
    throw IncompatibleError("embedding width " + std::to_string(emb.dim) + " does not match the model's " +
                            std::to_string(hp.social_raw));
  }
  return emb;
}

// ---- gen-data ------------------------------------------------------------------

struct GenArgs {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  bool force = false;
};

int gen_data(const GenArgs& a, std::ostream& out, std::ostream&) {
  RunConfig config = load_config(a.config);
  if (a.seed) config.generator_seed = *a.seed;
  const GenConfig& g = config.generator;
  if (g.semesters < 2) throw ContractError("generator.semesters must be at least 2 (training and test semester)");
  const fs::path dir = pick(a.out, config.paths.data, "out");
  guard({dir / kEvents, dir / kDemographics, dir / kTargets, dir / kWeather, dir / kPlanted, dir / kDataManifest,
         dir / kResolved},
        a.force);

  const SyntheticPopulation pop = generate_synthetic_population(g, config.generator_seed);
  fs::create_directories(dir);
  write_events_csv(dir / kEvents, pop.events);
  write_demographics_csv(dir / kDemographics, pop.demographics);
  write_targets_csv(dir / kTargets, pop.targets);
  write_weather_csv(dir / kWeather, pop.weather);
  write_pairs_csv(dir / kPlanted, pop.planted_pairs);

  json manifest;
  manifest["task"] = std::string(to_string(g.task));
  manifest["users"] = g.users;
  manifest["seed"] = config.generator_seed;
  manifest["semester_days"] = g.semester_days;
  manifest["active_days"] = g.active_days;
  manifest["semesters"] = g.semesters;
  manifest["train_start"] = format_date(semester_day(g, g.semesters - 2, 0));
  manifest["test_start"] = format_date(semester_day(g, g.semesters - 1, 0));
  manifest["events"] = pop.events.size();
  manifest["planted_pairs"] = pop.planted_pairs.size();
  write_text(dir / kDataManifest, manifest.dump(2) + "\n");
  config.paths.data = dir.string();
  write_resolved(dir, config);

  out << "wrote " << pop.events.size() << " events for " << g.users << " users to " << dir.string() << '\n';
  return kOk;
}

// ---- build-graph ---------------------------------------------------------------

struct GraphArgs {
  std::string config;
  std::string events;
  std::optional<int> n_days;
  std::optional<int> semester_days;
  std::optional<std::int64_t> window;
  std::string null_model;
  std::optional<int> trials;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool force = false;
};

std::map<std::uint64_t, std::size_t> count_histogram(const CoOccurrenceCounts& c) {
  std::map<std::uint64_t, std::size_t> h;
  for (const auto& [pair, n] : c.counts) ++h[n];
  return h;
}

int build_graph(const GraphArgs& a, std::ostream& out, std::ostream& err) {
  RunConfig config = load_config(a.config);
  GraphConfig& gc = config.graph;
  if (a.n_days) gc.n_days = *a.n_days;
  if (a.semester_days) gc.semester_days = *a.semester_days;
  if (a.window) gc.window_seconds = *a.window;
  if (a.seed) gc.seed = *a.seed;
  if (gc.n_days <= 0) throw ContractError("--n-days must be positive");
  if (gc.window_seconds <= 0) throw ContractError("--window-sec must be positive");
  std::optional<ShuffleMode> mode;
  int trials = a.trials.value_or(1);
  if (!a.null_model.empty()) {
    mode = parse_shuffle_mode(a.null_model);
    if (trials < 1) throw ContractError("--trials must be at least 1 with --null-model");
  } else if (a.trials) {
    throw ContractError("--trials requires --null-model");
  }
  const Thresholds tau = friendship_thresholds(gc.n_days, gc.semester_days);

  const fs::path events_path =
      !a.events.empty() ? fs::path(a.events)
                        : fs::path(pick("", config.paths.data, "data")) / kEvents;
  const fs::path dir = pick(a.out, config.paths.graph, "out");
  std::vector<fs::path> outputs = {dir / kEdges, dir / kSidecar, dir / kGraphReport, dir / kResolved};
  if (mode) outputs.push_back(dir / kNullHistogram);
  guard(outputs, a.force);

  if (!fs::exists(events_path)) throw IoError("events file " + events_path.string() + " does not exist");
  const auto all = read_events_csv(events_path);
  std::vector<BehaviorEvent> window;
  std::string first_day;
  if (!all.empty()) {
    DayIndex first = day_of(all.front().timestamp);
    for (const auto& e : all) first = std::min(first, day_of(e.timestamp));
    first_day = format_date(first);
    for (const auto& e : all) {
      if (day_of(e.timestamp) < first + gc.n_days) window.push_back(e);
    }
  } else {
    err << "warning: " << events_path.string() << " holds no events; the graph is empty\n";
  }

  const auto library = count_cooccurrences(window, VenueClass::Library, gc.window_seconds);
  const auto canteen = count_cooccurrences(window, VenueClass::Canteen, gc.window_seconds);
  const SocialGraph graph = infer_friendship(library, canteen, gc.n_days, gc.semester_days);

  fs::create_directories(dir);
  GraphSidecar sidecar{tau, gc.n_days, gc.semester_days, gc.window_seconds, gc.seed, first_day};
  write_graph(dir / kEdges, dir / kSidecar, graph, sidecar);

  const GraphReport summary = graph_report(graph);
  json report;
  report["nodes"] = summary.nodes;
  report["edges"] = summary.edges;
  report["isolated"] = summary.isolated;
  json degrees = json::object();
  for (const auto& [degree, count] : summary.degree_histogram) degrees[std::to_string(degree)] = count;
  report["degree_histogram"] = degrees;
  const fs::path planted_path = events_path.parent_path() / kPlanted;
  if (fs::exists(planted_path)) {
    const EdgeRecovery r = compare_edges(graph, read_pairs_csv(planted_path));
    report["planted"] = {{"planted", r.planted},
                         {"inferred", r.inferred},
                         {"true_positives", r.true_positives},
                         {"recall", r.recall()},
                         {"precision", r.precision()}};
  }

  if (mode) {
    std::map<std::uint64_t, double> null_lib, null_can;
    double null_edges = 0.0;
    for (int t = 0; t < trials; ++t) {
      const auto shuffled =
          shuffle_null_model(window, *mode, derive_seed(gc.seed, "null-model/" + std::to_string(t)));
      const auto lib = count_cooccurrences(shuffled, VenueClass::Library, gc.window_seconds);
      const auto can = count_cooccurrences(shuffled, VenueClass::Canteen, gc.window_seconds);
      for (const auto& [n, pairs] : count_histogram(lib)) null_lib[n] += static_cast<double>(pairs);
      for (const auto& [n, pairs] : count_histogram(can)) null_can[n] += static_cast<double>(pairs);
      null_edges += static_cast<double>(infer_friendship(lib, can, gc.n_days, gc.semester_days).edge_count());
    }
    std::ostringstream csv;
    csv << "venue,cooccurrences,observed_pairs,null_pairs\n";
    const auto emit = [&](VenueClass venue, const CoOccurrenceCounts& observed,
                          const std::map<std::uint64_t, double>& null) {
      const auto obs = count_histogram(observed);
      std::set<std::uint64_t> keys;
      for (const auto& [n, pairs] : obs) keys.insert(n);
      for (const auto& [n, pairs] : null) keys.insert(n);
      for (auto n : keys) {
        const auto o = obs.find(n);
        const auto z = null.find(n);
        csv << to_string(venue) << ',' << n << ',' << (o == obs.end() ? 0 : o->second) << ','
            << format_double(z == null.end() ? 0.0 : z->second / trials) << '\n';
      }
    };
    emit(VenueClass::Library, library, null_lib);
    emit(VenueClass::Canteen, canteen, null_can);
    write_text(dir / kNullHistogram, csv.str());
    report["null_model"] = {{"mode", std::string(to_string(*mode))},
                            {"trials", trials},
                            {"seed", gc.seed},
                            {"mean_edges", null_edges / trials}};
  }
  write_text(dir / kGraphReport, report.dump(2) + "\n");
  config.paths.graph = dir.string();
  write_resolved(dir, config);

  out << "graph: " << summary.nodes << " nodes, " << summary.edges << " edges (library threshold "
      << format_double(tau.library) << ", canteen threshold " << format_double(tau.canteen) << ")\n";
  return kOk;
}

// ---- embed-graph ---------------------------------------------------------------

struct EmbedArgs {
  std::string config;
  std::string graph;
  std::string out;
  std::optional<std::uint64_t> seed;
  bool force = false;
};

int embed(const EmbedArgs& a, std::ostream& out, std::ostream& err) {
  RunConfig config = load_config(a.config);
  if (a.seed) config.embedding.seed = *a.seed;
  const fs::path graph_dir = pick(a.graph, config.paths.graph, "graph");
  const fs::path dir = pick(a.out, config.paths.embeddings, "out");
  guard({dir / kEmbeddings, dir / kEmbeddingLoss, dir / kResolved}, a.force);

  const SocialGraph graph = read_graph(graph_dir / kEdges, graph_dir / kSidecar);
  NodeEmbeddings emb;
  if (graph.node_count() < 2) {
    emb.dim = config.embedding.dim;
    emb.warnings.push_back("graph has " + std::to_string(graph.node_count()) +
                           " node(s); writing an empty embedding table");
  } else {
    emb = embed_graph(graph, config.embedding);
  }
  print_warnings(err, emb.warnings);

  fs::create_directories(dir);
  save_embeddings(dir / kEmbeddings, emb);
  std::ostringstream csv;
  csv << "epoch,loss\n";
  for (std::size_t i = 0; i < emb.loss_history.size(); ++i) {
    csv << i + 1 << ',' << format_double(emb.loss_history[i]) << '\n';
  }
  write_text(dir / kEmbeddingLoss, csv.str());
  config.paths.graph = graph_dir.string();
  config.paths.embeddings = dir.string();
  write_resolved(dir, config);
  out << "embedded " << emb.table.size() << " nodes in " << emb.dim << " dimensions\n";
  return kOk;
}

// ---- train ----------------------------------------------------------------------

struct TrainArgs {
  std::string config;
  std::string data;
  std::string embeddings;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::string variant;
  bool force = false;
};

SplitSpec split_for(const fs::path& data_dir, const RunConfig& config) {
  const json m = read_json(data_dir / kDataManifest);
  SplitSpec spec;
  try {
    spec.task = parse_task_kind(m.at("task").get<std::string>());
    spec.semester_days = m.at("semester_days").get<int>();
    spec.train_start = parse_date(m.at("train_start").get<std::string>());
    spec.test_start = parse_date(m.at("test_start").get<std::string>());
  } catch (const json::exception& e) {
    throw IoError((data_dir / kDataManifest).string() + ": " + e.what());
  }
  spec.n_days = config.n_days;
  spec.train_fraction = config.train_fraction;
  spec.num_classes = config.model.num_classes;
  spec.seed = config.training.seed;
  return spec;
}

int train_cmd(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  RunConfig config = load_config(a.config);
  if (a.seed) config.training.seed = *a.seed;
  if (!a.variant.empty()) config.variant = parse_variant(a.variant);
  const fs::path data_dir = pick(a.data, config.paths.data, "data");
  const std::string emb_dir = a.embeddings.empty() ? config.paths.embeddings : a.embeddings;
  const fs::path dir = pick(a.out, config.paths.run, "out");
  guard({dir / kCheckpoint, dir / kLoss, dir / kDatasetManifest, dir / "train_users.csv", dir / "val_users.csv",
         dir / "test_users.csv", dir / kSummary, dir / kResolved},
        a.force);

  const Dataset data = load_dataset(data_dir, split_for(data_dir, config));
  if (!data.manifest.skipped.empty()) {
    err << "warning: " << data.manifest.skipped.size() << " user(s) skipped (see " << kDatasetManifest << ")\n";
  }
  const HyperParams hp = config.hyperparams_for(data.manifest);
  const auto emb = load_model_embeddings(hp, emb_dir);

  const TrainResult result = train(data, emb ? &*emb : nullptr, hp, config.training, [&](const EpochRecord& r) {
    err << "epoch " << r.epoch << " train " << format_double(r.train_loss) << " val " << format_double(r.val_loss)
        << '\n';
  });
  print_warnings(err, result.warnings);

  fs::create_directories(dir);
  const std::string manifest_text = manifest_to_json(data.manifest);
  json meta;
  meta["variant"] = std::string(to_string(config.variant));
  meta["seed"] = config.training.seed;
  meta["best_epoch"] = result.best_epoch;
  meta["dataset_manifest"] = json::parse(manifest_text);
  save_checkpoint(dir / kCheckpoint, result.best, meta.dump());
  write_loss_csv(dir / kLoss, result.history);
  write_text(dir / kDatasetManifest, manifest_text + "\n");
  write_split_csv(dir / "train_users.csv", data.train);
  write_split_csv(dir / "val_users.csv", data.val);
  write_split_csv(dir / "test_users.csv", data.test);

  json summary;
  summary["variant"] = meta["variant"];
  summary["seed"] = config.training.seed;
  summary["epochs_run"] = result.history.size();
  summary["best_epoch"] = result.best_epoch;
  summary["best_val_loss"] = result.best_val_loss;
  summary["stopped_early"] = result.stopped_early;
  summary["diverged"] = result.diverged;
  summary["divergence"] = result.divergence;
  summary["seconds_per_epoch"] = result.seconds_per_epoch();
  write_text(dir / kSummary, summary.dump(2) + "\n");

  config.paths.data = data_dir.string();
  config.paths.embeddings = emb_dir;
  config.paths.run = dir.string();
  write_resolved(dir, config);

  if (result.diverged) {
    err << "error: training diverged: " << result.divergence << "; kept the parameters from epoch "
        << result.best_epoch << '\n';
    return kInputError;
  }
  out << "trained " << to_string(config.variant) << " for " << result.history.size() << " epochs, best epoch "
      << result.best_epoch << " (validation loss " << format_double(result.best_val_loss) << ")\n";
  return kOk;
}

// ---- evaluate / predict ------------------------------------------------------------

struct RunArgs {
  std::string config;
  std::string run;
  std::string data;
  std::string embeddings;
};

struct LoadedRun {
  RunConfig config;
  Checkpoint checkpoint;
  json metadata;
  DatasetManifest manifest;
  Dataset data;
  std::optional<NodeEmbeddings> embeddings;

  const NodeEmbeddings* emb() const { return embeddings ? &*embeddings : nullptr; }
};

bool same_bounds(const DatasetManifest& a, const DatasetManifest& b) {
  if (a.feature_bounds.size() != b.feature_bounds.size()) return false;
  for (std::size_t i = 0; i < a.feature_bounds.size(); ++i) {
    if (a.feature_bounds[i].size() != b.feature_bounds[i].size()) return false;
    for (std::size_t k = 0; k < a.feature_bounds[i].size(); ++k) {
      if (a.feature_bounds[i][k].min != b.feature_bounds[i][k].min ||
          a.feature_bounds[i][k].max != b.feature_bounds[i][k].max) {
        return false;
      }
    }
  }
  return a.label_bounds.min == b.label_bounds.min && a.label_bounds.max == b.label_bounds.max;
}

LoadedRun load_run(const RunArgs& a) {
  LoadedRun r;
  const fs::path run_dir = a.run.empty() ? fs::path() : fs::path(a.run);
  if (!a.config.empty()) {
    r.config = load_config(a.config);
  } else if (!run_dir.empty() && fs::exists(run_dir / kResolved)) {
    r.config = load_config((run_dir / kResolved).string());
  } else {
    r.config = load_config("");
  }
  const fs::path ckpt = fs::path(pick(a.run, r.config.paths.run, "run")) / kCheckpoint;
  r.checkpoint = load_checkpoint(ckpt);
  try {
    r.metadata = json::parse(r.checkpoint.metadata_json);
    r.manifest = manifest_from_json(r.metadata.at("dataset_manifest").dump(), ckpt.string());
  } catch (const json::exception&) {
    throw IncompatibleError(ckpt.string() + " carries no dataset manifest");
  } catch (const IoError& e) {
    throw IncompatibleError(e.what());
  }
  if (!a.config.empty()) {
    // Explicit configuration: the stored tensors must match what it describes.
    r.checkpoint = load_checkpoint(ckpt, r.config.hyperparams_for(r.manifest));
  }
  const fs::path data_dir = pick(a.data, r.config.paths.data, "data");
  r.data = load_dataset(data_dir, r.manifest.split_spec());
  if (!same_bounds(r.data.manifest, r.manifest)) {
    throw IncompatibleError("the dataset in " + data_dir.string() + " differs from the one the checkpoint was trained on");
  }
  r.embeddings = load_model_embeddings(r.checkpoint.params.hyper(),
                                       a.embeddings.empty() ? r.config.paths.embeddings : a.embeddings);
  return r;
}

struct EvalArgs {
  RunArgs run;
  std::string out;
  bool force = false;
};

int evaluate_cmd(const EvalArgs& a, std::ostream& out, std::ostream&) {
  LoadedRun r = load_run(a.run);
  const fs::path run_dir = pick(a.run.run, r.config.paths.run, "run");
  const fs::path metrics_path = a.out.empty() ? run_dir / kMetrics : fs::path(a.out);
  guard({metrics_path}, a.force);

  MetricsReport report = evaluate(r.checkpoint.params, r.emb(), r.data.test, r.manifest);
  if (fs::exists(run_dir / kSummary)) {
    report.seconds_per_epoch = read_json(run_dir / kSummary).value("seconds_per_epoch", 0.0);
  }
  json extra;
  extra["variant"] = r.metadata.value("variant", std::string(to_string(Variant::Full)));
  extra["seed"] = r.metadata.value("seed", std::uint64_t{0});
  if (metrics_path.has_parent_path()) fs::create_directories(metrics_path.parent_path());
  write_metrics_json(metrics_path, report, extra.dump());
  if (report.task == TaskKind::Regression) {
    out << "mse " << format_double(report.mse) << '\n';
  } else {
    out << "macro_f1 " << format_double(report.macro_f1) << '\n';
  }
  return kOk;
}

struct PredictArgs {
  RunArgs run;
  std::optional<UserId> user;
};

int predict_cmd(const PredictArgs& a, std::ostream& out, std::ostream& err) {
  if (!a.user) throw ContractError("--user is required");
  LoadedRun r = load_run(a.run);
  const auto it = std::find_if(r.data.test.begin(), r.data.test.end(),
                               [&](const DailySample& s) { return s.user_id == *a.user; });
  if (it == r.data.test.end()) throw LookupError("user " + std::to_string(*a.user) + " has no test-semester sample");
  std::vector<std::string> warnings;
  const auto predictions = predict({*it}, r.emb(), r.checkpoint.params, r.manifest, &warnings);
  print_warnings(err, warnings);
  out << format_double(predictions.at(0).value) << '\n';
  return kOk;
}

// ---- report ----------------------------------------------------------------------

struct ReportArgs {
  std::vector<std::string> metrics;
  std::string metric;
  std::string out;
  bool force = false;
};

int report_cmd(const ReportArgs& a, std::ostream& out, std::ostream&) {
  if (a.metrics.empty()) throw ContractError("report needs at least one --metrics file");
  const fs::path out_path = a.out;
  guard({out_path}, a.force);

  std::string metric = a.metric;
  std::string task;
  std::map<Variant, std::map<std::uint64_t, double>> table;
  std::set<std::uint64_t> seeds;
  for (const auto& path : a.metrics) {
    const json j = read_json(path);
    try {
      const std::string t = j.at("task").get<std::string>();
      if (task.empty()) task = t;
      if (t != task) throw ContractError("report: " + path + " is a " + t + " run, the others are " + task);
      if (metric.empty()) metric = parse_task_kind(task) == TaskKind::Regression ? "mse" : "macro_f1";
      const Variant v = parse_variant(j.at("variant").get<std::string>());
      const auto seed = j.at("seed").get<std::uint64_t>();
      if (!j.contains(metric) || !j.at(metric).is_number()) {
        throw ContractError("report: " + path + " has no numeric '" + metric + "'");
      }
      if (!table[v].emplace(seed, j.at(metric).get<double>()).second) {
        throw ContractError("report: two files for variant " + std::string(to_string(v)) + " seed " +
                            std::to_string(seed));
      }
      seeds.insert(seed);
    } catch (const json::exception& e) {
      throw IoError(path + ": " + e.what());
    }
  }

  std::ostringstream csv;
  csv << "variant";
  for (auto s : seeds) csv << ",seed_" << s;
  csv << ",mean\n";
  for (const auto& [variant, values] : table) {
    csv << to_string(variant);
    double sum = 0.0;
    for (auto s : seeds) {
      csv << ',';
      const auto it = values.find(s);
      if (it != values.end()) {
        csv << format_double(it->second);
        sum += it->second;
      }
    }
    csv << ',' << format_double(sum / static_cast<double>(values.size())) << '\n';
  }
  if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
  write_text(out_path, csv.str());
  out << csv.str();
  return kOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Daily-behavior and social-graph prediction toolkit", "hubs"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic campus dataset");
  gen_cmd->add_option("--config", gen.config, "Run configuration (JSON)")->required();
  gen_cmd->add_option("--out", gen.out, "Output directory");
  gen_cmd->add_option("--seed", gen.seed, "Generator seed");
  gen_cmd->add_flag("--force", gen.force, "Overwrite existing outputs");

  GraphArgs graph;
  auto* graph_cmd = app.add_subcommand("build-graph", "Infer the friendship graph from co-occurrences");
  graph_cmd->add_option("--config", graph.config, "Run configuration (JSON)");
  graph_cmd->add_option("--events", graph.events, "Events CSV");
  graph_cmd->add_option("--n-days", graph.n_days, "Days counted from the first event day");
  graph_cmd->add_option("--semester-days", graph.semester_days, "Semester length in days");
  graph_cmd->add_option("--window-sec", graph.window, "Co-occurrence window in seconds");
  graph_cmd->add_option("--null-model", graph.null_model, "Also count shuffled events: object or timestamp");
  graph_cmd->add_option("--trials", graph.trials, "Null-model shuffles");
  graph_cmd->add_option("--seed", graph.seed, "Null-model seed");
  graph_cmd->add_option("--out", graph.out, "Output directory");
  graph_cmd->add_flag("--force", graph.force, "Overwrite existing outputs");

  EmbedArgs emb;
  auto* emb_cmd = app.add_subcommand("embed-graph", "Learn structural node embeddings");
  emb_cmd->add_option("--config", emb.config, "Run configuration (JSON)");
  emb_cmd->add_option("--graph", emb.graph, "Graph directory");
  emb_cmd->add_option("--out", emb.out, "Output directory");
  emb_cmd->add_option("--seed", emb.seed, "Embedding seed");
  emb_cmd->add_flag("--force", emb.force, "Overwrite existing outputs");

  TrainArgs tr;
  auto* train_sub = app.add_subcommand("train", "Train a model");
  train_sub->add_option("--config", tr.config, "Run configuration (JSON)");
  train_sub->add_option("--data", tr.data, "Dataset directory");
  train_sub->add_option("--embeddings", tr.embeddings, "Embedding directory");
  train_sub->add_option("--out", tr.out, "Run directory");
  train_sub->add_option("--seed", tr.seed, "Training seed");
  train_sub->add_option("--variant", tr.variant, "full, vanilla_lstm or no_social");
  train_sub->add_flag("--force", tr.force, "Overwrite existing outputs");

  const auto add_run_options = [](CLI::App* cmd, RunArgs& r) {
    cmd->add_option("--config", r.config, "Run configuration (JSON); must match the checkpoint");
    cmd->add_option("--run", r.run, "Run directory written by train");
    cmd->add_option("--data", r.data, "Dataset directory");
    cmd->add_option("--embeddings", r.embeddings, "Embedding directory");
  };
  EvalArgs ev;
  auto* eval_sub = app.add_subcommand("evaluate", "Score a trained model on the test semester");
  add_run_options(eval_sub, ev.run);
  eval_sub->add_option("--out", ev.out, "Metrics JSON (default: <run>/metrics.json)");
  eval_sub->add_flag("--force", ev.force, "Overwrite existing outputs");

  PredictArgs pr;
  auto* predict_sub = app.add_subcommand("predict", "Predict one user's test-semester target");
  add_run_options(predict_sub, pr.run);
  predict_sub->add_option("--user", pr.user, "User id")->required();

  ReportArgs rep;
  auto* report_sub = app.add_subcommand("report", "Tabulate metrics across variants and seeds");
  report_sub->add_option("--metrics", rep.metrics, "Metrics JSON files")->required();
  report_sub->add_option("--metric", rep.metric, "Metric key (default: mse or macro_f1 by task)");
  report_sub->add_option("--out", rep.out, "Output CSV")->required();
  report_sub->add_flag("--force", rep.force, "Overwrite existing outputs");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kOk : kInputError;
  }

  try {
    if (*gen_cmd) return gen_data(gen, out, err);
    if (*graph_cmd) return build_graph(graph, out, err);
    if (*emb_cmd) return embed(emb, out, err);
    if (*train_sub) return train_cmd(tr, out, err);
    if (*eval_sub) return evaluate_cmd(ev, out, err);
    if (*predict_sub) return predict_cmd(pr, out, err);
    if (*report_sub) return report_cmd(rep, out, err);
  } catch (const OverwriteError& e) {
    err << "error: " << e.what() << '\n';
    return kOverwrite;
  } catch (const IncompatibleError& e) {
    err << "error: " << e.what() << '\n';
    return kIncompatible;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  }
  return kInputError;
}

}  // namespace hubs::cli
