#include "hubs/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "hubs/errors.hpp"
#include "hubs/init.hpp"

namespace hubs {

using nlohmann::json;

void validate(const TrainConfig& config) {
  validate(config.adam);
  if (config.batch_size == 0) throw ContractError("training: batch size must be positive");
  if (config.max_epochs < 0) throw ContractError("training: max epochs must be non-negative");
  if (config.patience < 0) throw ContractError("training: patience must be non-negative");
}

double TrainResult::seconds_per_epoch() const {
  if (history.empty()) return 0.0;
  double total = 0.0;
  for (const auto& e : history) total += e.seconds;
  return total / static_cast<double>(history.size());
}

namespace {

std::vector<std::size_t> iota_indices(std::size_t n) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  return idx;
}

void append_unique(std::vector<std::string>& dst, const std::vector<std::string>& src) {
  for (const auto& w : src) {
    if (std::find(dst.begin(), dst.end(), w) == dst.end()) dst.push_back(w);
  }
}

}  // namespace

double dataset_loss(const std::vector<DailySample>& samples, const NodeEmbeddings* embeddings,
                    const ModelParams& params, std::size_t batch_size) {
  if (samples.empty()) throw ContractError("dataset_loss: no samples");
  const HyperParams& hp = params.hyper();
  const auto order = iota_indices(samples.size());
  double total = 0.0;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t len = std::min(batch_size, order.size() - start);
    const Batch batch = make_batch(samples, std::span(order).subspan(start, len), hp, embeddings);
    total += task_loss(forward(batch, params, {}), batch, hp).item() * static_cast<double>(len);
  }
  return total / static_cast<double>(samples.size());
}

TrainResult train(const Dataset& data, const NodeEmbeddings* embeddings, const HyperParams& hp,
                  const TrainConfig& config, const EpochCallback& on_epoch) {
  validate(config);
  validate(hp);
  if (data.train.empty()) throw ContractError("train: the training split is empty");
  if (data.val.empty()) throw ContractError("train: the validation split is empty");
  if (hp.task != data.manifest.task) throw ContractError("train: model task differs from the dataset task");

  ModelParams params(hp, config.seed);
  TrainResult result;
  result.best = params.clone();
  result.best_val_loss = std::numeric_limits<double>::infinity();

  std::mt19937_64 shuffle_rng(derive_seed(config.seed, "shuffle"));
  std::mt19937_64 dropout_rng(derive_seed(config.seed, "dropout"));
  const DropoutState train_mode{Mode::Train, &dropout_rng};
  AdamState adam;
  std::size_t step = 0;
  std::vector<std::size_t> order = iota_indices(data.train.size());
  int since_best = 0;

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double weighted = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t len = std::min(config.batch_size, order.size() - start);
      std::vector<std::string> warnings;
      const Batch batch = make_batch(data.train, std::span(order).subspan(start, len), hp, embeddings, &warnings);
      append_unique(result.warnings, warnings);
      double value = 0.0;
      try {
        const Tensor loss = task_loss(forward(batch, params, train_mode), batch, hp);
        value = loss.item();
        result.batches.push_back({epoch, len, value});
        if (!std::isfinite(value)) throw NumericError("training loss became " + format_double(value));
        params.zero_grad();
        loss.backward();
        adam_step(params.all(), adam, config.adam, ++step);
      } catch (const NumericError& e) {
        result.diverged = true;
        result.divergence = std::string(e.what()) + " in epoch " + std::to_string(epoch);
        return result;
      }
      weighted += value * static_cast<double>(len);
    }
    params.zero_grad();

    EpochRecord record;
    record.epoch = epoch;
    record.train_loss = weighted / static_cast<double>(order.size());
    try {
      record.val_loss = dataset_loss(data.val, embeddings, params);
    } catch (const NumericError&) {
      record.val_loss = std::numeric_limits<double>::quiet_NaN();
    }
    record.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    result.history.push_back(record);
    if (on_epoch) on_epoch(record);
    if (!std::isfinite(record.val_loss)) {
      result.diverged = true;
      result.divergence = "validation loss became " + format_double(record.val_loss) + " in epoch " +
                          std::to_string(epoch);
      return result;
    }
    if (record.val_loss < result.best_val_loss) {
      result.best_val_loss = record.val_loss;
      result.best_epoch = epoch;
      result.best = params.clone();
      since_best = 0;
    } else if (++since_best > config.patience) {
      result.stopped_early = true;
      break;
    }
  }
  if (result.best_epoch == 0) result.best_val_loss = 0.0;
  return result;
}

// ---- prediction and metrics -----------------------------------------------------------

std::vector<Prediction> predict(const std::vector<DailySample>& samples, const NodeEmbeddings* embeddings,
                                const ModelParams& params, const DatasetManifest& manifest,
                                std::vector<std::string>* warnings) {
  const HyperParams& hp = params.hyper();
  if (hp.task != manifest.task) throw IncompatibleError("model task differs from the dataset task");
  std::vector<Prediction> out;
  const auto order = iota_indices(samples.size());
  constexpr std::size_t kChunk = 256;
  for (std::size_t start = 0; start < order.size(); start += kChunk) {
    const std::size_t len = std::min(kChunk, order.size() - start);
    std::vector<std::string> local;
    const Batch batch = make_batch(samples, std::span(order).subspan(start, len), hp, embeddings, &local);
    if (warnings != nullptr) append_unique(*warnings, local);
    const Tensor y = forward(batch, params, {});
    for (std::size_t b = 0; b < len; ++b) {
      Prediction p;
      p.user_id = batch.users[b];
      if (hp.task == TaskKind::Regression) {
        p.value = manifest.rescale_label(y.at(0, b));
      } else {
        std::size_t best = 0;
        for (std::size_t c = 0; c < y.rows(); ++c) {
          p.probabilities.push_back(y.at(c, b));
          if (y.at(c, b) > y.at(best, b)) best = c;
        }
        p.value = static_cast<double>(best + 1);
      }
      out.push_back(std::move(p));
    }
  }
  return out;
}

MetricsReport classification_metrics(const std::vector<std::vector<std::size_t>>& confusion) {
  const std::size_t c = confusion.size();
  for (const auto& row : confusion) {
    if (row.size() != c) throw DimensionError("confusion matrix must be square");
  }
  MetricsReport r;
  r.task = TaskKind::Classification;
  r.confusion = confusion;
  double f1_sum = 0.0;
  for (std::size_t k = 0; k < c; ++k) {
    std::size_t tp = confusion[k][k], predicted = 0, actual = 0;
    for (std::size_t j = 0; j < c; ++j) {
      predicted += confusion[j][k];
      actual += confusion[k][j];
    }
    r.samples += actual;
    ClassMetrics m;
    m.level = static_cast<int>(k) + 1;
    m.support = actual;
    m.precision = predicted == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(predicted);
    m.recall = actual == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(actual);
    m.f1 = m.precision + m.recall == 0.0 ? 0.0 : 2.0 * m.precision * m.recall / (m.precision + m.recall);
    f1_sum += m.f1;
    r.per_class.push_back(m);
  }
  r.macro_f1 = c == 0 ? 0.0 : f1_sum / static_cast<double>(c);
  return r;
}

MetricsReport regression_metrics(const std::vector<double>& truth, const std::vector<double>& predicted) {
  if (truth.size() != predicted.size()) throw DimensionError("regression metrics: length mismatch");
  if (truth.empty()) throw ContractError("regression metrics: no samples");
  MetricsReport r;
  r.task = TaskKind::Regression;
  r.samples = truth.size();
  double total = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) total += (truth[i] - predicted[i]) * (truth[i] - predicted[i]);
  r.mse = total / static_cast<double>(truth.size());
  return r;
}

MetricsReport evaluate(const ModelParams& params, const NodeEmbeddings* embeddings,
                       const std::vector<DailySample>& samples, const DatasetManifest& manifest) {
  if (samples.empty()) throw ContractError("evaluate: the split is empty");
  const auto predictions = predict(samples, embeddings, params, manifest);
  if (manifest.task == TaskKind::Regression) {
    std::vector<double> truth, pred;
    double scaled = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      truth.push_back(samples[i].raw_label);
      pred.push_back(predictions[i].value);
      const double d = manifest.scale_label(predictions[i].value) - samples[i].label;
      scaled += d * d;
    }
    MetricsReport r = regression_metrics(truth, pred);
    r.scaled_mse = scaled / static_cast<double>(samples.size());
    return r;
  }
  const auto c = static_cast<std::size_t>(manifest.num_classes);
  std::vector<std::vector<std::size_t>> confusion(c, std::vector<std::size_t>(c, 0));
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const std::size_t truth = samples[i].class_index();
    if (truth >= c) throw ContractError("evaluate: class label out of range");
    ++confusion[truth][static_cast<std::size_t>(predictions[i].value) - 1];
  }
  return classification_metrics(confusion);
}

// ---- ablation -------------------------------------------------------------------------

std::string_view to_string(Variant variant) {
  switch (variant) {
    case Variant::Full:
      return "full";
    case Variant::VanillaLstm:
      return "vanilla_lstm";
    case Variant::NoSocial:
      return "no_social";
  }
  return "full";
}

Variant parse_variant(std::string_view name) {
  if (name == "full") return Variant::Full;
  if (name == "vanilla_lstm") return Variant::VanillaLstm;
  if (name == "no_social") return Variant::NoSocial;
  throw ContractError("unknown variant '" + std::string(name) + "' (expected full, vanilla_lstm or no_social)");
}

HyperParams apply_variant(HyperParams hp, Variant variant) {
  if (variant == Variant::VanillaLstm) hp.context_mode = ContextMode::Vanilla;
  if (variant == Variant::NoSocial) hp.use_social = false;
  return hp;
}

std::vector<AblationRun> run_ablation(const Dataset& data, const NodeEmbeddings* embeddings, const HyperParams& base,
                                      const TrainConfig& config, const std::vector<Variant>& variants) {
  std::vector<AblationRun> runs;
  for (Variant v : variants) {
    AblationRun run;
    run.variant = v;
    const HyperParams hp = apply_variant(base, v);
    const NodeEmbeddings* emb = hp.use_social ? embeddings : nullptr;
    run.training = train(data, emb, hp, config);
    run.metrics = evaluate(run.training.best, emb, data.test, data.manifest);
    run.metrics.seconds_per_epoch = run.training.seconds_per_epoch();
    runs.push_back(std::move(run));
  }
  return runs;
}

// ---- files -------------------------------------------------------------------------------

void write_loss_csv(const std::filesystem::path& path, const std::vector<EpochRecord>& history) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "epoch,train_loss,val_loss\n";
  for (const auto& e : history) {
    out << e.epoch << ',' << format_double(e.train_loss) << ',' << format_double(e.val_loss) << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

std::vector<EpochRecord> read_loss_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "epoch,train_loss,val_loss") {
    throw IoError(path.string() + ": expected header epoch,train_loss,val_loss");
  }
  std::vector<EpochRecord> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string a, b, c;
    EpochRecord e;
    try {
      if (!std::getline(row, a, ',') || !std::getline(row, b, ',') || !std::getline(row, c)) throw std::exception();
      e.epoch = std::stoi(a);
      e.train_loss = std::stod(b);
      e.val_loss = std::stod(c);
    } catch (const std::exception&) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": malformed row");
    }
    out.push_back(e);
  }
  return out;
}

std::string metrics_to_json(const MetricsReport& r, const std::string& extra_json) {
  json j;
  j["task"] = std::string(to_string(r.task));
  j["samples"] = r.samples;
  j["seconds_per_epoch"] = r.seconds_per_epoch;
  if (r.task == TaskKind::Regression) {
    j["mse"] = r.mse;
    j["scaled_mse"] = r.scaled_mse;
  } else {
    j["macro_f1"] = r.macro_f1;
    json classes = json::array();
    for (const auto& c : r.per_class) {
      classes.push_back(
          {{"level", c.level}, {"support", c.support}, {"precision", c.precision}, {"recall", c.recall}, {"f1", c.f1}});
    }
    j["per_class"] = classes;
    j["confusion"] = r.confusion;
  }
  const json extra = json::parse(extra_json);
  if (!extra.is_object()) throw ContractError("metrics: extra fields must be a JSON object");
  for (const auto& [k, v] : extra.items()) j[k] = v;
  return j.dump(2);
}

void write_metrics_json(const std::filesystem::path& path, const MetricsReport& report, const std::string& extra_json) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << metrics_to_json(report, extra_json) << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace hubs
