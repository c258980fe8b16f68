#pragma once

// Mini-batch training with early stopping, evaluation metrics and the
// ablation variants.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hubs/adam.hpp"
#include "hubs/dataset.hpp"
#include "hubs/embedding.hpp"
#include "hubs/model.hpp"

namespace hubs {

struct TrainConfig {
  std::size_t batch_size = 32;
  AdamConfig adam;
  int max_epochs = 200;
  int patience = 20;  // epochs without a new best validation loss before stopping
  std::uint64_t seed = 0;
};

void validate(const TrainConfig& config);

struct BatchLoss {
  int epoch = 0;
  std::size_t size = 0;
  double loss = 0.0;  // mean over the batch
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double seconds = 0.0;
};

struct TrainResult {
  ModelParams best;  // parameters after the epoch with the lowest validation loss
  int best_epoch = 0;  // 0: no epoch completed
  double best_val_loss = 0.0;
  std::vector<EpochRecord> history;
  std::vector<BatchLoss> batches;
  bool stopped_early = false;
  bool diverged = false;
  std::string divergence;  // diagnostic when diverged
  std::vector<std::string> warnings;

  double seconds_per_epoch() const;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Parameters are initialised from config.seed. The training order is
// reshuffled every epoch from the same seed. A non-finite loss or gradient
// stops training and keeps the best parameters seen so far (the initial ones
// when no epoch finished). Throws ContractError for an empty train or
// validation split.
TrainResult train(const Dataset& data, const NodeEmbeddings* embeddings, const HyperParams& hp,
                  const TrainConfig& config, const EpochCallback& on_epoch = {});

// Mean task loss (eval mode) over samples, weighting batches by size.
double dataset_loss(const std::vector<DailySample>& samples, const NodeEmbeddings* embeddings,
                    const ModelParams& params, std::size_t batch_size = 256);

// ---- prediction and metrics -------------------------------------------------

struct Prediction {
  UserId user_id = 0;
  double value = 0.0;              // regression: original units; classification: class level 1..C
  std::vector<double> probabilities;  // classification only
};

// Eval-mode predictions. Classification picks the most probable class, ties
// going to the lowest level.
std::vector<Prediction> predict(const std::vector<DailySample>& samples, const NodeEmbeddings* embeddings,
                                const ModelParams& params, const DatasetManifest& manifest,
                                std::vector<std::string>* warnings = nullptr);

struct ClassMetrics {
  int level = 0;  // 1-based class level
  std::size_t support = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct MetricsReport {
  TaskKind task = TaskKind::Regression;
  std::size_t samples = 0;
  double mse = 0.0;         // regression, original units
  double scaled_mse = 0.0;  // regression, [-1, 1] label space
  double macro_f1 = 0.0;    // classification
  std::vector<ClassMetrics> per_class;
  std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]
  double seconds_per_epoch = 0.0;
};

// Per-class precision, recall and F1 from a confusion matrix with true
// classes as rows; 0/0 counts as 0. Throws DimensionError unless square.
MetricsReport classification_metrics(const std::vector<std::vector<std::size_t>>& confusion);
MetricsReport regression_metrics(const std::vector<double>& truth, const std::vector<double>& predicted);

// Throws ContractError for an empty split.
MetricsReport evaluate(const ModelParams& params, const NodeEmbeddings* embeddings,
                       const std::vector<DailySample>& samples, const DatasetManifest& manifest);

// ---- ablation -------------------------------------------------------------------

enum class Variant { Full, VanillaLstm, NoSocial };

std::string_view to_string(Variant variant);
Variant parse_variant(std::string_view name);

// Full: as given. VanillaLstm: contexts appended to the inputs, no context
// gates. NoSocial: the social representation is left out of the decoder input.
HyperParams apply_variant(HyperParams hp, Variant variant);

struct AblationRun {
  Variant variant = Variant::Full;
  TrainResult training;
  MetricsReport metrics;
};

// Trains each variant on the same data with the same seed and evaluates on
// the test split.
std::vector<AblationRun> run_ablation(const Dataset& data, const NodeEmbeddings* embeddings, const HyperParams& base,
                                      const TrainConfig& config, const std::vector<Variant>& variants);

// ---- files ------------------------------------------------------------------------

// Header "epoch,train_loss,val_loss".
void write_loss_csv(const std::filesystem::path& path, const std::vector<EpochRecord>& history);
std::vector<EpochRecord> read_loss_csv(const std::filesystem::path& path);

// `extra` fields (a JSON object) are merged into the top level.
std::string metrics_to_json(const MetricsReport& report, const std::string& extra_json = "{}");
void write_metrics_json(const std::filesystem::path& path, const MetricsReport& report,
                        const std::string& extra_json = "{}");

}  // namespace hubs
