#pragma once

// The HUBS network. Samples are processed in batches laid out column-wise:
// a batch of B samples is a [features, B] matrix, and per-day quantities over
// N days are [features, N * B] with column n * B + b.

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "hubs/dataset.hpp"
#include "hubs/embedding.hpp"
#include "hubs/tensor.hpp"

namespace hubs {

enum class ContextMode { Gated, Vanilla };

std::string_view to_string(ContextMode mode);
ContextMode parse_context_mode(std::string_view name);

struct HyperParams {
  TaskKind task = TaskKind::Regression;
  std::vector<BehaviorType> types = {BehaviorType::Library, BehaviorType::Dorm};
  std::vector<std::size_t> hidden_sizes = {12, 6};  // d_m per type
  int n_days = 63;
  std::size_t facets = 4;      // L
  std::size_t facet_dim = 16;  // d
  std::array<std::uint32_t, kDemographicAttributes> demographic_sizes = kDefaultDemographicSizes;
  std::array<std::size_t, kDemographicAttributes> demographic_widths = {6, 6, 6, 6, 6};
  std::size_t context_dim = kContextDim;
  std::size_t trend_hidden = 5;
  std::size_t social_raw = 16;
  std::size_t social_dim = 8;
  std::size_t resblocks = 2;  // Lambda
  std::size_t resblock_width = 100;
  double dropout = 0.4;
  double gamma = 2.0;
  int num_classes = 3;
  ContextMode context_mode = ContextMode::Gated;
  bool use_social = true;
  bool residual = true;

  std::size_t num_types() const { return types.size(); }
  std::size_t profile_width() const;
  std::size_t habit_width() const { return facets * facet_dim; }
  std::size_t decoder_input_width() const;
  std::size_t output_width() const;
};

// Task defaults: Library/Dorm with (12, 6) and d = 16 for regression, the four
// transaction types with 4 units each and d = 8 for classification.
HyperParams default_hyperparams(TaskKind task);

// Copies task, types, N, class count and demographic sizes from a dataset.
HyperParams hyperparams_for(const DatasetManifest& manifest, HyperParams base);

// Throws ContractError when the invariants fail (L >= 1, dropout in [0, 1),
// gamma >= 0, one hidden size per type, ...).
void validate(const HyperParams& hp);

// Every trainable tensor of the model, in a fixed order.
class ModelParams {
 public:
  ModelParams() = default;
  // Glorot-uniform weights, zero biases, PReLU slopes 0.25. Each tensor is
  // drawn from derive_seed(seed, name), so variants that share a parameter
  // name and shape start from the same values.
  ModelParams(const HyperParams& hp, std::uint64_t seed);

  const HyperParams& hyper() const { return hyper_; }
  std::vector<NamedTensor>& all() { return params_; }
  const std::vector<NamedTensor>& all() const { return params_; }
  bool contains(const std::string& name) const { return index_.count(name) > 0; }
  // Throws LookupError for unknown names.
  const Tensor& get(const std::string& name) const;
  Tensor& get(const std::string& name);
  std::size_t scalar_count() const;
  void zero_grad();
  // Independent copy of the values (no shared storage).
  ModelParams clone() const;

 private:
  void add(const std::string& name, Tensor t);

  HyperParams hyper_;
  std::vector<NamedTensor> params_;
  std::map<std::string, std::size_t> index_;
};

// Shape list of a parameter set built from `hp`, as "name [r, c]" lines.
std::vector<std::pair<std::string, Shape>> parameter_shapes(const HyperParams& hp);

// ---- batch inputs -----------------------------------------------------------

struct Batch {
  std::size_t size = 0;
  std::vector<UserId> users;
  std::vector<Tensor> demographics;  // per attribute, one-hot [size_k, B]
  std::vector<Tensor> features;      // per type, [dim_m, N * B]
  Tensor contexts;                   // [context_dim, N * B]
  std::vector<Tensor> history;       // per step, [1, B], right-aligned
  std::vector<Tensor> history_mask;  // per step, [trend_hidden, B]; 1 where the sample's history has begun
  Tensor social;                     // [social_raw, B], zero for users without an embedding
  Tensor targets;                    // regression [1, B] scaled labels; classification one-hot [C, B]
};

// Builds the constant inputs for samples[indices]. When the model uses the
// social channel, users missing from `embeddings` (or all users, when it is
// null) get zero vectors and a message is appended to `warnings`.
Batch make_batch(const std::vector<DailySample>& samples, std::span<const std::size_t> indices, const HyperParams& hp,
                 const NodeEmbeddings* embeddings, std::vector<std::string>* warnings = nullptr);

// ---- encoders ----------------------------------------------------------------

// Concatenated attribute embeddings [W_1 a_1, ..., W_K a_K] -> [profile_width, B].
Tensor embed_profile(const std::vector<Tensor>& demographics, const ModelParams& params);

struct LstmState {
  Tensor h;
  Tensor cell;
};

// One context-aware step for behavior type m. `b` is [dim_m, B] (gated) or
// [dim_m + context_dim, B] (vanilla, contexts already appended); `context`
// is [context_dim, B] and ignored in vanilla mode. An undefined previous
// state is treated as zeros.
LstmState context_lstm_step(const Tensor& b, const LstmState& prev, const Tensor& context, const ModelParams& params,
                            std::size_t m);

struct HabitTrace {
  std::vector<Tensor> attention;  // per facet, [N, B]; each column sums to 1
};

// Per-type context LSTMs, facet projections, fusion and attention pooling.
// Returns [dL, B].
Tensor run_habit_encoder(const std::vector<Tensor>& features, const Tensor& contexts, const Tensor& profile,
                         const ModelParams& params, std::size_t batch_size, HabitTrace* trace = nullptr);

// Plain LSTM over right-aligned target histories. Returns [trend_hidden, B].
Tensor run_trend_encoder(const std::vector<Tensor>& history, const std::vector<Tensor>& mask,
                         const ModelParams& params);

// PReLU(W_e s + b_e). Returns [social_dim, B].
Tensor transform_social(const Tensor& s, const ModelParams& params);

enum class Mode { Train, Eval };

// Dropout masks are drawn from `rng` in train mode (required then).
struct DropoutState {
  Mode mode = Mode::Eval;
  std::mt19937_64* rng = nullptr;
};

Tensor dropout(const Tensor& x, double rate, const DropoutState& state);

// Residual block lambda (1-based): two affine+PReLU+dropout stages plus the skip.
Tensor resblock(const Tensor& x, const ModelParams& params, std::size_t lambda, const DropoutState& state);

struct ForwardTrace {
  HabitTrace habit;
  Tensor decoder_input;  // X^(0)
  std::vector<Tensor> block_outputs;
};

// Regression: tanh output [1, B]. Classification: column softmax [C, B].
Tensor forward(const Batch& batch, const ModelParams& params, const DropoutState& state,
               ForwardTrace* trace = nullptr);

// ---- losses -----------------------------------------------------------------

// Mean of squared differences; shapes must match.
Tensor mse_loss(const Tensor& prediction, const Tensor& target);
// -sum (1 - p)^gamma * y * log(p) with p clamped to [1e-12, 1]. Throws
// ContractError for gamma < 0 and DimensionError for shape mismatch.
Tensor focal_loss(const Tensor& probabilities, const Tensor& onehot, double gamma);

// Loss used for optimisation: MSE, or focal loss averaged over the batch.
Tensor task_loss(const Tensor& prediction, const Batch& batch, const HyperParams& hp);

// ---- checkpoints ------------------------------------------------------------

std::string hyperparams_to_json(const HyperParams& hp);
HyperParams hyperparams_from_json(const std::string& text);

// "HUBSCKPT1", u64 little-endian header length, JSON header
// {"hyperparams": ..., "tensors": [{"name", "shape", "offset"}]}, then the
// float64 little-endian payload in manifest order. `extra` is stored under
// "metadata" in the header.
void save_checkpoint(const std::filesystem::path& path, const ModelParams& params, const std::string& extra_json = "{}");

struct Checkpoint {
  ModelParams params;
  std::string metadata_json;
};

// Rebuilds the parameters described by the header.
Checkpoint load_checkpoint(const std::filesystem::path& path);
// Also requires the stored tensors to match the shapes implied by
// `expected`; throws IncompatibleError listing both shape lists otherwise.
Checkpoint load_checkpoint(const std::filesystem::path& path, const HyperParams& expected);

}  // namespace hubs
