#include "hubs/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "binary_io.hpp"
#include "hubs/errors.hpp"
#include "hubs/init.hpp"

namespace hubs {

using nlohmann::json;

namespace {

constexpr std::array<const char*, 4> kGates = {"i", "f", "o", "g"};  // input, forget, output, candidate

std::string type_prefix(const HyperParams& hp, std::size_t m) {
  return "habit." + std::string(to_string(hp.types[m])) + ".";
}

enum class Kind { Weight, Bias, Slope };

struct ParamSpec {
  std::string name;
  Shape shape;
  Kind kind;
};

std::vector<ParamSpec> build_specs(const HyperParams& hp) {
  std::vector<ParamSpec> out;
  const auto weight = [&](std::string name, std::size_t rows, std::size_t cols) {
    out.push_back({std::move(name), {rows, cols}, Kind::Weight});
  };
  const auto bias = [&](std::string name, std::size_t n) { out.push_back({std::move(name), {n}, Kind::Bias}); };
  const auto slope = [&](std::string name) { out.push_back({std::move(name), {1}, Kind::Slope}); };

  for (std::size_t k = 0; k < kDemographicAttributes; ++k) {
    weight("profile.W" + std::to_string(k + 1), hp.demographic_widths[k], hp.demographic_sizes[k]);
  }
  const bool gated = hp.context_mode == ContextMode::Gated;
  for (std::size_t m = 0; m < hp.num_types(); ++m) {
    const std::string p = type_prefix(hp, m);
    const std::size_t h = hp.hidden_sizes[m];
    const std::size_t in = feature_dim(hp.types[m]) + (gated ? 0 : hp.context_dim);
    for (const char* g : kGates) {
      weight(p + "W_" + g + "B", h, in);
      weight(p + "W_" + g + "h", h, h);
      if (gated && std::string(g) != "g") weight(p + "W_" + g + "c", h, hp.context_dim);
      bias(p + "b_" + g, h);
    }
    for (std::size_t l = 0; l < hp.facets; ++l) weight(p + "P" + std::to_string(l + 1), hp.facet_dim, h);
  }
  for (std::size_t l = 0; l < hp.facets; ++l) {
    const std::string s = std::to_string(l + 1);
    weight("attn.W_a0." + s, 1, hp.facet_dim);
    weight("attn.W_a1." + s, hp.facet_dim, hp.profile_width());
    weight("attn.W_a2." + s, hp.facet_dim, hp.facet_dim);
  }
  bias("attn.b_a", hp.facet_dim);
  weight("attn.W_a3", hp.habit_width(), hp.habit_width());
  for (const char* g : kGates) {
    weight(std::string("trend.W_") + g + "y", hp.trend_hidden, 1);
    weight(std::string("trend.W_") + g + "h", hp.trend_hidden, hp.trend_hidden);
    bias(std::string("trend.b_") + g, hp.trend_hidden);
  }
  if (hp.use_social) {
    weight("social.W_e", hp.social_dim, hp.social_raw);
    bias("social.b_e", hp.social_dim);
    slope("social.slope");
  }
  std::size_t in = hp.decoder_input_width();
  for (std::size_t lam = 1; lam <= hp.resblocks; ++lam) {
    const std::string p = "res" + std::to_string(lam) + ".";
    weight(p + "fc1.W", hp.resblock_width, in);
    bias(p + "fc1.b", hp.resblock_width);
    slope(p + "fc1.slope");
    weight(p + "fc2.W", hp.resblock_width, hp.resblock_width);
    bias(p + "fc2.b", hp.resblock_width);
    slope(p + "fc2.slope");
    if (hp.residual && in != hp.resblock_width) weight(p + "W_p", hp.resblock_width, in);
    in = hp.resblock_width;
  }
  weight("out.W_o", hp.output_width(), in);
  bias("out.b_o", hp.output_width());
  return out;
}

}  // namespace

std::string_view to_string(ContextMode mode) { return mode == ContextMode::Gated ? "gated" : "vanilla"; }

ContextMode parse_context_mode(std::string_view name) {
  if (name == "gated") return ContextMode::Gated;
  if (name == "vanilla") return ContextMode::Vanilla;
  throw ContractError("unknown context mode '" + std::string(name) + "' (expected gated or vanilla)");
}

std::size_t HyperParams::profile_width() const {
  return std::accumulate(demographic_widths.begin(), demographic_widths.end(), std::size_t{0});
}

std::size_t HyperParams::decoder_input_width() const {
  return profile_width() + habit_width() + trend_hidden + (use_social ? social_dim : 0);
}

std::size_t HyperParams::output_width() const {
  return task == TaskKind::Regression ? 1 : static_cast<std::size_t>(num_classes);
}

HyperParams default_hyperparams(TaskKind task) {
  HyperParams hp;
  hp.task = task;
  hp.types = default_behavior_types(task);
  if (task == TaskKind::Regression) {
    hp.hidden_sizes = {12, 6};
    hp.facet_dim = 16;
  } else {
    hp.hidden_sizes = {4, 4, 4, 4};
    hp.facet_dim = 8;
  }
  return hp;
}

HyperParams hyperparams_for(const DatasetManifest& manifest, HyperParams base) {
  if (base.task != manifest.task || base.types != manifest.types) {
    const HyperParams defaults = default_hyperparams(manifest.task);
    if (base.types != manifest.types) {
      base.hidden_sizes = manifest.types == defaults.types ? defaults.hidden_sizes
                                                           : std::vector<std::size_t>(manifest.types.size(), 4);
    }
    if (base.task != manifest.task) base.facet_dim = defaults.facet_dim;
  }
  base.task = manifest.task;
  base.types = manifest.types;
  base.n_days = manifest.n_days;
  base.demographic_sizes = manifest.demographic_sizes;
  if (manifest.task == TaskKind::Classification) base.num_classes = manifest.num_classes;
  return base;
}

void validate(const HyperParams& hp) {
  const auto fail = [](const std::string& msg) { throw ContractError("hyperparameters: " + msg); };
  if (hp.types.empty()) fail("at least one behavior type is required");
  if (hp.hidden_sizes.size() != hp.types.size()) fail("need one hidden size per behavior type");
  for (auto h : hp.hidden_sizes) {
    if (h == 0) fail("hidden sizes must be positive");
  }
  if (hp.n_days <= 0) fail("N must be positive");
  if (hp.facets < 1) fail("facet count L must be at least 1");
  if (hp.facet_dim == 0) fail("facet dimension d must be positive");
  for (std::size_t k = 0; k < kDemographicAttributes; ++k) {
    if (hp.demographic_sizes[k] == 0 || hp.demographic_widths[k] == 0) fail("demographic sizes must be positive");
  }
  if (hp.context_dim == 0 || hp.trend_hidden == 0 || hp.social_raw == 0 || hp.social_dim == 0) {
    fail("layer widths must be positive");
  }
  if (hp.resblock_width == 0) fail("ResBlock width must be positive");
  if (!(hp.dropout >= 0.0 && hp.dropout < 1.0)) fail("dropout must lie in [0, 1)");
  if (!(hp.gamma >= 0.0)) fail("gamma must be non-negative");
  if (hp.task == TaskKind::Classification && hp.num_classes < 2) fail("classification needs at least 2 classes");
}

std::vector<std::pair<std::string, Shape>> parameter_shapes(const HyperParams& hp) {
  std::vector<std::pair<std::string, Shape>> out;
  for (auto& s : build_specs(hp)) out.emplace_back(std::move(s.name), std::move(s.shape));
  return out;
}

// ---- ModelParams ---------------------------------------------------------------

ModelParams::ModelParams(const HyperParams& hp, std::uint64_t seed) : hyper_(hp) {
  validate(hp);
  for (const auto& spec : build_specs(hp)) {
    switch (spec.kind) {
      case Kind::Weight:
        add(spec.name, glorot_uniform(spec.shape, spec.shape[1], spec.shape[0], seed, spec.name));
        break;
      case Kind::Bias:
        add(spec.name, Tensor::zeros(spec.shape, true));
        break;
      case Kind::Slope:
        add(spec.name, Tensor::filled(spec.shape, 0.25, true));
        break;
    }
  }
}

void ModelParams::add(const std::string& name, Tensor t) {
  index_[name] = params_.size();
  params_.push_back({name, std::move(t)});
}

const Tensor& ModelParams::get(const std::string& name) const {
  const auto it = index_.find(name);
  if (it == index_.end()) throw LookupError("model has no parameter '" + name + "'");
  return params_[it->second].tensor;
}

Tensor& ModelParams::get(const std::string& name) {
  const auto it = index_.find(name);
  if (it == index_.end()) throw LookupError("model has no parameter '" + name + "'");
  return params_[it->second].tensor;
}

std::size_t ModelParams::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.tensor.size();
  return n;
}

void ModelParams::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

ModelParams ModelParams::clone() const {
  ModelParams copy;
  copy.hyper_ = hyper_;
  for (const auto& p : params_) {
    const auto d = p.tensor.data();
    copy.add(p.name, Tensor::from_values(p.tensor.shape(), std::vector<double>(d.begin(), d.end()), true));
  }
  return copy;
}

// ---- batches --------------------------------------------------------------------

Batch make_batch(const std::vector<DailySample>& samples, std::span<const std::size_t> indices, const HyperParams& hp,
                 const NodeEmbeddings* embeddings, std::vector<std::string>* warnings) {
  const std::size_t nb = indices.size();
  if (nb == 0) throw ContractError("make_batch: empty batch");
  const std::size_t m_count = hp.num_types();
  const DailySample& first = samples.at(indices[0]);
  if (first.features.size() != m_count) {
    throw DimensionError("make_batch: sample has " + std::to_string(first.features.size()) +
                         " behavior sequences, model expects " + std::to_string(m_count));
  }
  const std::size_t n_days = first.contexts.size() / hp.context_dim;
  if (n_days == 0) throw ContractError("make_batch: samples carry no days (N = 0)");

  Batch batch;
  batch.size = nb;
  std::vector<std::vector<double>> demo(kDemographicAttributes);
  for (std::size_t k = 0; k < kDemographicAttributes; ++k) demo[k].assign(hp.demographic_sizes[k] * nb, 0.0);
  std::vector<std::vector<double>> feats(m_count);
  for (std::size_t m = 0; m < m_count; ++m) feats[m].assign(feature_dim(hp.types[m]) * n_days * nb, 0.0);
  std::vector<double> ctx(hp.context_dim * n_days * nb, 0.0);
  std::size_t t_max = 0;
  for (auto i : indices) t_max = std::max(t_max, samples.at(i).target_history.size());

  for (std::size_t b = 0; b < nb; ++b) {
    const DailySample& s = samples.at(indices[b]);
    batch.users.push_back(s.user_id);
    for (std::size_t k = 0; k < kDemographicAttributes; ++k) {
      const auto c = s.demographics.categories[k];
      if (c >= hp.demographic_sizes[k]) {
        throw DimensionError("make_batch: user " + std::to_string(s.user_id) + " has " +
                             std::string(kDemographicNames[k]) + " category " + std::to_string(c) +
                             " but the model knows " + std::to_string(hp.demographic_sizes[k]));
      }
      demo[k][c * nb + b] = 1.0;
    }
    if (s.features.size() != m_count || s.contexts.size() != hp.context_dim * n_days) {
      throw DimensionError("make_batch: samples disagree on behavior types or N");
    }
    for (std::size_t m = 0; m < m_count; ++m) {
      const std::size_t dim = feature_dim(hp.types[m]);
      if (s.features[m].size() != dim * n_days) {
        throw DimensionError("make_batch: " + std::string(to_string(hp.types[m])) + " sequence of user " +
                             std::to_string(s.user_id) + " has " + std::to_string(s.features[m].size()) +
                             " values, expected " + std::to_string(dim * n_days));
      }
      for (std::size_t n = 0; n < n_days; ++n) {
        for (std::size_t j = 0; j < dim; ++j) feats[m][j * n_days * nb + n * nb + b] = s.features[m][n * dim + j];
      }
    }
    for (std::size_t n = 0; n < n_days; ++n) {
      for (std::size_t j = 0; j < hp.context_dim; ++j) {
        ctx[j * n_days * nb + n * nb + b] = s.contexts[n * hp.context_dim + j];
      }
    }
    if (s.target_history.empty()) {
      throw ContractError("make_batch: user " + std::to_string(s.user_id) + " has an empty target history");
    }
  }
  for (std::size_t k = 0; k < kDemographicAttributes; ++k) {
    batch.demographics.push_back(Tensor::from_values({hp.demographic_sizes[k], nb}, std::move(demo[k])));
  }
  for (std::size_t m = 0; m < m_count; ++m) {
    batch.features.push_back(Tensor::from_values({feature_dim(hp.types[m]), n_days * nb}, std::move(feats[m])));
  }
  batch.contexts = Tensor::from_values({hp.context_dim, n_days * nb}, std::move(ctx));

  for (std::size_t t = 0; t < t_max; ++t) {
    std::vector<double> y(nb, 0.0);
    std::vector<double> mask(hp.trend_hidden * nb, 0.0);
    bool all = true;
    for (std::size_t b = 0; b < nb; ++b) {
      const auto& hist = samples[indices[b]].target_history;
      const std::size_t start = t_max - hist.size();
      if (t >= start) {
        y[b] = hist[t - start];
        for (std::size_t r = 0; r < hp.trend_hidden; ++r) mask[r * nb + b] = 1.0;
      } else {
        all = false;
      }
    }
    batch.history.push_back(Tensor::from_values({1, nb}, std::move(y)));
    batch.history_mask.push_back(all ? Tensor() : Tensor::from_values({hp.trend_hidden, nb}, std::move(mask)));
  }

  if (hp.use_social) {
    std::vector<double> social(hp.social_raw * nb, 0.0);
    std::size_t missing = 0;
    for (std::size_t b = 0; b < nb; ++b) {
      const UserId u = batch.users[b];
      const auto it = embeddings ? embeddings->table.find(u) : decltype(embeddings->table.end()){};
      if (embeddings == nullptr || it == embeddings->table.end()) {
        ++missing;
        continue;
      }
      if (it->second.size() != hp.social_raw) {
        throw DimensionError("make_batch: embedding width " + std::to_string(it->second.size()) +
                             " differs from the model's social input width " + std::to_string(hp.social_raw));
      }
      for (std::size_t r = 0; r < hp.social_raw; ++r) social[r * nb + b] = it->second[r];
    }
    if (missing > 0 && warnings != nullptr) {
      warnings->push_back(std::to_string(missing) + " user(s) without a social embedding use the zero vector");
    }
    batch.social = Tensor::from_values({hp.social_raw, nb}, std::move(social));
  }

  const std::size_t out_w = hp.output_width();
  std::vector<double> target(out_w * nb, 0.0);
  for (std::size_t b = 0; b < nb; ++b) {
    const DailySample& s = samples[indices[b]];
    if (hp.task == TaskKind::Regression) {
      target[b] = s.label;
    } else {
      const std::size_t c = s.class_index();
      if (s.label < 1.0 || c >= out_w) throw ContractError("make_batch: class label out of range");
      target[c * nb + b] = 1.0;
    }
  }
  batch.targets = Tensor::from_values({out_w, nb}, std::move(target));
  return batch;
}

// ---- encoders -----------------------------------------------------------------

Tensor embed_profile(const std::vector<Tensor>& demographics, const ModelParams& params) {
  if (demographics.size() != kDemographicAttributes) {
    throw DimensionError("embed_profile: expected " + std::to_string(kDemographicAttributes) + " attributes, got " +
                         std::to_string(demographics.size()));
  }
  std::vector<Tensor> parts;
  for (std::size_t k = 0; k < kDemographicAttributes; ++k) {
    parts.push_back(matmul(params.get("profile.W" + std::to_string(k + 1)), demographics[k]));
  }
  return concat(parts);
}

namespace {

struct FusedLstm {
  Tensor input;    // [4h, in]
  Tensor hidden;   // [4h, h]
  Tensor context;  // [4h, ctx], candidate rows zero; undefined when not gated
  Tensor bias;     // [4h]
  std::size_t h = 0;
};

FusedLstm fuse_gates(const ModelParams& params, const std::string& prefix, const char* input_suffix, std::size_t h,
                     std::size_t context_dim, bool gated) {
  FusedLstm f;
  f.h = h;
  std::vector<Tensor> in, hid, ctx, bias;
  for (const char* g : kGates) {
    in.push_back(params.get(prefix + "W_" + g + input_suffix));
    hid.push_back(params.get(prefix + "W_" + g + "h"));
    bias.push_back(params.get(prefix + "b_" + g));
    if (gated) {
      ctx.push_back(std::string(g) == "g" ? Tensor::zeros({h, context_dim}) : params.get(prefix + "W_" + g + "c"));
    }
  }
  f.input = concat(in);
  f.hidden = concat(hid);
  f.bias = concat(bias);
  if (gated) f.context = concat(ctx);
  return f;
}

// Gate nonlinearities and state update from the full pre-activation z [4h, B].
LstmState lstm_update(const Tensor& z, const LstmState& prev, std::size_t h) {
  const Tensor i = sigmoid(slice_rows(z, 0, h));
  const Tensor f = sigmoid(slice_rows(z, h, h));
  const Tensor o = sigmoid(slice_rows(z, 2 * h, h));
  const Tensor g = tanh_op(slice_rows(z, 3 * h, h));
  Tensor cell = hadamard(i, g);
  if (prev.cell.defined()) cell = add(hadamard(f, prev.cell), cell);
  return {hadamard(o, tanh_op(cell)), cell};
}

Tensor with_recurrence(Tensor z, const FusedLstm& f, const LstmState& prev) {
  if (prev.h.defined()) z = add(z, matmul(f.hidden, prev.h));
  return z;
}

}  // namespace

LstmState context_lstm_step(const Tensor& b, const LstmState& prev, const Tensor& context, const ModelParams& params,
                            std::size_t m) {
  const HyperParams& hp = params.hyper();
  if (m >= hp.num_types()) throw ContractError("context_lstm_step: behavior index out of range");
  const bool gated = hp.context_mode == ContextMode::Gated;
  const FusedLstm f = fuse_gates(params, type_prefix(hp, m), "B", hp.hidden_sizes[m], hp.context_dim, gated);
  Tensor z = matmul(f.input, b);
  if (gated) z = add(z, matmul(f.context, context));
  z = add_bias(with_recurrence(z, f, prev), f.bias);
  return lstm_update(z, prev, f.h);
}

Tensor run_habit_encoder(const std::vector<Tensor>& features, const Tensor& contexts, const Tensor& profile,
                         const ModelParams& params, std::size_t batch_size, HabitTrace* trace) {
  const HyperParams& hp = params.hyper();
  if (batch_size == 0 || contexts.cols() % batch_size != 0) {
    throw ContractError("run_habit_encoder: context columns are not a multiple of the batch size");
  }
  const std::size_t n_days = contexts.cols() / batch_size;
  if (n_days == 0) throw ContractError("run_habit_encoder: N must be positive");
  if (features.size() != hp.num_types()) {
    throw DimensionError("run_habit_encoder: expected " + std::to_string(hp.num_types()) + " behavior sequences, got " +
                         std::to_string(features.size()));
  }
  const bool gated = hp.context_mode == ContextMode::Gated;
  const std::size_t nb = batch_size;

  std::vector<Tensor> projected;
  for (std::size_t m = 0; m < hp.num_types(); ++m) {
    if (features[m].cols() != n_days * nb) throw DimensionError("run_habit_encoder: feature and context lengths differ");
    const std::string prefix = type_prefix(hp, m);
    const FusedLstm f = fuse_gates(params, prefix, "B", hp.hidden_sizes[m], hp.context_dim, gated);
    // Input and context terms for every day at once.
    Tensor pre = gated ? add(matmul(f.input, features[m]), matmul(f.context, contexts))
                       : matmul(f.input, concat({features[m], contexts}));
    pre = add_bias(pre, f.bias);
    LstmState state;
    std::vector<Tensor> hs;
    hs.reserve(n_days);
    for (std::size_t n = 0; n < n_days; ++n) {
      state = lstm_update(with_recurrence(slice_cols(pre, n * nb, nb), f, state), state, f.h);
      hs.push_back(state.h);
    }
    std::vector<Tensor> proj;
    for (std::size_t l = 0; l < hp.facets; ++l) proj.push_back(params.get(prefix + "P" + std::to_string(l + 1)));
    projected.push_back(matmul(concat(proj), concat_cols(hs)));  // [dL, N*B]
  }
  const Tensor hbar = projected.size() == 1 ? projected[0] : sum_over(projected);

  const std::size_t d = hp.facet_dim;
  const Tensor& b_a = params.get("attn.b_a");
  std::vector<Tensor> facets;
  for (std::size_t l = 0; l < hp.facets; ++l) {
    const std::string s = std::to_string(l + 1);
    const Tensor hl = slice_rows(hbar, l * d, d);
    const Tensor from_profile = tile_cols(matmul(params.get("attn.W_a1." + s), profile), n_days);
    const Tensor e = tanh_op(add_bias(add(from_profile, matmul(params.get("attn.W_a2." + s), hl)), b_a));
    const Tensor scores = reshape(matmul(params.get("attn.W_a0." + s), e), {n_days, nb});
    const Tensor alpha = softmax(scores);
    if (trace != nullptr) trace->attention.push_back(alpha);
    facets.push_back(weighted_block_sum(hl, alpha));
  }
  return matmul(params.get("attn.W_a3"), concat(facets));
}

Tensor run_trend_encoder(const std::vector<Tensor>& history, const std::vector<Tensor>& mask,
                         const ModelParams& params) {
  if (history.empty()) throw ContractError("run_trend_encoder: empty target history");
  if (!mask.empty() && mask.size() != history.size()) throw DimensionError("run_trend_encoder: mask length differs");
  const HyperParams& hp = params.hyper();
  const FusedLstm f = fuse_gates(params, "trend.", "y", hp.trend_hidden, 0, false);
  LstmState state;
  for (std::size_t t = 0; t < history.size(); ++t) {
    const Tensor z = add_bias(with_recurrence(matmul(f.input, history[t]), f, state), f.bias);
    state = lstm_update(z, state, f.h);
    if (!mask.empty() && mask[t].defined()) {
      state.h = hadamard(state.h, mask[t]);
      state.cell = hadamard(state.cell, mask[t]);
    }
  }
  return state.h;
}

Tensor transform_social(const Tensor& s, const ModelParams& params) {
  return prelu(add_bias(matmul(params.get("social.W_e"), s), params.get("social.b_e")), params.get("social.slope"));
}

Tensor dropout(const Tensor& x, double rate, const DropoutState& state) {
  if (state.mode == Mode::Eval || rate == 0.0) return x;
  if (state.rng == nullptr) throw ContractError("dropout: train mode needs a random generator");
  std::bernoulli_distribution keep(1.0 - rate);
  const double scale_kept = 1.0 / (1.0 - rate);
  std::vector<double> mask(x.size());
  for (auto& v : mask) v = keep(*state.rng) ? scale_kept : 0.0;
  return hadamard(x, Tensor::from_values(x.shape(), std::move(mask)));
}

Tensor resblock(const Tensor& x, const ModelParams& params, std::size_t lambda, const DropoutState& state) {
  const HyperParams& hp = params.hyper();
  const std::string p = "res" + std::to_string(lambda) + ".";
  const auto stage = [&](const Tensor& in, const std::string& fc) {
    const Tensor z = add_bias(matmul(params.get(p + fc + ".W"), in), params.get(p + fc + ".b"));
    return dropout(prelu(z, params.get(p + fc + ".slope")), hp.dropout, state);
  };
  const Tensor residual = stage(stage(x, "fc1"), "fc2");
  if (!hp.residual) return residual;
  const Tensor skip = params.contains(p + "W_p") ? matmul(params.get(p + "W_p"), x) : x;
  return add(skip, residual);
}

Tensor forward(const Batch& batch, const ModelParams& params, const DropoutState& state, ForwardTrace* trace) {
  const HyperParams& hp = params.hyper();
  const Tensor profile = embed_profile(batch.demographics, params);
  const Tensor habit = run_habit_encoder(batch.features, batch.contexts, profile, params, batch.size,
                                         trace ? &trace->habit : nullptr);
  const Tensor trend = run_trend_encoder(batch.history, batch.history_mask, params);
  std::vector<Tensor> parts = {profile, habit, trend};
  if (hp.use_social) {
    if (!batch.social.defined()) throw ContractError("forward: batch was built without social inputs");
    parts.push_back(transform_social(batch.social, params));
  }
  Tensor x = concat(parts);
  if (trace != nullptr) trace->decoder_input = x;
  for (std::size_t lam = 1; lam <= hp.resblocks; ++lam) {
    x = resblock(x, params, lam, state);
    if (trace != nullptr) trace->block_outputs.push_back(x);
  }
  const Tensor z = add_bias(matmul(params.get("out.W_o"), dropout(x, hp.dropout, state)), params.get("out.b_o"));
  return hp.task == TaskKind::Regression ? tanh_op(z) : softmax(z);
}

// ---- losses --------------------------------------------------------------------

Tensor mse_loss(const Tensor& prediction, const Tensor& target) {
  if (!prediction.defined() || !target.defined() || prediction.size() == 0) {
    throw ContractError("mse_loss: empty batch");
  }
  if (prediction.size() != target.size()) {
    throw DimensionError("mse_loss: " + shape_to_string(prediction.shape()) + " vs " +
                         shape_to_string(target.shape()));
  }
  const Tensor t = target.shape() == prediction.shape() ? target : reshape(target, prediction.shape());
  const Tensor diff = sub(prediction, t);
  return scale(sum(hadamard(diff, diff)), 1.0 / static_cast<double>(prediction.size()));
}

Tensor focal_loss(const Tensor& probabilities, const Tensor& onehot, double gamma) {
  if (!(gamma >= 0.0)) throw ContractError("focal_loss: gamma must be non-negative");
  if (probabilities.shape() != onehot.shape()) {
    throw DimensionError("focal_loss: " + shape_to_string(probabilities.shape()) + " vs " +
                         shape_to_string(onehot.shape()));
  }
  constexpr double kFloor = 1e-12;
  const auto p = probabilities.data();
  const auto y = onehot.data();
  double total = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (y[k] == 0.0) continue;
    const double pc = std::clamp(p[k], kFloor, 1.0);
    total -= std::pow(1.0 - pc, gamma) * y[k] * std::log(pc);
  }
  return make_op({1}, {total}, {probabilities}, [probabilities, onehot, gamma](const GradContext& ctx) {
    if (ctx.input_grads[0].empty()) return;
    const auto pv = probabilities.data();
    const auto yv = onehot.data();
    const double g = ctx.output_grad[0];
    for (std::size_t k = 0; k < pv.size(); ++k) {
      if (yv[k] == 0.0 || pv[k] < kFloor || pv[k] > 1.0) continue;  // clamped: flat
      const double q = 1.0 - pv[k];
      const double log_p = std::log(pv[k]);
      double d = -std::pow(q, gamma) / pv[k];
      if (gamma > 0.0 && q > 0.0) d += gamma * std::pow(q, gamma - 1.0) * log_p;
      ctx.input_grads[0][k] += g * yv[k] * d;
    }
  });
}

Tensor task_loss(const Tensor& prediction, const Batch& batch, const HyperParams& hp) {
  if (hp.task == TaskKind::Regression) return mse_loss(prediction, batch.targets);
  return scale(focal_loss(prediction, batch.targets, hp.gamma), 1.0 / static_cast<double>(batch.size));
}

// ---- checkpoints -----------------------------------------------------------------

namespace {

json hyper_json(const HyperParams& hp) {
  json j;
  j["task"] = std::string(to_string(hp.task));
  json types = json::array();
  for (auto t : hp.types) types.push_back(std::string(to_string(t)));
  j["behavior_types"] = types;
  j["hidden_sizes"] = hp.hidden_sizes;
  j["N"] = hp.n_days;
  j["facets"] = hp.facets;
  j["facet_dim"] = hp.facet_dim;
  j["demographic_sizes"] = hp.demographic_sizes;
  j["demographic_widths"] = hp.demographic_widths;
  j["context_dim"] = hp.context_dim;
  j["trend_hidden"] = hp.trend_hidden;
  j["social_raw"] = hp.social_raw;
  j["social_dim"] = hp.social_dim;
  j["resblocks"] = hp.resblocks;
  j["resblock_width"] = hp.resblock_width;
  j["dropout"] = hp.dropout;
  j["gamma"] = hp.gamma;
  j["num_classes"] = hp.num_classes;
  j["context_mode"] = std::string(to_string(hp.context_mode));
  j["use_social"] = hp.use_social;
  j["residual"] = hp.residual;
  return j;
}

HyperParams hyper_from(const json& j) {
  HyperParams hp;
  hp.task = parse_task_kind(j.at("task").get<std::string>());
  hp.types.clear();
  for (const auto& t : j.at("behavior_types")) hp.types.push_back(parse_behavior_type(t.get<std::string>()));
  hp.hidden_sizes = j.at("hidden_sizes").get<std::vector<std::size_t>>();
  hp.n_days = j.at("N").get<int>();
  hp.facets = j.at("facets").get<std::size_t>();
  hp.facet_dim = j.at("facet_dim").get<std::size_t>();
  hp.demographic_sizes = j.at("demographic_sizes").get<std::array<std::uint32_t, kDemographicAttributes>>();
  hp.demographic_widths = j.at("demographic_widths").get<std::array<std::size_t, kDemographicAttributes>>();
  hp.context_dim = j.at("context_dim").get<std::size_t>();
  hp.trend_hidden = j.at("trend_hidden").get<std::size_t>();
  hp.social_raw = j.at("social_raw").get<std::size_t>();
  hp.social_dim = j.at("social_dim").get<std::size_t>();
  hp.resblocks = j.at("resblocks").get<std::size_t>();
  hp.resblock_width = j.at("resblock_width").get<std::size_t>();
  hp.dropout = j.at("dropout").get<double>();
  hp.gamma = j.at("gamma").get<double>();
  hp.num_classes = j.at("num_classes").get<int>();
  hp.context_mode = parse_context_mode(j.at("context_mode").get<std::string>());
  hp.use_social = j.at("use_social").get<bool>();
  hp.residual = j.at("residual").get<bool>();
  validate(hp);
  return hp;
}

constexpr std::string_view kCheckpointMagic = "HUBSCKPT1";

std::string shape_list(const std::vector<std::pair<std::string, Shape>>& shapes) {
  std::string out;
  for (const auto& [name, shape] : shapes) out += "    " + name + " " + shape_to_string(shape) + "\n";
  return out;
}

}  // namespace

std::string hyperparams_to_json(const HyperParams& hp) { return hyper_json(hp).dump(2); }

HyperParams hyperparams_from_json(const std::string& text) {
  try {
    return hyper_from(json::parse(text));
  } catch (const json::exception& e) {
    throw ContractError(std::string("hyperparameters: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params, const std::string& extra_json) {
  json header;
  header["hyperparams"] = hyper_json(params.hyper());
  json tensors = json::array();
  std::uint64_t offset = 0;
  for (const auto& p : params.all()) {
    tensors.push_back({{"name", p.name}, {"shape", p.tensor.shape()}, {"offset", offset}});
    offset += p.tensor.size() * sizeof(double);
  }
  header["tensors"] = tensors;
  header["metadata"] = json::parse(extra_json);
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(kCheckpointMagic.data(), static_cast<std::streamsize>(kCheckpointMagic.size()));
  binio::put_u64(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& p : params.all()) {
    for (double v : p.tensor.data()) binio::put_f64(out, v);
  }
  if (!out) throw IoError("failed writing " + path.string());
}

namespace {

Checkpoint load_impl(const std::filesystem::path& path, const HyperParams* expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const std::string what = path.string();
  binio::expect_magic(in, std::string(kCheckpointMagic), what);
  const std::uint64_t len = binio::get_u64(in, what);
  if (len > (1u << 30)) throw IncompatibleError(what + ": implausible header length");
  std::string text(len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(len))) throw IoError(what + ": truncated header");

  json header;
  HyperParams hp;
  std::vector<std::pair<std::string, Shape>> stored;
  std::vector<std::uint64_t> offsets;
  try {
    header = json::parse(text);
    hp = hyper_from(header.at("hyperparams"));
    for (const auto& t : header.at("tensors")) {
      stored.emplace_back(t.at("name").get<std::string>(), t.at("shape").get<Shape>());
      offsets.push_back(t.at("offset").get<std::uint64_t>());
    }
  } catch (const json::exception& e) {
    throw IncompatibleError(what + ": bad checkpoint header: " + e.what());
  } catch (const ContractError& e) {
    throw IncompatibleError(what + ": " + e.what());
  }

  const auto described = parameter_shapes(hp);
  if (described != stored) {
    throw IncompatibleError(what + ": tensor manifest does not match its own hyperparameters\n  stored:\n" +
                            shape_list(stored) + "  implied:\n" + shape_list(described));
  }
  if (expected != nullptr) {
    const auto wanted = parameter_shapes(*expected);
    if (wanted != stored) {
      throw IncompatibleError(what + ": checkpoint shapes differ from the configured model\n  checkpoint:\n" +
                              shape_list(stored) + "  expected:\n" + shape_list(wanted));
    }
  }

  Checkpoint ck{ModelParams(hp, 0), header.contains("metadata") ? header["metadata"].dump() : "{}"};
  std::uint64_t offset = 0;
  for (std::size_t i = 0; i < ck.params.all().size(); ++i) {
    auto& p = ck.params.all()[i];
    if (offsets[i] != offset) throw IncompatibleError(what + ": unexpected offset for " + p.name);
    for (auto& v : p.tensor.mutable_data()) v = binio::get_f64(in, what);
    offset += p.tensor.size() * sizeof(double);
  }
  if (in.peek() != std::char_traits<char>::eof()) throw IncompatibleError(what + ": trailing bytes after payload");
  return ck;
}

}  // namespace

Checkpoint load_checkpoint(const std::filesystem::path& path) { return load_impl(path, nullptr); }

Checkpoint load_checkpoint(const std::filesystem::path& path, const HyperParams& expected) {
  return load_impl(path, &expected);
}

}  // namespace hubs
