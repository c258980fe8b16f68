#include "hubs/embedding.hpp"

#include <cmath>
#include <fstream>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "binary_io.hpp"
#include "hubs/adam.hpp"
#include "hubs/errors.hpp"
#include "hubs/init.hpp"
#include "hubs/tensor.hpp"

namespace hubs {

void validate(const EmbedConfig& c) {
  if (c.dim == 0) throw ContractError("embedding: dim must be positive");
  if (!(c.beta >= 1.0)) throw ContractError("embedding: beta must be at least 1");
  if (!(c.alpha >= 0.0)) throw ContractError("embedding: alpha must be non-negative");
  if (c.epochs < 0) throw ContractError("embedding: epochs must be non-negative");
  for (auto h : c.hidden_sizes) {
    if (h == 0) throw ContractError("embedding: hidden sizes must be positive");
  }
  if (!(c.learning_rate > 0.0)) throw ContractError("embedding: learning rate must be positive");
}

void NodeEmbeddings::insert(UserId user, std::vector<double> vector) {
  if (vector.size() != dim) {
    throw DimensionError("embedding for user " + std::to_string(user) + " has width " +
                         std::to_string(vector.size()) + ", expected " + std::to_string(dim));
  }
  for (double v : vector) {
    if (!std::isfinite(v)) throw NumericError("embedding for user " + std::to_string(user) + " is not finite");
  }
  table[user] = std::move(vector);
}

namespace {

using SparseRows = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using Map = Eigen::Map<RowMat>;

struct Layer {
  Tensor weight;
  Tensor bias;
  Tensor slope;  // undefined for the output layer
};

// w [r, n] times a constant sparse [n, n] matrix.
Tensor sparse_matmul(const Tensor& w, std::shared_ptr<const SparseRows> x) {
  const auto r = static_cast<Eigen::Index>(w.rows());
  const auto n = static_cast<Eigen::Index>(x->cols());
  std::vector<double> values(static_cast<std::size_t>(r * n));
  Map(values.data(), r, n) = ConstMap(w.data().data(), r, w.cols()) * (*x);
  return make_op({w.rows(), static_cast<std::size_t>(n)}, std::move(values), {w}, [x, r, n](const GradContext& ctx) {
    if (ctx.input_grads[0].empty()) return;
    Map(ctx.input_grads[0].data(), r, x->rows()) += ConstMap(ctx.output_grad.data(), r, n) * x->transpose();
  });
}

// sum(((sigmoid(z) - x) * b)^2) in one pass.
Tensor weighted_reconstruction_loss(const Tensor& z, const std::vector<double>& x, const std::vector<double>& b) {
  const auto zs = z.data();
  auto p = std::make_shared<std::vector<double>>(zs.size());
  double total = 0.0;
  for (std::size_t k = 0; k < zs.size(); ++k) {
    (*p)[k] = 1.0 / (1.0 + std::exp(-zs[k]));
    const double d = ((*p)[k] - x[k]) * b[k];
    total += d * d;
  }
  if (!std::isfinite(total)) throw NumericError("embedding: reconstruction loss is not finite");
  return make_op({1}, {total}, {z}, [p, &x, &b](const GradContext& ctx) {
    if (ctx.input_grads[0].empty()) return;
    const double g = 2.0 * ctx.output_grad[0];
    const auto& pv = *p;
    for (std::size_t k = 0; k < pv.size(); ++k) {
      ctx.input_grads[0][k] += g * (pv[k] - x[k]) * b[k] * b[k] * pv[k] * (1.0 - pv[k]);
    }
  });
}

// sum over edges of ||S_u - S_v||^2 for s [dim, n].
Tensor edge_proximity(const Tensor& s, const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
  const std::size_t dim = s.rows();
  const std::size_t n = s.cols();
  const auto sv = s.data();
  double total = 0.0;
  for (const auto& [u, v] : edges) {
    for (std::size_t i = 0; i < dim; ++i) {
      const double d = sv[i * n + u] - sv[i * n + v];
      total += d * d;
    }
  }
  return make_op({1}, {total}, {s}, [s, &edges, dim, n](const GradContext& ctx) {
    if (ctx.input_grads[0].empty()) return;
    const auto val = s.data();
    const double g = 2.0 * ctx.output_grad[0];
    for (const auto& [u, v] : edges) {
      for (std::size_t i = 0; i < dim; ++i) {
        const double d = g * (val[i * n + u] - val[i * n + v]);
        ctx.input_grads[0][i * n + u] += d;
        ctx.input_grads[0][i * n + v] -= d;
      }
    }
  });
}

Tensor affine(const Layer& layer, const Tensor& x) { return add_bias(matmul(layer.weight, x), layer.bias); }

}  // namespace

NodeEmbeddings embed_graph(const SocialGraph& graph, const EmbedConfig& config) {
  return embed_graph(graph, config, graph.nodes());
}

NodeEmbeddings embed_graph(const SocialGraph& graph, const EmbedConfig& config, std::span<const UserId> order) {
  validate(config);
  const std::size_t n = graph.node_count();
  if (n < 2) throw ContractError("embed_graph: needs at least 2 nodes, got " + std::to_string(n));
  const std::vector<UserId> nodes(order.begin(), order.end());
  if (nodes.size() != n) throw ContractError("embed_graph: node order must list every graph node once");
  std::vector<std::size_t> position(n, n);  // graph index -> row
  for (std::size_t r = 0; r < nodes.size(); ++r) {
    const std::size_t idx = graph.index_of(nodes[r]);
    if (position[idx] != n) throw ContractError("embed_graph: node order repeats user " + std::to_string(nodes[r]));
    position[idx] = r;
  }

  NodeEmbeddings out;
  out.dim = config.dim;
  if (graph.edge_count() == 0) out.warnings.push_back("graph has no edges; embedding uses the reconstruction term only");

  // Adjacency (symmetric, so rows and columns coincide) and reconstruction weights.
  std::vector<double> adj(n * n, 0.0);
  std::vector<double> weight(n * n, 1.0);
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  std::vector<Eigen::Triplet<double>> triplets;
  const auto& nb = graph.neighbours();
  for (std::size_t gu = 0; gu < n; ++gu) {
    const std::size_t u = position[gu];
    for (auto gv : nb[gu]) {
      const std::size_t v = position[gv];
      adj[u * n + v] = 1.0;
      weight[u * n + v] = config.beta;
      triplets.emplace_back(static_cast<int>(u), static_cast<int>(v), 1.0);
      if (u < v) edges.emplace_back(u, v);
    }
  }
  auto sparse = std::make_shared<SparseRows>(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  sparse->setFromTriplets(triplets.begin(), triplets.end());

  std::vector<std::size_t> widths = {n};
  widths.insert(widths.end(), config.hidden_sizes.begin(), config.hidden_sizes.end());
  widths.push_back(config.dim);
  const std::size_t depth = widths.size() - 1;

  std::vector<Layer> encoder;
  std::vector<Layer> decoder;
  std::vector<NamedTensor> params;
  const auto make_layer = [&](const std::string& name, std::size_t in, std::size_t outw, bool output) {
    Layer layer;
    layer.weight = Tensor::zeros({outw, in}, true);
    auto w = layer.weight.mutable_data();
    if (in == n) {
      // Input columns belong to nodes.
      std::vector<double> col(outw);
      for (std::size_t j = 0; j < n; ++j) {
        glorot_fill(col, in, outw, config.seed, name + "/node" + std::to_string(nodes[j]));
        for (std::size_t i = 0; i < outw; ++i) w[i * in + j] = col[i];
      }
    } else if (outw == n) {
      for (std::size_t i = 0; i < n; ++i) {
        glorot_fill(w.subspan(i * in, in), in, outw, config.seed, name + "/node" + std::to_string(nodes[i]));
      }
    } else {
      glorot_fill(w, in, outw, config.seed, name);
    }
    layer.bias = Tensor::zeros({outw}, true);
    params.push_back({name + ".weight", layer.weight});
    params.push_back({name + ".bias", layer.bias});
    if (!output) {
      layer.slope = Tensor::vector({0.25}, true);
      params.push_back({name + ".slope", layer.slope});
    }
    return layer;
  };
  for (std::size_t k = 0; k < depth; ++k) {
    encoder.push_back(make_layer("enc" + std::to_string(k), widths[k], widths[k + 1], false));
  }
  for (std::size_t k = depth; k-- > 0;) {
    decoder.push_back(make_layer("dec" + std::to_string(k), widths[k + 1], widths[k], k == 0));
  }

  const auto encode = [&]() {
    Tensor h;
    for (std::size_t k = 0; k < encoder.size(); ++k) {
      const auto& layer = encoder[k];
      const Tensor z = k == 0 ? add_bias(sparse_matmul(layer.weight, sparse), layer.bias) : affine(layer, h);
      h = prelu(z, layer.slope);
    }
    return h;  // [dim, n], column u = S_u
  };

  AdamConfig adam;
  adam.learning_rate = config.learning_rate;
  AdamState state;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const Tensor s = encode();
    Tensor h = s;
    for (std::size_t k = 0; k + 1 < decoder.size(); ++k) h = prelu(affine(decoder[k], h), decoder[k].slope);
    Tensor loss = weighted_reconstruction_loss(affine(decoder.back(), h), adj, weight);
    if (config.alpha > 0.0 && !edges.empty()) loss = add(loss, scale(edge_proximity(s, edges), config.alpha));
    out.loss_history.push_back(loss.item());
    for (auto& p : params) p.tensor.zero_grad();
    loss.backward();
    adam_step(params, state, adam, static_cast<std::size_t>(epoch) + 1);
  }

  const Tensor s = encode();
  for (std::size_t u = 0; u < n; ++u) {
    std::vector<double> v(config.dim);
    for (std::size_t i = 0; i < config.dim; ++i) v[i] = s.at(i, u);
    out.insert(nodes[u], std::move(v));
  }
  return out;
}

const std::vector<double>& lookup(const NodeEmbeddings& embeddings, UserId user) {
  const auto it = embeddings.table.find(user);
  if (it == embeddings.table.end()) throw LookupError("no embedding for user " + std::to_string(user));
  return it->second;
}

namespace {
constexpr const char* kMagic = "HUBSEMB1";
}

void save_embeddings(const std::filesystem::path& path, const NodeEmbeddings& e) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(kMagic, 8);
  binio::put_u32(out, static_cast<std::uint32_t>(e.table.size()));
  binio::put_u32(out, static_cast<std::uint32_t>(e.dim));
  for (const auto& [user, vec] : e.table) {
    binio::put_u64(out, user);
    for (double v : vec) binio::put_f64(out, v);
  }
  if (!out) throw IoError("failed writing " + path.string());
}

NodeEmbeddings load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const std::string what = path.string();
  binio::expect_magic(in, kMagic, what);
  NodeEmbeddings e;
  const std::uint32_t count = binio::get_u32(in, what);
  e.dim = binio::get_u32(in, what);
  for (std::uint32_t i = 0; i < count; ++i) {
    const UserId user = binio::get_u64(in, what);
    std::vector<double> v(e.dim);
    for (auto& x : v) x = binio::get_f64(in, what);
    if (e.table.count(user)) throw IoError(what + ": duplicate user " + std::to_string(user));
    e.insert(user, std::move(v));
  }
  if (in.peek() != std::char_traits<char>::eof()) throw IoError(what + ": trailing bytes");
  return e;
}

}  // namespace hubs
