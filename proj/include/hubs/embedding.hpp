#pragma once

// Structural node embeddings of the friendship graph from a deep autoencoder
// over adjacency rows (second-order proximity) with a Laplacian penalty on
// the bottleneck (first-order proximity).

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "hubs/social_graph.hpp"

namespace hubs {

struct EmbedConfig {
  std::size_t dim = 16;
  std::vector<std::size_t> hidden_sizes = {64};
  double alpha = 0.1;  // first-order weight
  double beta = 10.0;  // reconstruction weight on nonzero adjacency entries
  int epochs = 200;
  double learning_rate = 0.01;
  std::uint64_t seed = 0;
};

// Throws ContractError for dim == 0, beta < 1, alpha < 0 or negative epochs.
void validate(const EmbedConfig& config);

struct NodeEmbeddings {
  std::size_t dim = 0;
  std::map<UserId, std::vector<double>> table;
  std::vector<double> loss_history;  // one entry per epoch, before that epoch's update
  std::vector<std::string> warnings;

  // Throws DimensionError when the vector width differs from dim, NumericError for non-finite entries.
  void insert(UserId user, std::vector<double> vector);
};

// Full-batch Adam on
//   sum_u ||(xhat_u - x_u) * b_u||^2 + alpha * sum_{(u,v) in E} ||S_u - S_v||^2
// with PReLU hidden layers and a sigmoid reconstruction. Parameters tied to
// one node are seeded from that node's id, so relabelling the node order
// relabels the result. Throws ContractError for graphs with fewer than 2 nodes.
NodeEmbeddings embed_graph(const SocialGraph& graph, const EmbedConfig& config);
// Same, with the adjacency rows laid out in `order` (every node exactly once)
// rather than ascending id.
NodeEmbeddings embed_graph(const SocialGraph& graph, const EmbedConfig& config, std::span<const UserId> order);

// Throws LookupError for users without a vector.
const std::vector<double>& lookup(const NodeEmbeddings& embeddings, UserId user);

// Binary: "HUBSEMB1", u32 node count, u32 dim, then per node u64 id and dim
// float64 values, all little-endian, nodes in ascending id order.
void save_embeddings(const std::filesystem::path& path, const NodeEmbeddings& embeddings);
NodeEmbeddings load_embeddings(const std::filesystem::path& path);

}  // namespace hubs
