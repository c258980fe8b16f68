#pragma once

// Friendship inference from spatio-temporal co-occurrences.

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hubs/events.hpp"

namespace hubs {

enum class VenueClass { Library, Canteen };

std::string_view to_string(VenueClass venue);
BehaviorType venue_behavior(VenueClass venue);

using UserPair = std::pair<UserId, UserId>;  // first < second

struct CoOccurrenceCounts {
  VenueClass venue = VenueClass::Library;
  std::map<UserPair, std::uint64_t> counts;

  std::uint64_t at(UserId u, UserId v) const;
  std::uint64_t max_count() const;
};

inline constexpr std::int64_t kDefaultWindowSeconds = 600;

// Event pairs of distinct users at the same object with |dt| <= window,
// counted once per unordered pair of events. Only events of the venue's
// behavior type are considered. Throws ContractError for a negative window.
CoOccurrenceCounts count_cooccurrences(std::span<const BehaviorEvent> events, VenueClass venue,
                                       std::int64_t window_seconds = kDefaultWindowSeconds);

// Quadratic reference implementation with the same semantics.
CoOccurrenceCounts count_cooccurrences_brute_force(std::span<const BehaviorEvent> events, VenueClass venue,
                                                   std::int64_t window_seconds = kDefaultWindowSeconds);

enum class ShuffleMode { Object, Timestamp };

ShuffleMode parse_shuffle_mode(std::string_view name);
std::string_view to_string(ShuffleMode mode);

// Applies one uniform random permutation to the chosen field across all
// events, leaving other fields untouched. Requires at least 2 events.
std::vector<BehaviorEvent> shuffle_null_model(std::span<const BehaviorEvent> events, ShuffleMode mode,
                                              std::uint64_t seed);

struct Thresholds {
  double library = 0.0;
  double canteen = 0.0;
};

// tau_Lib = 30 N / days, tau_Canteen = 20 N / days.
Thresholds friendship_thresholds(int n_days, int days_per_semester);

class SocialGraph {
 public:
  SocialGraph() = default;
  // Nodes are sorted and deduplicated; edges must join listed, distinct nodes.
  SocialGraph(std::vector<UserId> nodes, const std::vector<UserPair>& edges);

  const std::vector<UserId>& nodes() const { return nodes_; }
  std::size_t node_count() const { return nodes_.size(); }
  std::size_t edge_count() const;
  bool has_node(UserId u) const;
  // Position of u in nodes(); throws LookupError when absent.
  std::size_t index_of(UserId u) const;
  bool adjacent(UserId u, UserId v) const;
  // Neighbour positions per node position, ascending.
  const std::vector<std::vector<std::size_t>>& neighbours() const { return adj_; }
  std::vector<UserPair> edges() const;

 private:
  std::vector<UserId> nodes_;
  std::vector<std::vector<std::size_t>> adj_;
};

// Nodes are the users appearing in either count map; an edge joins u and v
// when either count reaches its threshold.
SocialGraph infer_friendship(const CoOccurrenceCounts& library, const CoOccurrenceCounts& canteen, int n_days,
                             int days_per_semester);

struct GraphReport {
  std::size_t nodes = 0;
  std::size_t edges = 0;
  std::size_t isolated = 0;
  std::map<std::size_t, std::size_t> degree_histogram;  // degree -> node count
};

GraphReport graph_report(const SocialGraph& graph);

struct EdgeRecovery {
  std::size_t true_positives = 0;
  std::size_t inferred = 0;
  std::size_t planted = 0;
  double precision() const;
  double recall() const;
};

EdgeRecovery compare_edges(const SocialGraph& graph, const std::vector<UserPair>& planted);

struct GraphSidecar {
  Thresholds thresholds;
  int n_days = 0;
  int semester_days = 0;
  std::int64_t window_seconds = kDefaultWindowSeconds;
  std::uint64_t seed = 0;
  std::string first_day;
};

// Edge list `u,v` with u < v, plus a JSON sidecar listing all nodes and the
// inference parameters.
void write_graph(const std::filesystem::path& edges_path, const std::filesystem::path& sidecar_path,
                 const SocialGraph& graph, const GraphSidecar& sidecar);
SocialGraph read_graph(const std::filesystem::path& edges_path, const std::filesystem::path& sidecar_path,
                       GraphSidecar* sidecar = nullptr);

}  // namespace hubs
