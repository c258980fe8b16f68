#include "hubs/social_graph.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>

#include <json.hpp>

#include "hubs/errors.hpp"

namespace hubs {

using nlohmann::json;

std::string_view to_string(VenueClass venue) { return venue == VenueClass::Library ? "Library" : "Canteen"; }

BehaviorType venue_behavior(VenueClass venue) {
  return venue == VenueClass::Library ? BehaviorType::Library : BehaviorType::Canteen;
}

std::uint64_t CoOccurrenceCounts::at(UserId u, UserId v) const {
  const auto it = counts.find({std::min(u, v), std::max(u, v)});
  return it == counts.end() ? 0 : it->second;
}

std::uint64_t CoOccurrenceCounts::max_count() const {
  std::uint64_t best = 0;
  for (const auto& [pair, c] : counts) best = std::max(best, c);
  return best;
}

namespace {

void check_window(std::int64_t window) {
  if (window < 0) throw ContractError("co-occurrence window must be non-negative, got " + std::to_string(window));
}

std::vector<BehaviorEvent> venue_events(std::span<const BehaviorEvent> events, VenueClass venue) {
  const BehaviorType type = venue_behavior(venue);
  std::vector<BehaviorEvent> out;
  for (const auto& e : events) {
    if (e.behavior_type == type) out.push_back(e);
  }
  return out;
}

void bump(CoOccurrenceCounts& c, UserId a, UserId b) {
  if (a == b) return;
  ++c.counts[{std::min(a, b), std::max(a, b)}];
}

}  // namespace

CoOccurrenceCounts count_cooccurrences(std::span<const BehaviorEvent> events, VenueClass venue,
                                       std::int64_t window_seconds) {
  check_window(window_seconds);
  auto ev = venue_events(events, venue);
  std::sort(ev.begin(), ev.end(), [](const BehaviorEvent& a, const BehaviorEvent& b) {
    return std::tie(a.object_id, a.timestamp, a.user_id) < std::tie(b.object_id, b.timestamp, b.user_id);
  });
  CoOccurrenceCounts out;
  out.venue = venue;
  for (std::size_t i = 0; i < ev.size(); ++i) {
    for (std::size_t j = i + 1; j < ev.size(); ++j) {
      if (ev[j].object_id != ev[i].object_id || ev[j].timestamp - ev[i].timestamp > window_seconds) break;
      bump(out, ev[i].user_id, ev[j].user_id);
    }
  }
  return out;
}

CoOccurrenceCounts count_cooccurrences_brute_force(std::span<const BehaviorEvent> events, VenueClass venue,
                                                   std::int64_t window_seconds) {
  check_window(window_seconds);
  const auto ev = venue_events(events, venue);
  CoOccurrenceCounts out;
  out.venue = venue;
  for (std::size_t i = 0; i < ev.size(); ++i) {
    for (std::size_t j = i + 1; j < ev.size(); ++j) {
      const std::int64_t dt = ev[i].timestamp - ev[j].timestamp;
      if (ev[i].object_id == ev[j].object_id && (dt < 0 ? -dt : dt) <= window_seconds) {
        bump(out, ev[i].user_id, ev[j].user_id);
      }
    }
  }
  return out;
}

ShuffleMode parse_shuffle_mode(std::string_view name) {
  if (name == "object") return ShuffleMode::Object;
  if (name == "timestamp") return ShuffleMode::Timestamp;
  throw ContractError("unknown null model '" + std::string(name) + "' (expected object or timestamp)");
}

std::string_view to_string(ShuffleMode mode) { return mode == ShuffleMode::Object ? "object" : "timestamp"; }

std::vector<BehaviorEvent> shuffle_null_model(std::span<const BehaviorEvent> events, ShuffleMode mode,
                                              std::uint64_t seed) {
  if (events.size() < 2) throw ContractError("null model needs at least 2 events");
  std::vector<std::size_t> perm(events.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<BehaviorEvent> out(events.begin(), events.end());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (mode == ShuffleMode::Object) {
      out[i].object_id = events[perm[i]].object_id;
    } else {
      out[i].timestamp = events[perm[i]].timestamp;
    }
  }
  return out;
}

Thresholds friendship_thresholds(int n_days, int days_per_semester) {
  if (n_days <= 0 || days_per_semester <= 0) throw ContractError("thresholds need positive N and semester length");
  if (n_days > days_per_semester) {
    throw ContractError("N = " + std::to_string(n_days) + " exceeds semester length " +
                        std::to_string(days_per_semester));
  }
  const double n = n_days;
  const double d = days_per_semester;
  return {30.0 * n / d, 20.0 * n / d};
}

SocialGraph::SocialGraph(std::vector<UserId> nodes, const std::vector<UserPair>& edges) : nodes_(std::move(nodes)) {
  std::sort(nodes_.begin(), nodes_.end());
  nodes_.erase(std::unique(nodes_.begin(), nodes_.end()), nodes_.end());
  adj_.assign(nodes_.size(), {});
  for (const auto& [u, v] : edges) {
    if (u == v) throw ContractError("self edge on user " + std::to_string(u));
    const std::size_t a = index_of(u);
    const std::size_t b = index_of(v);
    adj_[a].push_back(b);
    adj_[b].push_back(a);
  }
  for (auto& row : adj_) {
    std::sort(row.begin(), row.end());
    row.erase(std::unique(row.begin(), row.end()), row.end());
  }
}

std::size_t SocialGraph::edge_count() const {
  std::size_t twice = 0;
  for (const auto& row : adj_) twice += row.size();
  return twice / 2;
}

bool SocialGraph::has_node(UserId u) const { return std::binary_search(nodes_.begin(), nodes_.end(), u); }

std::size_t SocialGraph::index_of(UserId u) const {
  const auto it = std::lower_bound(nodes_.begin(), nodes_.end(), u);
  if (it == nodes_.end() || *it != u) throw LookupError("user " + std::to_string(u) + " is not a graph node");
  return static_cast<std::size_t>(it - nodes_.begin());
}

bool SocialGraph::adjacent(UserId u, UserId v) const {
  if (!has_node(u) || !has_node(v)) return false;
  const auto& row = adj_[index_of(u)];
  return std::binary_search(row.begin(), row.end(), index_of(v));
}

std::vector<UserPair> SocialGraph::edges() const {
  std::vector<UserPair> out;
  for (std::size_t a = 0; a < adj_.size(); ++a) {
    for (auto b : adj_[a]) {
      if (a < b) out.emplace_back(nodes_[a], nodes_[b]);
    }
  }
  return out;
}

SocialGraph infer_friendship(const CoOccurrenceCounts& library, const CoOccurrenceCounts& canteen, int n_days,
                             int days_per_semester) {
  if (library.venue != VenueClass::Library || canteen.venue != VenueClass::Canteen) {
    throw ContractError("infer_friendship: expected library counts then canteen counts");
  }
  const Thresholds tau = friendship_thresholds(n_days, days_per_semester);
  std::vector<UserId> nodes;
  std::vector<UserPair> edges;
  const auto scan = [&](const CoOccurrenceCounts& c, double threshold) {
    for (const auto& [pair, count] : c.counts) {
      if (pair.first >= pair.second) throw ContractError("infer_friendship: count keys must satisfy u < v");
      nodes.push_back(pair.first);
      nodes.push_back(pair.second);
      if (static_cast<double>(count) >= threshold) edges.push_back(pair);
    }
  };
  scan(library, tau.library);
  scan(canteen, tau.canteen);
  return SocialGraph(std::move(nodes), edges);
}

GraphReport graph_report(const SocialGraph& graph) {
  GraphReport r;
  r.nodes = graph.node_count();
  r.edges = graph.edge_count();
  for (const auto& row : graph.neighbours()) {
    ++r.degree_histogram[row.size()];
    if (row.empty()) ++r.isolated;
  }
  return r;
}

double EdgeRecovery::precision() const {
  return inferred == 0 ? 0.0 : static_cast<double>(true_positives) / static_cast<double>(inferred);
}

double EdgeRecovery::recall() const {
  return planted == 0 ? 0.0 : static_cast<double>(true_positives) / static_cast<double>(planted);
}

EdgeRecovery compare_edges(const SocialGraph& graph, const std::vector<UserPair>& planted) {
  EdgeRecovery r;
  r.inferred = graph.edge_count();
  r.planted = planted.size();
  for (const auto& [u, v] : planted) {
    if (graph.adjacent(u, v)) ++r.true_positives;
  }
  return r;
}

void write_graph(const std::filesystem::path& edges_path, const std::filesystem::path& sidecar_path,
                 const SocialGraph& graph, const GraphSidecar& sidecar) {
  write_pairs_csv(edges_path, graph.edges());
  json j;
  j["nodes"] = graph.nodes();
  j["edge_count"] = graph.edge_count();
  j["tau_library"] = sidecar.thresholds.library;
  j["tau_canteen"] = sidecar.thresholds.canteen;
  j["N"] = sidecar.n_days;
  j["semester_days"] = sidecar.semester_days;
  j["window_seconds"] = sidecar.window_seconds;
  j["seed"] = sidecar.seed;
  j["first_day"] = sidecar.first_day;
  std::ofstream out(sidecar_path);
  if (!out) throw IoError("cannot write " + sidecar_path.string());
  out << j.dump(2) << '\n';
}

SocialGraph read_graph(const std::filesystem::path& edges_path, const std::filesystem::path& sidecar_path,
                       GraphSidecar* sidecar) {
  std::ifstream in(sidecar_path);
  if (!in) throw IoError("cannot open " + sidecar_path.string());
  std::vector<UserId> nodes;
  try {
    const json j = json::parse(in);
    nodes = j.at("nodes").get<std::vector<UserId>>();
    if (sidecar != nullptr) {
      sidecar->thresholds = {j.at("tau_library").get<double>(), j.at("tau_canteen").get<double>()};
      sidecar->n_days = j.at("N").get<int>();
      sidecar->semester_days = j.at("semester_days").get<int>();
      sidecar->window_seconds = j.at("window_seconds").get<std::int64_t>();
      sidecar->seed = j.at("seed").get<std::uint64_t>();
      sidecar->first_day = j.value("first_day", std::string());
    }
  } catch (const json::exception& e) {
    throw IoError(sidecar_path.string() + ": " + e.what());
  }
  const auto edges = read_pairs_csv(edges_path);
  try {
    return SocialGraph(std::move(nodes), edges);
  } catch (const Error& e) {
    throw IoError(edges_path.string() + ": " + e.what());
  }
}

}  // namespace hubs
