#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "evtraffic/geo.hpp"

namespace evtraffic {

using NodeIndex = std::uint32_t;
using LinkIndex = std::uint32_t;
inline constexpr LinkIndex kNoLink = static_cast<LinkIndex>(-1);

struct Node {
  std::string node_id;
  double lat = 0.0;
  double lon = 0.0;

  GeoPoint point() const { return {lat, lon}; }
  bool operator==(const Node&) const = default;
};

struct Link {
  std::string edge_id;
  std::string from;
  std::string to;
  double length_m = 0.0;
  double capacity = 0.0;       // vehicles/hour
  double freeflow_time = 0.0;  // minutes
  bool olympic_lane = false;
  bool operator==(const Link&) const = default;
};

struct BprParams {
  double f_s = 1.15;
  double alpha = 0.18;
  double beta = 5.0;

  void validate() const;
  bool operator==(const BprParams&) const = default;
};

// Link travel time t = f_s * [1 + alpha (v/C)^beta] * t_f.
double bpr_time(const Link& link, double volume, const BprParams& params);

// Antiderivative of bpr_time in volume, zero at v = 0 (Beckmann term).
double bpr_integral(const Link& link, double volume, const BprParams& params);

// d(v t(v))/dv: the delay one more vehicle adds to everyone on the link.
double marginal_edge_cost(const Link& link, double volume, const BprParams& params);

// edge_id -> capacity multiplier in (0, 1].
struct CapacityOverlay {
  std::map<std::string, double> entries;

  static CapacityOverlay load(const std::filesystem::path& path);
  bool operator==(const CapacityOverlay&) const = default;
};

inline constexpr double kDefaultOlympicLaneMultiplier = 0.5;

// Immutable directed road graph. Nodes and links are kept sorted by id, so a
// LinkIndex order is the lexicographic edge_id order.
class RoadNetwork {
 public:
  RoadNetwork(std::vector<Node> nodes, std::vector<Link> links, BprParams params = {});

  static RoadNetwork load(const std::filesystem::path& nodes_file,
                          const std::filesystem::path& links_file, BprParams params = {});

  const std::vector<Node>& nodes() const noexcept { return nodes_; }
  const std::vector<Link>& links() const noexcept { return links_; }
  const BprParams& params() const noexcept { return params_; }
  std::size_t num_nodes() const noexcept { return nodes_.size(); }
  std::size_t num_links() const noexcept { return links_.size(); }

  const Link& link(LinkIndex i) const { return links_[i]; }
  const Node& node(NodeIndex i) const { return nodes_[i]; }
  NodeIndex tail(LinkIndex i) const { return tails_[i]; }
  NodeIndex head(LinkIndex i) const { return heads_[i]; }

  std::optional<NodeIndex> find_node(const std::string& node_id) const;
  std::optional<LinkIndex> find_link(const std::string& edge_id) const;
  NodeIndex node_index(const std::string& node_id) const;  // throws if absent
  LinkIndex link_index(const std::string& edge_id) const;  // throws if absent

  // Outgoing links of a node in ascending edge_id order.
  std::span<const LinkIndex> out_links(NodeIndex n) const;

  // Overlay implied by links flagged olympic_lane.
  CapacityOverlay olympic_lane_overlay() const;

  std::vector<double> link_times(std::span<const double> volumes) const;
  std::vector<double> marginal_costs(std::span<const double> volumes) const;
  std::vector<double> freeflow_costs() const { return link_times(std::vector<double>(links_.size(), 0.0)); }

  bool operator==(const RoadNetwork& other) const {
    return nodes_ == other.nodes_ && links_ == other.links_ && params_ == other.params_;
  }

 private:
  std::vector<Node> nodes_;
  std::vector<Link> links_;
  BprParams params_;
  std::vector<NodeIndex> tails_;
  std::vector<NodeIndex> heads_;
  std::vector<std::size_t> out_offsets_;
  std::vector<LinkIndex> out_links_;
  std::unordered_map<std::string, NodeIndex> node_lookup_;
  std::unordered_map<std::string, LinkIndex> link_lookup_;
};

// Scales capacities of the listed links. Unknown edge_ids raise ValidationError.
RoadNetwork apply_overlay(const RoadNetwork& network, const CapacityOverlay& overlay);

void write_nodes(const RoadNetwork& network, const std::filesystem::path& path);
void write_links(const RoadNetwork& network, const std::filesystem::path& path);
void write_overlay(const CapacityOverlay& overlay, const std::filesystem::path& path);

struct Path {
  std::vector<LinkIndex> links;
  double cost = 0.0;
};

// One-to-all shortest paths. Among equal-cost paths the lexicographically
// smallest edge_id sequence wins.
class ShortestPathTree {
 public:
  ShortestPathTree(const RoadNetwork& network, std::span<const double> costs, NodeIndex origin);

  NodeIndex origin() const noexcept { return origin_; }
  bool reachable(NodeIndex n) const { return pred_[n] != kNoLink || n == origin_; }
  double distance(NodeIndex n) const { return dist_[n]; }
  // Links from origin to `dest`, in travel order. Empty when dest == origin.
  std::vector<LinkIndex> path_to(NodeIndex dest) const;

 private:
  bool precedes(LinkIndex via_a, LinkIndex via_b) const;

  const RoadNetwork* network_;
  NodeIndex origin_;
  std::vector<double> dist_;
  std::vector<LinkIndex> pred_;
};

// Throws NoPathError when dest is unreachable, DomainError on a non-positive cost.
Path shortest_path(const RoadNetwork& network, std::span<const double> costs,
                   const std::string& origin, const std::string& dest);

void check_costs(const RoadNetwork& network, std::span<const double> costs);

}  // namespace evtraffic
