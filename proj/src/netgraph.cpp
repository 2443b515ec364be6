#include "evtraffic/netgraph.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <queue>
#include <set>

#include "evtraffic/error.hpp"
#include "evtraffic/table.hpp"

namespace evtraffic {
namespace {

void check_volume(double volume) {
  if (!std::isfinite(volume) || volume < 0.0) {
    throw DomainError("link volume must be finite and non-negative, got " + std::to_string(volume));
  }
}

bool parse_flag(const std::string& text) {
  if (text.empty() || text == "0" || text == "false" || text == "no") return false;
  if (text == "1" || text == "true" || text == "yes") return true;
  throw std::invalid_argument(text);
}

}  // namespace

void BprParams::validate() const {
  std::vector<std::string> problems;
  if (!std::isfinite(f_s) || f_s < 1.0) problems.push_back("bpr.f_s must be finite and >= 1");
  if (!std::isfinite(alpha) || alpha < 0.0) problems.push_back("bpr.alpha must be finite and >= 0");
  if (!std::isfinite(beta) || beta < 1.0) problems.push_back("bpr.beta must be finite and >= 1");
  if (!problems.empty()) throw ValidationError(std::move(problems));
}

double bpr_time(const Link& link, double volume, const BprParams& params) {
  check_volume(volume);
  const double voc = volume / link.capacity;
  return params.f_s * (1.0 + params.alpha * std::pow(voc, params.beta)) * link.freeflow_time;
}

double bpr_integral(const Link& link, double volume, const BprParams& params) {
  check_volume(volume);
  const double voc = volume / link.capacity;
  return params.f_s * link.freeflow_time *
         (volume + params.alpha * volume * std::pow(voc, params.beta) / (params.beta + 1.0));
}

double marginal_edge_cost(const Link& link, double volume, const BprParams& params) {
  const double voc = volume / link.capacity;
  return bpr_time(link, volume, params) +
         params.f_s * params.alpha * params.beta * std::pow(voc, params.beta) * link.freeflow_time;
}

CapacityOverlay CapacityOverlay::load(const std::filesystem::path& path) {
  const auto table = Table::read(path);
  table.require_columns({"edge_id", "multiplier"});
  CapacityOverlay overlay;
  std::vector<std::string> problems;
  for (const auto& row : table.rows()) {
    const auto& id = table.cell(row, "edge_id");
    const double m = table.number(row, "multiplier");
    if (!(m > 0.0 && m <= 1.0)) {
      problems.push_back(table.where(row) + ": multiplier for " + id + " must be in (0,1]");
      continue;
    }
    if (!overlay.entries.emplace(id, m).second) {
      problems.push_back(table.where(row) + ": duplicate edge_id " + id);
    }
  }
  if (!problems.empty()) throw ValidationError(std::move(problems));
  return overlay;
}

RoadNetwork::RoadNetwork(std::vector<Node> nodes, std::vector<Link> links, BprParams params)
    : nodes_(std::move(nodes)), links_(std::move(links)), params_(params) {
  params_.validate();
  std::ranges::sort(nodes_, {}, &Node::node_id);
  std::ranges::sort(links_, {}, &Link::edge_id);

  std::vector<std::string> problems;
  if (links_.empty()) problems.push_back("network has no links");
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const auto& n = nodes_[i];
    if (!node_lookup_.emplace(n.node_id, static_cast<NodeIndex>(i)).second) {
      problems.push_back("duplicate node_id " + n.node_id);
    }
    if (!(n.lat >= -90.0 && n.lat <= 90.0) || !(n.lon >= -180.0 && n.lon <= 180.0)) {
      problems.push_back("node " + n.node_id + " has coordinates out of range");
    }
  }
  tails_.resize(links_.size());
  heads_.resize(links_.size());
  for (std::size_t i = 0; i < links_.size(); ++i) {
    const auto& l = links_[i];
    if (!link_lookup_.emplace(l.edge_id, static_cast<LinkIndex>(i)).second) {
      problems.push_back("duplicate edge_id " + l.edge_id);
    }
    if (!(l.capacity > 0.0) || !std::isfinite(l.capacity)) {
      problems.push_back("link " + l.edge_id + " capacity must be > 0");
    }
    if (!(l.freeflow_time > 0.0) || !std::isfinite(l.freeflow_time)) {
      problems.push_back("link " + l.edge_id + " freeflow_time must be > 0");
    }
    if (!(l.length_m > 0.0) || !std::isfinite(l.length_m)) {
      problems.push_back("link " + l.edge_id + " length must be > 0");
    }
    const auto from = node_lookup_.find(l.from);
    const auto to = node_lookup_.find(l.to);
    if (from == node_lookup_.end()) problems.push_back("link " + l.edge_id + " references unknown node " + l.from);
    if (to == node_lookup_.end()) problems.push_back("link " + l.edge_id + " references unknown node " + l.to);
    if (from != node_lookup_.end()) tails_[i] = from->second;
    if (to != node_lookup_.end()) heads_[i] = to->second;
  }
  if (!problems.empty()) throw ValidationError(std::move(problems));

  // Links are already in edge_id order, so a stable bucket by tail keeps each
  // adjacency list sorted.
  out_offsets_.assign(nodes_.size() + 1, 0);
  for (auto t : tails_) ++out_offsets_[t + 1];
  for (std::size_t i = 1; i < out_offsets_.size(); ++i) out_offsets_[i] += out_offsets_[i - 1];
  out_links_.resize(links_.size());
  auto fill = out_offsets_;
  for (std::size_t i = 0; i < links_.size(); ++i) out_links_[fill[tails_[i]]++] = static_cast<LinkIndex>(i);
}

RoadNetwork RoadNetwork::load(const std::filesystem::path& nodes_file, const std::filesystem::path& links_file,
                              BprParams params) {
  std::vector<std::string> problems;

  const auto node_table = Table::read(nodes_file);
  node_table.require_columns({"node_id", "lat", "lon"});
  std::vector<Node> nodes;
  for (const auto& row : node_table.rows()) {
    try {
      nodes.push_back({node_table.cell(row, "node_id"), node_table.number(row, "lat"), node_table.number(row, "lon")});
    } catch (const ValidationError& e) {
      problems.insert(problems.end(), e.violations().begin(), e.violations().end());
    }
  }

  const auto link_table = Table::read(links_file);
  link_table.require_columns({"edge_id", "from", "to", "length_m", "capacity_vph"},
                             {"freeflow_time_min", "freeflow_speed_kmh", "olympic_lane"});
  std::vector<Link> links;
  for (const auto& row : link_table.rows()) {
    try {
      Link l;
      l.edge_id = link_table.cell(row, "edge_id");
      l.from = link_table.cell(row, "from");
      l.to = link_table.cell(row, "to");
      l.length_m = link_table.number(row, "length_m");
      l.capacity = link_table.number(row, "capacity_vph");
      const auto time = link_table.optional_number(row, "freeflow_time_min");
      const auto speed = link_table.optional_number(row, "freeflow_speed_kmh");
      if (time.has_value() == speed.has_value()) {
        problems.push_back(link_table.where(row) + ": exactly one of freeflow_time_min / freeflow_speed_kmh required");
        continue;
      }
      if (time) {
        l.freeflow_time = *time;
      } else if (*speed > 0.0) {
        l.freeflow_time = l.length_m / 1000.0 / *speed * 60.0;
      } else {
        problems.push_back(link_table.where(row) + ": freeflow_speed_kmh must be > 0");
        continue;
      }
      if (link_table.has_column("olympic_lane")) {
        try {
          l.olympic_lane = parse_flag(link_table.cell(row, "olympic_lane"));
        } catch (const std::invalid_argument&) {
          problems.push_back(link_table.where(row) + ": olympic_lane must be 0/1/true/false");
          continue;
        }
      }
      links.push_back(std::move(l));
    } catch (const ValidationError& e) {
      problems.insert(problems.end(), e.violations().begin(), e.violations().end());
    }
  }
  // Structural problems are attributed to the row that introduced the id.
  std::map<std::string, std::string> link_rows, node_rows;
  for (const auto& row : link_table.rows()) link_rows.emplace(link_table.cell(row, "edge_id"), link_table.where(row));
  for (const auto& row : node_table.rows()) node_rows.emplace(node_table.cell(row, "node_id"), node_table.where(row));
  const auto where = [&](const std::string& msg) -> std::string {
    for (const auto& [prefix, rows] : {std::pair{std::string("link "), &link_rows}, {std::string("duplicate edge_id "), &link_rows},
                                       {std::string("node "), &node_rows}, {std::string("duplicate node_id "), &node_rows}}) {
      if (!msg.starts_with(prefix)) continue;
      const auto id = msg.substr(prefix.size(), msg.find(' ', prefix.size()) - prefix.size());
      if (const auto it = rows->find(id); it != rows->end()) return it->second + ": " + msg;
    }
    return msg;
  };
  try {
    auto net = RoadNetwork(std::move(nodes), std::move(links), params);
    if (problems.empty()) return net;
  } catch (const ValidationError& e) {
    for (const auto& v : e.violations()) {
      if (v != "network has no links" || problems.empty()) problems.push_back(where(v));
    }
  }
  throw ValidationError(std::move(problems));
}

std::optional<NodeIndex> RoadNetwork::find_node(const std::string& node_id) const {
  const auto it = node_lookup_.find(node_id);
  if (it == node_lookup_.end()) return std::nullopt;
  return it->second;
}

std::optional<LinkIndex> RoadNetwork::find_link(const std::string& edge_id) const {
  const auto it = link_lookup_.find(edge_id);
  if (it == link_lookup_.end()) return std::nullopt;
  return it->second;
}

NodeIndex RoadNetwork::node_index(const std::string& node_id) const {
  if (auto n = find_node(node_id)) return *n;
  throw ValidationError({"unknown node " + node_id});
}

LinkIndex RoadNetwork::link_index(const std::string& edge_id) const {
  if (auto l = find_link(edge_id)) return *l;
  throw ValidationError({"unknown edge " + edge_id});
}

std::span<const LinkIndex> RoadNetwork::out_links(NodeIndex n) const {
  return std::span<const LinkIndex>(out_links_).subspan(out_offsets_[n], out_offsets_[n + 1] - out_offsets_[n]);
}

CapacityOverlay RoadNetwork::olympic_lane_overlay() const {
  CapacityOverlay overlay;
  for (const auto& l : links_) {
    if (l.olympic_lane) overlay.entries.emplace(l.edge_id, kDefaultOlympicLaneMultiplier);
  }
  return overlay;
}

std::vector<double> RoadNetwork::link_times(std::span<const double> volumes) const {
  std::vector<double> out(links_.size());
  for (std::size_t i = 0; i < links_.size(); ++i) out[i] = bpr_time(links_[i], volumes[i], params_);
  return out;
}

std::vector<double> RoadNetwork::marginal_costs(std::span<const double> volumes) const {
  std::vector<double> out(links_.size());
  for (std::size_t i = 0; i < links_.size(); ++i) out[i] = marginal_edge_cost(links_[i], volumes[i], params_);
  return out;
}

RoadNetwork apply_overlay(const RoadNetwork& network, const CapacityOverlay& overlay) {
  std::vector<std::string> unknown;
  for (const auto& [id, m] : overlay.entries) {
    if (!network.find_link(id)) unknown.push_back("overlay references unknown edge_id " + id);
    if (!(m > 0.0 && m <= 1.0)) unknown.push_back("overlay multiplier for " + id + " must be in (0,1]");
  }
  if (!unknown.empty()) throw ValidationError(std::move(unknown));
  auto links = network.links();
  for (auto& l : links) {
    if (auto it = overlay.entries.find(l.edge_id); it != overlay.entries.end()) {
      l.capacity *= it->second;
    }
  }
  return RoadNetwork(network.nodes(), std::move(links), network.params());
}

void write_nodes(const RoadNetwork& network, const std::filesystem::path& path) {
  TableWriter w({"node_id", "lat", "lon"});
  for (const auto& n : network.nodes()) w.row({n.node_id, format_number(n.lat), format_number(n.lon)});
  w.write(path);
}

void write_links(const RoadNetwork& network, const std::filesystem::path& path) {
  TableWriter w({"edge_id", "from", "to", "length_m", "capacity_vph", "freeflow_time_min", "olympic_lane"});
  for (const auto& l : network.links()) {
    w.row({l.edge_id, l.from, l.to, format_number(l.length_m), format_number(l.capacity),
           format_number(l.freeflow_time), l.olympic_lane ? "1" : "0"});
  }
  w.write(path);
}

void write_overlay(const CapacityOverlay& overlay, const std::filesystem::path& path) {
  TableWriter w({"edge_id", "multiplier"});
  for (const auto& [id, m] : overlay.entries) w.row({id, format_number(m)});
  w.write(path);
}

void check_costs(const RoadNetwork& network, std::span<const double> costs) {
  if (costs.size() != network.num_links()) {
    throw DomainError("cost vector size does not match link count");
  }
  for (std::size_t i = 0; i < costs.size(); ++i) {
    if (!(costs[i] > 0.0) || !std::isfinite(costs[i])) {
      throw DomainError("cost of link " + network.link(static_cast<LinkIndex>(i)).edge_id +
                        " must be positive and finite");
    }
  }
}

ShortestPathTree::ShortestPathTree(const RoadNetwork& network, std::span<const double> costs, NodeIndex origin)
    : network_(&network),
      origin_(origin),
      dist_(network.num_nodes(), std::numeric_limits<double>::infinity()),
      pred_(network.num_nodes(), kNoLink) {
  using Entry = std::pair<double, NodeIndex>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;
  std::vector<char> settled(network.num_nodes(), 0);
  dist_[origin] = 0.0;
  heap.emplace(0.0, origin);
  while (!heap.empty()) {
    const auto [d, u] = heap.top();
    heap.pop();
    if (settled[u]) continue;
    settled[u] = 1;
    for (const LinkIndex l : network.out_links(u)) {
      const NodeIndex w = network.head(l);
      if (settled[w] || w == origin) continue;
      const double nd = d + costs[l];
      if (nd < dist_[w]) {
        dist_[w] = nd;
        pred_[w] = l;
        heap.emplace(nd, w);
      } else if (nd == dist_[w] && precedes(l, pred_[w])) {
        pred_[w] = l;
      }
    }
  }
}

// Compares path(tail(a)) + a against path(tail(b)) + b by edge_id sequence.
// Both tails are settled, so their tree paths are final.
bool ShortestPathTree::precedes(LinkIndex a, LinkIndex b) const {
  auto seq_a = path_to(network_->tail(a));
  auto seq_b = path_to(network_->tail(b));
  seq_a.push_back(a);
  seq_b.push_back(b);
  // Link indices follow edge_id order, so index comparison is id comparison.
  return std::ranges::lexicographical_compare(seq_a, seq_b);
}

std::vector<LinkIndex> ShortestPathTree::path_to(NodeIndex dest) const {
  std::vector<LinkIndex> links;
  NodeIndex n = dest;
  while (n != origin_) {
    const LinkIndex l = pred_[n];
    if (l == kNoLink) {
      throw NoPathError(network_->node(origin_).node_id, network_->node(dest).node_id);
    }
    links.push_back(l);
    n = network_->tail(l);
  }
  std::ranges::reverse(links);
  return links;
}

Path shortest_path(const RoadNetwork& network, std::span<const double> costs, const std::string& origin,
                   const std::string& dest) {
  check_costs(network, costs);
  const NodeIndex o = network.node_index(origin);
  const NodeIndex d = network.node_index(dest);
  if (o == d) return {};
  const ShortestPathTree tree(network, costs, o);
  if (!tree.reachable(d)) throw NoPathError(origin, dest);
  return {tree.path_to(d), tree.distance(d)};
}

}  // namespace evtraffic
