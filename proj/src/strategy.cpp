#include "evtraffic/strategy.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <set>

#include "evtraffic/error.hpp"
#include "evtraffic/metrics.hpp"
#include "evtraffic/table.hpp"

namespace evtraffic {
namespace {

LineKind parse_line_kind(const std::string& text) {
  if (text == "metro") return LineKind::metro;
  if (text == "brt") return LineKind::brt;
  throw ValidationError({"unknown line kind '" + text + "'"});
}

struct NearestStation {
  const Station* station = nullptr;
  double distance_km = 0.0;
};

NearestStation nearest_station(GeoPoint p, std::span<const Station> stations) {
  NearestStation best;
  for (const auto& s : stations) {
    const double d = haversine_km(p, s.point());
    if (best.station == nullptr || d < best.distance_km) best = {&s, d};
  }
  return best;
}

}  // namespace

std::string to_string(LineKind kind) { return kind == LineKind::metro ? "metro" : "brt"; }

std::string to_string(StrategyMode mode) { return mode == StrategyMode::marginal ? "marginal" : "uniform"; }

StrategyMode parse_strategy_mode(const std::string& text) {
  if (text == "marginal") return StrategyMode::marginal;
  if (text == "uniform") return StrategyMode::uniform;
  throw ValidationError({"unknown strategy mode '" + text + "'"});
}

std::vector<TransitLine> load_lines(const std::filesystem::path& path) {
  const auto t = Table::read(path);
  t.require_columns({"line_id", "kind", "seq", "station_id", "lat", "lon"}, {"segment_capacity"});
  struct Stop {
    long seq;
    Station station;
  };
  std::map<std::string, std::pair<TransitLine, std::vector<Stop>>> lines;
  std::vector<std::string> order;  // file order of first appearance
  std::vector<std::string> problems;
  for (const auto& row : t.rows()) {
    try {
      const auto& id = t.cell(row, "line_id");
      auto& [line, stops] = lines[id];
      if (line.line_id.empty()) {
        order.push_back(id);
        line.line_id = id;
        line.kind = parse_line_kind(t.cell(row, "kind"));
      }
      if (auto cap = t.optional_number(row, "segment_capacity")) {
        if (!(*cap > 0.0)) throw ValidationError({t.where(row) + ": segment_capacity must be > 0"});
        line.segment_capacity = *cap;
      }
      stops.push_back({t.integer(row, "seq"), {t.cell(row, "station_id"), t.number(row, "lat"), t.number(row, "lon")}});
    } catch (const ValidationError& e) {
      problems.insert(problems.end(), e.violations().begin(), e.violations().end());
    }
  }
  std::vector<TransitLine> out;
  for (const auto& id : order) {
    auto& [line, stops] = lines.at(id);
    std::ranges::stable_sort(stops, {}, &Stop::seq);
    for (std::size_t i = 0; i < stops.size(); ++i) {
      if (i > 0 && stops[i].seq == stops[i - 1].seq) problems.push_back("line " + id + " repeats seq " + std::to_string(stops[i].seq));
      if (i > 0 && stops[i].station.station_id == stops[i - 1].station.station_id) {
        problems.push_back("line " + id + " has consecutive duplicate station " + stops[i].station.station_id);
      }
      line.stations.push_back(stops[i].station);
    }
    if (line.stations.size() < 2) problems.push_back("line " + id + " needs at least two stations");
    out.push_back(std::move(line));
  }
  if (!problems.empty()) throw ValidationError(std::move(problems));
  return out;
}

void write_lines(std::span<const TransitLine> lines, const std::filesystem::path& path) {
  TableWriter w({"line_id", "kind", "seq", "station_id", "lat", "lon", "segment_capacity"});
  for (const auto& l : lines) {
    for (std::size_t i = 0; i < l.stations.size(); ++i) {
      const auto& s = l.stations[i];
      w.row({l.line_id, to_string(l.kind), std::to_string(i + 1), s.station_id, format_number(s.lat),
             format_number(s.lon), format_number(l.segment_capacity)});
    }
  }
  w.write(path);
}

std::vector<Station> all_stations(std::span<const TransitLine> lines) {
  std::map<std::string, Station> unique;
  for (const auto& l : lines) {
    for (const auto& s : l.stations) unique.emplace(s.station_id, s);
  }
  std::vector<Station> out;
  for (auto& [id, s] : unique) out.push_back(s);
  return out;
}

const PathFlow& min_time_path(const AssignmentResult& result, const OdKey& od) {
  const auto paths = result.paths_of(od);
  if (paths.empty()) throw ValidationError({"OD " + to_string(od) + " has no used path in the result"});
  const PathFlow* best = paths.front();
  double best_time = path_time(best->links, result.link_times);
  for (std::size_t i = 1; i < paths.size(); ++i) {
    const double t = path_time(paths[i]->links, result.link_times);
    // paths_of is ordered by link sequence, so the first minimum is the tie winner.
    if (t < best_time) {
      best = paths[i];
      best_time = t;
    }
  }
  return *best;
}

double marginal_path_cost(const RoadNetwork& network, const AssignmentResult& result, const OdKey& od) {
  const auto& path = min_time_path(result, od);
  double mc = 0.0;
  for (const auto l : path.links) mc += marginal_edge_cost(network.link(l), result.link_volumes[l], network.params());
  return mc;
}

std::vector<EligibleOd> eligible_ods(const RoadNetwork& network, std::span<const Zone> zones,
                                     std::span<const TransitLine> lines, const AssignmentResult& result,
                                     const DemandMatrix& demand, double radius_km) {
  const auto stations = all_stations(lines);
  std::vector<EligibleOd> out;
  if (stations.empty()) return out;
  std::map<std::string, NearestStation> near;
  for (const auto& z : zones) {
    const auto ns = nearest_station(z.point(), stations);
    if (ns.distance_km <= radius_km) near.emplace(z.zone_id, ns);
  }
  for (const auto& [od, flow] : result.od_flows) {
    if (!(flow > 0.0)) continue;
    const auto o = near.find(od.origin);
    const auto d = near.find(od.dest);
    if (o == near.end() || d == near.end()) continue;
    if (result.paths_of(od).empty()) continue;
    EligibleOd e;
    e.od = od;
    e.origin_station = o->second.station->station_id;
    e.dest_station = d->second.station->station_id;
    e.marginal_path_cost = marginal_path_cost(network, result, od);
    e.vehicle_flow = flow;
    if (const auto* rec = demand.find(od)) e.tourist_vehicles = std::min(rec->tourist_vehicles, flow);
    out.push_back(std::move(e));
  }
  return out;
}

double StrategyPlan::total_removed() const {
  double s = 0.0;
  for (const auto& r : reductions) s += r.removed_vph;
  return s;
}

StrategyPlan plan_marginal(std::span<const EligibleOd> eligible, int top_k, double reduction_fraction) {
  if (top_k < 1) throw ValidationError({"top_k must be at least 1"});
  if (!(reduction_fraction >= 0.0 && reduction_fraction <= 1.0)) {
    throw ValidationError({"reduction fraction must be in [0,1]"});
  }
  std::vector<const EligibleOd*> ranked;
  for (const auto& e : eligible) ranked.push_back(&e);
  std::ranges::sort(ranked, [](const EligibleOd* a, const EligibleOd* b) {
    if (a->marginal_path_cost != b->marginal_path_cost) return a->marginal_path_cost > b->marginal_path_cost;
    return a->od < b->od;
  });
  StrategyPlan plan;
  plan.top_k = top_k;
  plan.reduction_fraction = reduction_fraction;
  plan.mode = StrategyMode::marginal;
  const auto n = std::min<std::size_t>(static_cast<std::size_t>(top_k), ranked.size());
  for (std::size_t i = 0; i < n; ++i) {
    const auto& e = *ranked[i];
    const double removed = reduction_fraction * e.vehicle_flow;
    if (!(removed > 0.0)) continue;
    plan.reductions.push_back({e.od, e.origin_station, e.dest_station, removed, e.marginal_path_cost,
                               e.vehicle_flow > 0.0 ? e.tourist_vehicles / e.vehicle_flow : 0.0});
  }
  return plan;
}

StrategyPlan plan_uniform(std::span<const EligibleOd> eligible, double total_reduction) {
  double eligible_flow = 0.0;
  for (const auto& e : eligible) eligible_flow += e.vehicle_flow;
  if (!(total_reduction >= 0.0) || total_reduction > eligible_flow * (1.0 + 1e-12)) {
    throw ValidationError({"uniform reduction of " + format_number(total_reduction) +
                           " vehicles exceeds eligible flow " + format_number(eligible_flow)});
  }
  StrategyPlan plan;
  plan.mode = StrategyMode::uniform;
  plan.top_k = static_cast<int>(eligible.size());
  if (!(total_reduction > 0.0)) return plan;
  const double share = std::min(1.0, total_reduction / eligible_flow);
  plan.reduction_fraction = share;
  for (const auto& e : eligible) {
    const double removed = share * e.vehicle_flow;
    if (!(removed > 0.0)) continue;
    plan.reductions.push_back({e.od, e.origin_station, e.dest_station, removed, e.marginal_path_cost,
                               e.vehicle_flow > 0.0 ? e.tourist_vehicles / e.vehicle_flow : 0.0});
  }
  return plan;
}

DemandMatrix reduce_demand(const DemandMatrix& demand, std::span<const Reduction> reductions) {
  std::map<OdKey, double> removed;
  for (const auto& r : reductions) removed[r.od] += r.removed_vph;
  DemandMatrix out(demand.hour(), demand.day_scale());
  std::vector<std::string> problems;
  for (auto [key, rec] : demand.records()) {
    if (auto it = removed.find(key); it != removed.end()) {
      if (it->second > rec.vehicle_flow * (1.0 + 1e-12)) {
        problems.push_back("reduction for " + to_string(key) + " exceeds its vehicle flow");
        continue;
      }
      const double keep = rec.vehicle_flow > 0.0 ? std::max(0.0, 1.0 - it->second / rec.vehicle_flow) : 0.0;
      rec.vehicle_flow = std::max(0.0, rec.vehicle_flow - it->second);
      rec.person_flow *= keep;
      rec.commuter_persons *= keep;
      rec.tourist_vehicles *= keep;
      removed.erase(it);
    }
    out.insert(std::move(rec));
  }
  for (const auto& [key, v] : removed) problems.push_back("reduction for " + to_string(key) + " has no demand");
  if (!problems.empty()) throw ValidationError(std::move(problems));
  return out;
}

StrategyPlan apply_and_evaluate(const RoadNetwork& network, std::span<const Zone> zones, const DemandMatrix& demand,
                                const AssignmentResult& before, StrategyPlan plan, const SolverConfig& config) {
  const auto reduced = reduce_demand(demand, plan.reductions);
  const auto trips = make_trips(network, zones, reduced);
  AssignmentResult after = plan.reductions.empty() ? before : solve_ue(network, trips, config);

  Savings s;
  s.time_before = collective_time(before);
  s.time_after = collective_time(after);
  s.saving_fraction = s.time_before > 0.0 ? (s.time_before - s.time_after) / s.time_before : 0.0;
  s.removed_vehicles = plan.total_removed();
  s.total_vehicles = demand.total_vehicles();
  s.removed_fraction = s.total_vehicles > 0.0 ? s.removed_vehicles / s.total_vehicles : 0.0;
  if (s.time_before > 0.0) s.speed_before_kmh = average_speed_kmh(before, network);
  if (s.time_after > 0.0) s.speed_after_kmh = average_speed_kmh(after, network);
  s.converged = after.converged;
  plan.savings = s;
  plan.reassignment = std::move(after);
  return plan;
}

std::vector<SegmentDelta> transit_route(std::span<const TransitLine> lines, const std::string& from_station,
                                        const std::string& to_station) {
  if (from_station == to_station) return {};
  struct Hop {
    std::string to;
    SegmentDelta segment;
  };
  std::map<std::string, std::vector<Hop>> adjacency;
  for (const auto& l : lines) {
    for (std::size_t i = 0; i + 1 < l.stations.size(); ++i) {
      const auto& a = l.stations[i].station_id;
      const auto& b = l.stations[i + 1].station_id;
      adjacency[a].push_back({b, {l.line_id, a, b, "forward", 0.0, false}});
      adjacency[b].push_back({a, {l.line_id, b, a, "reverse", 0.0, false}});
    }
  }
  for (auto& [s, hops] : adjacency) {
    std::ranges::sort(hops, [](const Hop& x, const Hop& y) {
      return std::tie(x.to, x.segment.line_id, x.segment.direction) < std::tie(y.to, y.segment.line_id, y.segment.direction);
    });
  }
  std::map<std::string, const Hop*> came_from;
  std::deque<std::string> queue{from_station};
  std::set<std::string> seen{from_station};
  while (!queue.empty() && !seen.contains(to_station)) {
    const auto s = queue.front();
    queue.pop_front();
    for (const auto& hop : adjacency[s]) {
      if (seen.insert(hop.to).second) {
        came_from[hop.to] = &hop;
        queue.push_back(hop.to);
      }
    }
  }
  if (!seen.contains(to_station)) {
    throw ValidationError({"no transit connection between stations " + from_station + " and " + to_station});
  }
  std::vector<SegmentDelta> route;
  for (std::string s = to_station; s != from_station; s = came_from.at(s)->segment.from_station) {
    route.push_back(came_from.at(s)->segment);
  }
  std::ranges::reverse(route);
  return route;
}

std::vector<SegmentDelta> ridership_deltas(const StrategyPlan& plan, std::span<const TransitLine> lines,
                                           const RidershipConfig& config) {
  std::map<std::tuple<std::string, std::string, std::string>, SegmentDelta> acc;
  for (const auto& r : plan.reductions) {
    const double persons = r.removed_vph * ((1.0 - r.tourist_share) * config.persons_per_vehicle +
                                            r.tourist_share * config.taxi_occupancy);
    for (auto seg : transit_route(lines, r.origin_station, r.dest_station)) {
      auto& slot = acc[{seg.line_id, seg.from_station, seg.to_station}];
      if (slot.line_id.empty()) slot = seg;
      slot.delta_persons += persons;
    }
  }
  std::map<std::string, double> capacity;
  for (const auto& l : lines) capacity[l.line_id] = l.segment_capacity;
  std::vector<SegmentDelta> out;
  for (auto& [key, seg] : acc) {
    seg.over_capacity = seg.delta_persons > capacity[seg.line_id];
    out.push_back(std::move(seg));
  }
  return out;
}

void write_reductions(const StrategyPlan& plan, const std::filesystem::path& path) {
  TableWriter w({"origin", "dest", "removed_vph", "mc_p_min", "origin_station", "dest_station", "tourist_share"});
  for (const auto& r : plan.reductions) {
    w.row({r.od.origin, r.od.dest, format_number(r.removed_vph), format_number(r.marginal_path_cost),
           r.origin_station, r.dest_station, format_number(r.tourist_share)});
  }
  w.write(path);
}

std::vector<Reduction> load_reductions(const std::filesystem::path& path) {
  const auto t = Table::read(path);
  t.require_columns({"origin", "dest", "removed_vph", "mc_p_min"}, {"origin_station", "dest_station", "tourist_share"});
  std::vector<Reduction> out;
  for (const auto& row : t.rows()) {
    Reduction r;
    r.od = {t.cell(row, "origin"), t.cell(row, "dest")};
    r.removed_vph = t.number(row, "removed_vph");
    r.marginal_path_cost = t.number(row, "mc_p_min");
    if (t.has_column("origin_station")) r.origin_station = t.cell(row, "origin_station");
    if (t.has_column("dest_station")) r.dest_station = t.cell(row, "dest_station");
    r.tourist_share = t.optional_number(row, "tourist_share").value_or(0.0);
    out.push_back(std::move(r));
  }
  return out;
}

void write_segment_deltas(std::span<const SegmentDelta> deltas, const std::filesystem::path& path) {
  TableWriter w({"line_id", "from_station", "to_station", "direction", "delta_persons", "over_capacity"});
  for (const auto& d : deltas) {
    w.row({d.line_id, d.from_station, d.to_station, d.direction, format_number(d.delta_persons),
           d.over_capacity ? "1" : "0"});
  }
  w.write(path);
}

std::vector<SegmentDelta> load_segment_deltas(const std::filesystem::path& path) {
  const auto t = Table::read(path);
  t.require_columns({"line_id", "from_station", "to_station", "direction", "delta_persons", "over_capacity"});
  std::vector<SegmentDelta> out;
  for (const auto& row : t.rows()) {
    out.push_back({t.cell(row, "line_id"), t.cell(row, "from_station"), t.cell(row, "to_station"),
                   t.cell(row, "direction"), t.number(row, "delta_persons"), t.cell(row, "over_capacity") == "1"});
  }
  return out;
}

}  // namespace evtraffic
