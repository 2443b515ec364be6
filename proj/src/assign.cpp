#include "evtraffic/assign.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "evtraffic/error.hpp"

namespace evtraffic {
namespace {

enum class CostKind { travel_time, marginal };

constexpr double kConjugateMargin = 0.01;

// Per-trip shortest paths for one cost snapshot.
struct AonOutput {
  std::vector<std::vector<LinkIndex>> paths;  // indexed like trips
  std::vector<double> path_costs;
  std::vector<double> volumes;
};

// Groups trips by origin node; runs one tree per origin, optionally on
// several threads. Aggregation is sequential in trip order, so results do not
// depend on the worker count.
class Router {
 public:
  Router(const RoadNetwork& network, std::span<const Trip> trips, int workers)
      : network_(network), trips_(trips), workers_(std::max(1, workers)) {
    for (std::size_t i = 0; i < trips.size(); ++i) {
      auto it = std::ranges::find(origins_, trips[i].from);
      if (it == origins_.end()) {
        origins_.push_back(trips[i].from);
        members_.emplace_back();
        it = origins_.end() - 1;
      }
      members_[static_cast<std::size_t>(it - origins_.begin())].push_back(i);
    }
  }

  AonOutput run(std::span<const double> costs) const {
    check_costs(network_, costs);
    AonOutput out;
    out.paths.resize(trips_.size());
    out.path_costs.assign(trips_.size(), 0.0);
    std::vector<char> unreachable(trips_.size(), 0);

    auto work = [&](std::size_t k) {
      const ShortestPathTree tree(network_, costs, origins_[k]);
      for (const std::size_t i : members_[k]) {
        const auto& t = trips_[i];
        if (t.from == t.to) continue;
        if (!tree.reachable(t.to)) {
          unreachable[i] = 1;
          continue;
        }
        out.paths[i] = tree.path_to(t.to);
        out.path_costs[i] = tree.distance(t.to);
      }
    };
    const auto n = origins_.size();
    const auto threads = std::min<std::size_t>(static_cast<std::size_t>(workers_), n);
    if (threads <= 1) {
      for (std::size_t k = 0; k < n; ++k) work(k);
    } else {
      std::vector<std::jthread> pool;
      pool.reserve(threads);
      for (std::size_t w = 0; w < threads; ++w) {
        pool.emplace_back([&, w] {
          for (std::size_t k = w; k < n; k += threads) work(k);
        });
      }
    }

    std::vector<std::pair<std::string, std::string>> missing;
    for (std::size_t i = 0; i < trips_.size(); ++i) {
      if (unreachable[i]) missing.emplace_back(trips_[i].od.origin, trips_[i].od.dest);
    }
    if (!missing.empty()) throw NoPathError(std::move(missing));

    out.volumes.assign(network_.num_links(), 0.0);
    for (std::size_t i = 0; i < trips_.size(); ++i) {
      for (const LinkIndex l : out.paths[i]) out.volumes[l] += trips_[i].flow;
    }
    return out;
  }

 private:
  const RoadNetwork& network_;
  std::span<const Trip> trips_;
  int workers_;
  std::vector<NodeIndex> origins_;
  std::vector<std::vector<std::size_t>> members_;
};

// Path flows of one trip, kept as a small list.
using TripPaths = std::vector<std::pair<std::vector<LinkIndex>, double>>;

void add_path(TripPaths& paths, const std::vector<LinkIndex>& links, double flow) {
  for (auto& [p, f] : paths) {
    if (p == links) {
      f += flow;
      return;
    }
  }
  paths.emplace_back(links, flow);
}

std::vector<double> total_volumes(std::span<const double> preload, std::span<const double> x) {
  std::vector<double> v(x.begin(), x.end());
  if (!preload.empty()) {
    for (std::size_t e = 0; e < v.size(); ++e) v[e] = preload[e] + x[e];
  }
  return v;
}

double link_cost(const RoadNetwork& net, LinkIndex e, double volume, CostKind kind) {
  return kind == CostKind::travel_time ? bpr_time(net.link(e), volume, net.params())
                                       : marginal_edge_cost(net.link(e), volume, net.params());
}

std::vector<double> link_costs(const RoadNetwork& net, std::span<const double> volumes, CostKind kind) {
  return kind == CostKind::travel_time ? net.link_times(volumes) : net.marginal_costs(volumes);
}

// Derivative of link_cost in volume, the diagonal of the objective's Hessian.
double link_cost_slope(const RoadNetwork& net, LinkIndex e, double volume, CostKind kind) {
  const auto& link = net.link(e);
  const auto& p = net.params();
  const double voc = volume / link.capacity;
  const double dt = p.f_s * p.alpha * p.beta * std::pow(voc, p.beta - 1.0) / link.capacity * link.freeflow_time;
  if (kind == CostKind::travel_time) return dt;
  return dt + p.f_s * p.alpha * p.beta * p.beta * std::pow(voc, p.beta - 1.0) / link.capacity * link.freeflow_time;
}

double objective(const RoadNetwork& net, std::span<const double> volumes, CostKind kind) {
  double z = 0.0;
  for (std::size_t e = 0; e < volumes.size(); ++e) {
    const auto& link = net.link(static_cast<LinkIndex>(e));
    z += kind == CostKind::travel_time ? bpr_integral(link, volumes[e], net.params())
                                       : volumes[e] * bpr_time(link, volumes[e], net.params());
  }
  return z;
}

// Step size minimising the objective along x + s (y - x), s in [0, 1].
double line_search(const RoadNetwork& net, std::span<const double> preload, std::span<const double> x,
                   std::span<const double> y, CostKind kind, double tol) {
  auto slope = [&](double s) {
    double g = 0.0;
    for (std::size_t e = 0; e < x.size(); ++e) {
      const double d = y[e] - x[e];
      if (d == 0.0) continue;
      const double v = std::max(0.0, (preload.empty() ? 0.0 : preload[e]) + x[e] + s * d);
      g += d * link_cost(net, static_cast<LinkIndex>(e), v, kind);
    }
    return g;
  };
  if (slope(0.0) >= 0.0) return 0.0;
  if (slope(1.0) <= 0.0) return 1.0;
  double lo = 0.0;
  double hi = 1.0;
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    (slope(mid) < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

struct Equilibrium {
  std::vector<double> x;            // assignable flow only, without preload
  std::vector<TripPaths> paths;
  std::vector<double> final_costs;  // link costs at the final volumes
  std::vector<double> shortest;     // per-trip shortest cost at final_costs
  double gap = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> trace;
};

Equilibrium equilibrate(const RoadNetwork& net, std::span<const Trip> trips, std::span<const double> preload,
                        CostKind kind, const SolverConfig& config) {
  config.validate();
  const Router router(net, trips, config.workers);
  Equilibrium eq;
  eq.paths.resize(trips.size());

  const std::vector<double> zero(net.num_links(), 0.0);
  {
    const auto start = router.run(link_costs(net, total_volumes(preload, zero), kind));
    eq.x = start.volumes;
    for (std::size_t i = 0; i < trips.size(); ++i) eq.paths[i].emplace_back(start.paths[i], trips[i].flow);
  }

  std::vector<double> target;
  std::vector<TripPaths> target_paths(trips.size());
  while (true) {
    const auto total = total_volumes(preload, eq.x);
    eq.final_costs = link_costs(net, total, kind);
    const auto aon = router.run(eq.final_costs);
    eq.shortest = aon.path_costs;

    double current = 0.0;
    double bound = 0.0;
    for (std::size_t e = 0; e < eq.x.size(); ++e) {
      current += eq.x[e] * eq.final_costs[e];
      bound += aon.volumes[e] * eq.final_costs[e];
    }
    eq.gap = current > 0.0 ? std::max(0.0, (current - bound) / current) : 0.0;
    if (eq.gap <= config.relative_gap_tol) {
      eq.converged = true;
      break;
    }
    if (eq.iterations >= config.max_iterations) break;

    // Conjugate direction: blend the previous target with the new all-or-nothing
    // point so the step is conjugate to the last one under the diagonal Hessian.
    double blend = 0.0;
    if (!target.empty()) {
      double num = 0.0;
      double den = 0.0;
      for (std::size_t e = 0; e < eq.x.size(); ++e) {
        const double h = link_cost_slope(net, static_cast<LinkIndex>(e), total[e], kind);
        const double prev = target[e] - eq.x[e];
        num += prev * h * (aon.volumes[e] - eq.x[e]);
        den += prev * h * (aon.volumes[e] - target[e]);
      }
      if (den != 0.0) {
        blend = std::clamp(num / den, 0.0, 1.0 - kConjugateMargin);
      }
    }
    std::vector<double> next_target(eq.x.size());
    for (std::size_t e = 0; e < eq.x.size(); ++e) {
      next_target[e] = blend > 0.0 ? blend * target[e] + (1.0 - blend) * aon.volumes[e] : aon.volumes[e];
    }
    double descent = 0.0;
    for (std::size_t e = 0; e < eq.x.size(); ++e) descent += (next_target[e] - eq.x[e]) * eq.final_costs[e];
    if (blend > 0.0 && !(descent < 0.0)) {
      blend = 0.0;
      next_target = aon.volumes;
    }
    for (std::size_t i = 0; i < trips.size(); ++i) {
      auto& tp = target_paths[i];
      if (blend > 0.0) {
        for (auto& [p, f] : tp) f *= blend;
        std::erase_if(tp, [](const auto& pf) { return !(pf.second > 0.0); });
      } else {
        tp.clear();
      }
      add_path(tp, aon.paths[i], (1.0 - blend) * trips[i].flow);
    }
    target = std::move(next_target);

    const double step = line_search(net, preload, eq.x, target, kind, config.line_search_tol);
    for (std::size_t e = 0; e < eq.x.size(); ++e) eq.x[e] += step * (target[e] - eq.x[e]);
    for (std::size_t i = 0; i < trips.size(); ++i) {
      auto& paths = eq.paths[i];
      for (auto& [p, f] : paths) f *= (1.0 - step);
      std::erase_if(paths, [](const auto& pf) { return !(pf.second > 0.0); });
      for (const auto& [p, f] : target_paths[i]) add_path(paths, p, step * f);
    }
    ++eq.iterations;
    eq.trace.push_back(objective(net, total_volumes(preload, eq.x), kind));
    if (config.on_iteration) config.on_iteration(eq.iterations, eq.gap);
  }
  return eq;
}

void collect_paths(AssignmentResult& r, std::span<const Trip> trips, const std::vector<TripPaths>& paths) {
  for (std::size_t i = 0; i < trips.size(); ++i) {
    for (const auto& [links, flow] : paths[i]) {
      if (flow > 0.0) r.path_flows.push_back({trips[i].od, links, flow});
    }
  }
}

void sort_paths(std::vector<PathFlow>& paths) {
  std::ranges::sort(paths, [](const PathFlow& a, const PathFlow& b) {
    if (a.od != b.od) return a.od < b.od;
    return a.links < b.links;
  });
}

// Merges path lists, adding flows of identical (od, links) entries.
std::vector<PathFlow> merge_paths(std::vector<PathFlow> paths) {
  sort_paths(paths);
  std::vector<PathFlow> out;
  for (auto& p : paths) {
    if (!out.empty() && out.back().od == p.od && out.back().links == p.links) {
      out.back().flow += p.flow;
    } else {
      out.push_back(std::move(p));
    }
  }
  return out;
}

std::map<OdKey, double> flow_weighted_times(const std::vector<PathFlow>& paths, std::span<const double> times) {
  std::map<OdKey, std::pair<double, double>> acc;
  for (const auto& p : paths) {
    auto& [ft, f] = acc[p.od];
    ft += p.flow * path_time(p.links, times);
    f += p.flow;
  }
  std::map<OdKey, double> out;
  for (const auto& [od, v] : acc) out[od] = v.second > 0.0 ? v.first / v.second : 0.0;
  return out;
}

AssignmentResult solve(const RoadNetwork& network, std::span<const Trip> trips, CostKind kind,
                       const SolverConfig& config) {
  if (trips.empty()) throw ValidationError({"demand is empty"});
  auto eq = equilibrate(network, trips, {}, kind, config);
  AssignmentResult r;
  r.scenario = kind == CostKind::travel_time ? Scenario::selfish : Scenario::altruism;
  r.link_volumes = std::move(eq.x);
  r.link_times = network.link_times(r.link_volumes);
  collect_paths(r, trips, eq.paths);
  sort_paths(r.path_flows);
  for (std::size_t i = 0; i < trips.size(); ++i) r.od_flows[trips[i].od] += trips[i].flow;
  if (kind == CostKind::travel_time) {
    for (std::size_t i = 0; i < trips.size(); ++i) r.od_times[trips[i].od] = eq.shortest[i];
  } else {
    r.od_times = flow_weighted_times(r.path_flows, r.link_times);
  }
  r.relative_gap = eq.gap;
  r.iterations = eq.iterations;
  r.converged = eq.converged;
  r.objective_trace = std::move(eq.trace);
  return r;
}

}  // namespace

std::string to_string(Scenario s) {
  switch (s) {
    case Scenario::baseline: return "baseline";
    case Scenario::habit: return "habit";
    case Scenario::selfish: return "selfish";
    case Scenario::altruism: return "altruism";
    case Scenario::mixed: return "mixed";
  }
  return "baseline";
}

Scenario parse_scenario(const std::string& text) {
  for (auto s : {Scenario::baseline, Scenario::habit, Scenario::selfish, Scenario::altruism, Scenario::mixed}) {
    if (to_string(s) == text) return s;
  }
  throw ValidationError({"unknown scenario '" + text + "'"});
}

void SolverConfig::validate() const {
  std::vector<std::string> problems;
  if (max_iterations <= 0) problems.push_back("solver.max_iterations must be positive");
  if (!(relative_gap_tol > 0.0)) problems.push_back("solver.relative_gap_tol must be positive");
  if (!(line_search_tol > 0.0)) problems.push_back("solver.line_search_tol must be positive");
  if (!problems.empty()) throw ValidationError(std::move(problems));
}

std::vector<Trip> make_trips(const RoadNetwork& network, std::span<const Zone> zones, const DemandMatrix& demand) {
  std::map<std::string, NodeIndex> attach;
  std::vector<std::string> problems;
  for (const auto& z : zones) {
    if (auto n = network.find_node(z.attach_node)) {
      attach.emplace(z.zone_id, *n);
    } else {
      problems.push_back("zone " + z.zone_id + " attaches to unknown node " + z.attach_node);
    }
  }
  std::vector<Trip> trips;
  for (const auto& [key, r] : demand.records()) {
    const auto o = attach.find(key.origin);
    const auto d = attach.find(key.dest);
    if (o == attach.end()) problems.push_back("demand references unknown zone " + key.origin);
    if (d == attach.end()) problems.push_back("demand references unknown zone " + key.dest);
    if (o == attach.end() || d == attach.end() || !(r.vehicle_flow > 0.0)) continue;
    trips.push_back({key, o->second, d->second, r.vehicle_flow});
  }
  if (!problems.empty()) throw ValidationError(std::move(problems));
  return trips;
}

std::vector<const PathFlow*> AssignmentResult::paths_of(const OdKey& od) const {
  std::vector<const PathFlow*> out;
  auto it = std::ranges::lower_bound(path_flows, od, {}, &PathFlow::od);
  for (; it != path_flows.end() && it->od == od; ++it) {
    if (it->flow > 0.0) out.push_back(&*it);
  }
  return out;
}

double path_time(std::span<const LinkIndex> links, std::span<const double> link_times) {
  double t = 0.0;
  for (const auto l : links) t += link_times[l];
  return t;
}

std::vector<double> aggregate_path_flows(std::size_t num_links, std::span<const PathFlow> paths) {
  std::vector<double> v(num_links, 0.0);
  for (const auto& p : paths) {
    for (const auto l : p.links) v[l] += p.flow;
  }
  return v;
}

AssignmentResult all_or_nothing(const RoadNetwork& network, std::span<const double> costs,
                                std::span<const Trip> trips, int workers) {
  const Router router(network, trips, workers);
  auto aon = router.run(costs);
  AssignmentResult r;
  r.link_volumes = std::move(aon.volumes);
  r.link_times = network.link_times(r.link_volumes);
  for (std::size_t i = 0; i < trips.size(); ++i) {
    r.path_flows.push_back({trips[i].od, aon.paths[i], trips[i].flow});
    r.od_flows[trips[i].od] += trips[i].flow;
  }
  r.path_flows = merge_paths(std::move(r.path_flows));
  r.od_times = flow_weighted_times(r.path_flows, r.link_times);
  return r;
}

AssignmentResult solve_ue(const RoadNetwork& network, std::span<const Trip> trips, const SolverConfig& config) {
  return solve(network, trips, CostKind::travel_time, config);
}

AssignmentResult solve_so(const RoadNetwork& network, std::span<const Trip> trips, const SolverConfig& config) {
  return solve(network, trips, CostKind::marginal, config);
}

AssignmentResult solve_habit(const RoadNetwork& event_network, const AssignmentResult& baseline,
                             std::span<const Trip> delta, std::span<const double> baseline_costs, int workers) {
  if (baseline.link_volumes.size() != event_network.num_links()) {
    throw ValidationError({"baseline result does not match the event network"});
  }
  AssignmentResult r;
  r.scenario = Scenario::habit;
  r.link_volumes = baseline.link_volumes;
  r.path_flows = baseline.path_flows;
  r.od_flows = baseline.od_flows;
  if (!delta.empty()) {
    const Router router(event_network, delta, workers);
    const auto aon = router.run(baseline_costs);
    for (std::size_t e = 0; e < r.link_volumes.size(); ++e) r.link_volumes[e] += aon.volumes[e];
    for (std::size_t i = 0; i < delta.size(); ++i) {
      r.path_flows.push_back({delta[i].od, aon.paths[i], delta[i].flow});
      r.od_flows[delta[i].od] += delta[i].flow;
    }
    r.path_flows = merge_paths(std::move(r.path_flows));
  }
  r.link_times = event_network.link_times(r.link_volumes);
  r.od_times = flow_weighted_times(r.path_flows, r.link_times);
  return r;
}

AssignmentResult solve_mixed(const RoadNetwork& event_network, const AssignmentResult& habit,
                             std::span<const Trip> trips, double lambda, const SolverConfig& config) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw ValidationError({"selfish fraction lambda must be in [0,1], got " + std::to_string(lambda)});
  }
  if (habit.link_volumes.size() != event_network.num_links()) {
    throw ValidationError({"habit result does not match the event network"});
  }
  AssignmentResult r;
  r.scenario = Scenario::mixed;
  r.lambda = lambda;
  for (const auto& t : trips) r.od_flows[t.od] += t.flow;

  std::vector<double> preload(habit.link_volumes.size());
  for (std::size_t e = 0; e < preload.size(); ++e) preload[e] = habit.link_volumes[e] * (1.0 - lambda);
  for (const auto& p : habit.path_flows) {
    if (lambda < 1.0) r.path_flows.push_back({p.od, p.links, p.flow * (1.0 - lambda)});
  }

  if (lambda == 0.0) {
    r.link_volumes = std::move(preload);
    r.link_times = event_network.link_times(r.link_volumes);
    r.od_times = habit.od_times;
    r.path_flows = merge_paths(std::move(r.path_flows));
    return r;
  }

  std::vector<Trip> selfish(trips.begin(), trips.end());
  for (auto& t : selfish) t.flow *= lambda;
  auto eq = equilibrate(event_network, selfish, preload, CostKind::travel_time, config);

  r.link_volumes = total_volumes(preload, eq.x);
  r.link_times = event_network.link_times(r.link_volumes);
  collect_paths(r, selfish, eq.paths);
  r.path_flows = merge_paths(std::move(r.path_flows));
  for (std::size_t i = 0; i < selfish.size(); ++i) {
    const auto& od = selfish[i].od;
    const auto h = habit.od_times.find(od);
    const double habit_time = h != habit.od_times.end() ? h->second : eq.shortest[i];
    r.od_times[od] = (1.0 - lambda) * habit_time + lambda * eq.shortest[i];
  }
  r.relative_gap = eq.gap;
  r.iterations = eq.iterations;
  r.converged = eq.converged;
  r.objective_trace = std::move(eq.trace);
  return r;
}

}  // namespace evtraffic
