#pragma once

#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "evtraffic/demand.hpp"
#include "evtraffic/netgraph.hpp"

namespace evtraffic {

enum class Scenario { baseline, habit, selfish, altruism, mixed };
std::string to_string(Scenario s);
Scenario parse_scenario(const std::string& text);

struct SolverConfig {
  int max_iterations = 200;
  double relative_gap_tol = 1e-4;
  double line_search_tol = 1e-8;
  // Runtime knobs; not part of the configuration identity.
  int workers = 1;
  std::function<void(int iteration, double gap)> on_iteration;

  void validate() const;
};

// One OD's demand resolved onto network nodes.
struct Trip {
  OdKey od;
  NodeIndex from = 0;
  NodeIndex to = 0;
  double flow = 0.0;
};

// Demand matrix resolved through zone attachment nodes, ordered by OdKey.
// Zero-flow records are dropped.
std::vector<Trip> make_trips(const RoadNetwork& network, std::span<const Zone> zones,
                             const DemandMatrix& demand);

struct PathFlow {
  OdKey od;
  std::vector<LinkIndex> links;
  double flow = 0.0;
  bool operator==(const PathFlow&) const = default;
};

struct AssignmentResult {
  Scenario scenario = Scenario::baseline;
  double lambda = 1.0;
  std::vector<double> link_volumes;
  std::vector<double> link_times;
  std::vector<PathFlow> path_flows;  // sorted by od, then links
  std::map<OdKey, double> od_times;
  std::map<OdKey, double> od_flows;
  double relative_gap = 0.0;
  int iterations = 0;
  bool converged = true;
  // Objective value after each iteration (Beckmann for UE, total time for SO).
  std::vector<double> objective_trace;

  // Used paths of one OD (flow > 0), in stored order.
  std::vector<const PathFlow*> paths_of(const OdKey& od) const;
};

double path_time(std::span<const LinkIndex> links, std::span<const double> link_times);

// Every OD's flow on its shortest path under fixed costs. Unreachable ODs are
// collected into a single NoPathError.
AssignmentResult all_or_nothing(const RoadNetwork& network, std::span<const double> costs,
                                std::span<const Trip> trips, int workers = 1);

// Frank-Wolfe on the Beckmann objective with bisection line search.
AssignmentResult solve_ue(const RoadNetwork& network, std::span<const Trip> trips,
                          const SolverConfig& config = {});

// Same iteration with marginal link costs; minimises total vehicle-minutes.
AssignmentResult solve_so(const RoadNetwork& network, std::span<const Trip> trips,
                          const SolverConfig& config = {});

// Baseline routes kept; delta trips routed on shortest paths at baseline_costs;
// times re-evaluated once on the event network.
AssignmentResult solve_habit(const RoadNetwork& event_network, const AssignmentResult& baseline,
                             std::span<const Trip> delta, std::span<const double> baseline_costs,
                             int workers = 1);

// Habit volumes scaled by (1 - lambda) are held as preload; the lambda share of
// every trip is equilibrated on top of it.
AssignmentResult solve_mixed(const RoadNetwork& event_network, const AssignmentResult& habit,
                             std::span<const Trip> trips, double lambda, const SolverConfig& config = {});

// Sum of link volumes implied by path flows.
std::vector<double> aggregate_path_flows(std::size_t num_links, std::span<const PathFlow> paths);

}  // namespace evtraffic
