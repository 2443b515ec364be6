#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "evtraffic/assign.hpp"
#include "evtraffic/demand.hpp"
#include "evtraffic/netgraph.hpp"

namespace evtraffic {

struct Station {
  std::string station_id;
  double lat = 0.0;
  double lon = 0.0;
  GeoPoint point() const { return {lat, lon}; }
  bool operator==(const Station&) const = default;
};

enum class LineKind { metro, brt };
std::string to_string(LineKind kind);

inline constexpr double kDefaultSegmentCapacity = 30000.0;

struct TransitLine {
  std::string line_id;
  LineKind kind = LineKind::metro;
  std::vector<Station> stations;  // in line order
  double segment_capacity = kDefaultSegmentCapacity;  // persons/hour/direction
  bool operator==(const TransitLine&) const = default;
};

// `line_id,kind,seq,station_id,lat,lon[,segment_capacity]`
std::vector<TransitLine> load_lines(const std::filesystem::path& path);
void write_lines(std::span<const TransitLine> lines, const std::filesystem::path& path);

// Distinct stations across all lines, first occurrence wins, ordered by station_id.
std::vector<Station> all_stations(std::span<const TransitLine> lines);

// Minimum-time used path of an OD, ties broken by edge_id sequence.
const PathFlow& min_time_path(const AssignmentResult& result, const OdKey& od);

// Sum of marginal edge costs along the OD's minimum-time used path.
double marginal_path_cost(const RoadNetwork& network, const AssignmentResult& result, const OdKey& od);

struct EligibleOd {
  OdKey od;
  std::string origin_station;
  std::string dest_station;
  double marginal_path_cost = 0.0;
  double vehicle_flow = 0.0;
  double tourist_vehicles = 0.0;
};

// ODs whose both zone centroids lie within radius_km (closed) of some station.
std::vector<EligibleOd> eligible_ods(const RoadNetwork& network, std::span<const Zone> zones,
                                     std::span<const TransitLine> lines, const AssignmentResult& result,
                                     const DemandMatrix& demand, double radius_km);

enum class StrategyMode { marginal, uniform };
std::string to_string(StrategyMode mode);
StrategyMode parse_strategy_mode(const std::string& text);

struct Reduction {
  OdKey od;
  std::string origin_station;
  std::string dest_station;
  double removed_vph = 0.0;
  double marginal_path_cost = 0.0;
  double tourist_share = 0.0;  // fraction of removed vehicles that are tourist taxis
  bool operator==(const Reduction&) const = default;
};

struct Savings {
  double time_before = 0.0;  // vehicle-minutes
  double time_after = 0.0;
  double saving_fraction = 0.0;
  double removed_vehicles = 0.0;
  double total_vehicles = 0.0;
  double removed_fraction = 0.0;
  double speed_before_kmh = 0.0;
  double speed_after_kmh = 0.0;
  bool converged = true;
};

struct SegmentDelta {
  std::string line_id;
  std::string from_station;
  std::string to_station;
  std::string direction;  // "forward" follows station order
  double delta_persons = 0.0;
  bool over_capacity = false;
  bool operator==(const SegmentDelta&) const = default;
};

struct StrategyPlan {
  double radius_km = 0.0;
  int top_k = 0;
  double reduction_fraction = 0.0;
  StrategyMode mode = StrategyMode::marginal;
  std::vector<Reduction> reductions;  // in rank order for marginal plans

  std::optional<AssignmentResult> reassignment;
  std::optional<Savings> savings;
  std::vector<SegmentDelta> ridership;

  double total_removed() const;
};

// Top-k eligible ODs by marginal path cost (descending, ties by OD key), each
// reduced by fraction of its vehicle flow.
StrategyPlan plan_marginal(std::span<const EligibleOd> eligible, int top_k, double reduction_fraction);

// Removes the same share total/sum(eligible) from every eligible OD.
StrategyPlan plan_uniform(std::span<const EligibleOd> eligible, double total_reduction);

DemandMatrix reduce_demand(const DemandMatrix& demand, std::span<const Reduction> reductions);

// Reassigns the reduced demand with solve_ue and fills in savings.
StrategyPlan apply_and_evaluate(const RoadNetwork& network, std::span<const Zone> zones,
                                const DemandMatrix& demand, const AssignmentResult& before,
                                StrategyPlan plan, const SolverConfig& config = {});

struct RidershipConfig {
  double persons_per_vehicle = 1.0;
  double taxi_occupancy = 2.0;
};

// Removed travellers routed station to station on the fewest-hop transit path.
std::vector<SegmentDelta> ridership_deltas(const StrategyPlan& plan, std::span<const TransitLine> lines,
                                           const RidershipConfig& config = {});

// Fewest-hop station sequence as directed segments. Throws when disconnected.
std::vector<SegmentDelta> transit_route(std::span<const TransitLine> lines, const std::string& from_station,
                                        const std::string& to_station);

void write_reductions(const StrategyPlan& plan, const std::filesystem::path& path);
std::vector<Reduction> load_reductions(const std::filesystem::path& path);
void write_segment_deltas(std::span<const SegmentDelta> deltas, const std::filesystem::path& path);
std::vector<SegmentDelta> load_segment_deltas(const std::filesystem::path& path);

}  // namespace evtraffic
