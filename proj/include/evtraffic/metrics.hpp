#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "evtraffic/assign.hpp"
#include "evtraffic/demand.hpp"
#include "evtraffic/netgraph.hpp"

namespace evtraffic {

struct CommuterIncrement {
  double percent = 0.0;
  std::map<OdKey, double> per_od;  // percent
  double weight = 0.0;             // sum of commuter persons over the ODs used
};

// Commuter-weighted percentage increment of OD times between two results.
// Only ODs with commuter_persons > 0 take part; each must be in both results.
CommuterIncrement commuter_increment(const AssignmentResult& before, const AssignmentResult& during,
                                     const DemandMatrix& demand);

struct ZoneIncrements {
  std::map<std::string, double> by_origin;
  std::map<std::string, double> by_dest;
};

// Commuter-weighted averages of per-OD increments grouped by origin and by destination zone.
ZoneIncrements zone_increments(const CommuterIncrement& increment, const DemandMatrix& demand);

// Sum of v_e t_e in vehicle-minutes.
double collective_time(const AssignmentResult& result);
// Sum over paths of flow times path time; equals collective_time for consistent results.
double collective_time_by_paths(const AssignmentResult& result);

// Vehicle-km over vehicle-hours. Throws DomainError when no vehicle time is present.
double average_speed_kmh(const AssignmentResult& result, const RoadNetwork& network);

struct Distribution {
  double min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double max = 0.0;
  double mean = 0.0;
  std::size_t count = 0;

  struct Bin {
    double lower = 0.0;
    double upper = 0.0;
    std::size_t count = 0;
    double log_count = 0.0;  // log10(count), 0 for empty bins
  };
  std::vector<Bin> histogram;
};

// Quantiles use linear interpolation between order statistics.
double quantile(std::span<const double> sorted, double q);

// Throws std::invalid_argument on empty input or a negative bin width. A zero
// width skips the histogram.
Distribution distribution(std::span<const double> values, double bin_width = 0.0);

struct ImpactReport {
  std::string scenario;
  double collective_time = 0.0;
  std::optional<double> avg_speed_kmh;  // absent when no vehicle time
  CommuterIncrement commuter;
  ZoneIncrements zones;
  std::optional<Distribution> tourist_times;
};

// Tourist OD times: ODs carrying tourist taxi vehicles in `demand`.
std::vector<double> tourist_od_times(const AssignmentResult& result, const DemandMatrix& demand);

ImpactReport impact_report(const std::string& label, const RoadNetwork& network,
                           const AssignmentResult& before, const AssignmentResult& during,
                           const DemandMatrix& base_demand, const DemandMatrix& event_demand);

}  // namespace evtraffic
