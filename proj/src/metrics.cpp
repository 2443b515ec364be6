#include "evtraffic/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "evtraffic/error.hpp"

namespace evtraffic {

CommuterIncrement commuter_increment(const AssignmentResult& before, const AssignmentResult& during,
                                     const DemandMatrix& demand) {
  CommuterIncrement out;
  double delta = 0.0;
  double base = 0.0;
  std::vector<std::string> missing;
  for (const auto& [od, rec] : demand.records()) {
    if (!(rec.commuter_persons > 0.0)) continue;
    const auto b = before.od_times.find(od);
    const auto d = during.od_times.find(od);
    if (b == before.od_times.end()) missing.push_back("OD " + to_string(od) + " missing from the before result");
    if (d == during.od_times.end()) missing.push_back("OD " + to_string(od) + " missing from the during result");
    if (b == before.od_times.end() || d == during.od_times.end()) continue;
    delta += (d->second - b->second) * rec.commuter_persons;
    base += b->second * rec.commuter_persons;
    out.weight += rec.commuter_persons;
    out.per_od[od] = b->second > 0.0 ? (d->second - b->second) / b->second * 100.0 : 0.0;
  }
  if (!missing.empty()) throw ValidationError(std::move(missing));
  out.percent = base > 0.0 ? delta / base * 100.0 : 0.0;
  return out;
}

ZoneIncrements zone_increments(const CommuterIncrement& increment, const DemandMatrix& demand) {
  std::map<std::string, std::pair<double, double>> by_origin;
  std::map<std::string, std::pair<double, double>> by_dest;
  for (const auto& [od, pct] : increment.per_od) {
    const auto* rec = demand.find(od);
    if (rec == nullptr) continue;
    const double w = rec->commuter_persons;
    by_origin[od.origin].first += w * pct;
    by_origin[od.origin].second += w;
    by_dest[od.dest].first += w * pct;
    by_dest[od.dest].second += w;
  }
  ZoneIncrements out;
  for (const auto& [z, v] : by_origin) out.by_origin[z] = v.second > 0.0 ? v.first / v.second : 0.0;
  for (const auto& [z, v] : by_dest) out.by_dest[z] = v.second > 0.0 ? v.first / v.second : 0.0;
  return out;
}

double collective_time(const AssignmentResult& result) {
  double t = 0.0;
  for (std::size_t e = 0; e < result.link_volumes.size(); ++e) t += result.link_volumes[e] * result.link_times[e];
  return t;
}

double collective_time_by_paths(const AssignmentResult& result) {
  double t = 0.0;
  for (const auto& p : result.path_flows) t += p.flow * path_time(p.links, result.link_times);
  return t;
}

double average_speed_kmh(const AssignmentResult& result, const RoadNetwork& network) {
  double vehicle_m = 0.0;
  double vehicle_min = 0.0;
  for (std::size_t e = 0; e < result.link_volumes.size(); ++e) {
    vehicle_m += result.link_volumes[e] * network.link(static_cast<LinkIndex>(e)).length_m;
    vehicle_min += result.link_volumes[e] * result.link_times[e];
  }
  if (!(vehicle_min > 0.0)) throw DomainError("average speed undefined: no vehicle time in result");
  return (vehicle_m / 1000.0) / (vehicle_min / 60.0);
}

double quantile(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw std::invalid_argument("quantile of empty sample");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

Distribution distribution(std::span<const double> values, double bin_width) {
  if (values.empty()) throw std::invalid_argument("distribution of empty sample");
  if (bin_width < 0.0) throw std::invalid_argument("bin width must be positive");
  std::vector<double> sorted(values.begin(), values.end());
  std::ranges::sort(sorted);
  Distribution d;
  d.count = sorted.size();
  d.min = sorted.front();
  d.max = sorted.back();
  d.q1 = quantile(sorted, 0.25);
  d.median = quantile(sorted, 0.5);
  d.q3 = quantile(sorted, 0.75);
  d.mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / static_cast<double>(sorted.size());
  if (bin_width > 0.0) {
    const double first = std::floor(d.min / bin_width) * bin_width;
    const auto bins = static_cast<std::size_t>(std::floor((d.max - first) / bin_width)) + 1;
    d.histogram.resize(bins);
    for (std::size_t i = 0; i < bins; ++i) {
      d.histogram[i].lower = first + static_cast<double>(i) * bin_width;
      d.histogram[i].upper = d.histogram[i].lower + bin_width;
    }
    for (const double v : sorted) {
      auto i = static_cast<std::size_t>(std::floor((v - first) / bin_width));
      ++d.histogram[std::min(i, bins - 1)].count;
    }
    for (auto& b : d.histogram) b.log_count = b.count > 0 ? std::log10(static_cast<double>(b.count)) : 0.0;
  }
  return d;
}

std::vector<double> tourist_od_times(const AssignmentResult& result, const DemandMatrix& demand) {
  std::vector<double> out;
  for (const auto& [od, rec] : demand.records()) {
    if (!(rec.tourist_vehicles > 0.0)) continue;
    if (auto it = result.od_times.find(od); it != result.od_times.end()) out.push_back(it->second);
  }
  return out;
}

ImpactReport impact_report(const std::string& label, const RoadNetwork& network, const AssignmentResult& before,
                           const AssignmentResult& during, const DemandMatrix& base_demand,
                           const DemandMatrix& event_demand) {
  ImpactReport r;
  r.scenario = label;
  r.collective_time = collective_time(during);
  if (collective_time(during) > 0.0) r.avg_speed_kmh = average_speed_kmh(during, network);
  r.commuter = commuter_increment(before, during, base_demand);
  r.zones = zone_increments(r.commuter, base_demand);
  if (const auto times = tourist_od_times(during, event_demand); !times.empty()) {
    r.tourist_times = distribution(times, 5.0);
  }
  return r;
}

}  // namespace evtraffic
