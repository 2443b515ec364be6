#include "evtraffic/demand.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "evtraffic/error.hpp"
#include "evtraffic/table.hpp"

namespace evtraffic {
namespace {

bool valid_flow(double v) { return std::isfinite(v) && v >= 0.0; }

std::string od_problem(const OdRecord& r) {
  if (!valid_flow(r.vehicle_flow) || !valid_flow(r.person_flow) || !valid_flow(r.commuter_persons) ||
      !valid_flow(r.tourist_vehicles)) {
    return "negative or non-finite flow";
  }
  if (r.commuter_persons > r.person_flow * (1.0 + 1e-12)) return "commuter_persons exceeds person_flow";
  if (r.tourist_vehicles > r.vehicle_flow * (1.0 + 1e-12)) return "tourist_vehicles exceeds vehicle_flow";
  if (r.hour < 0 || r.hour > 23) return "hour outside 0-23";
  return {};
}

template <typename T, typename Fn>
std::vector<T> load_rows(const Table& table, Fn&& parse) {
  std::vector<T> out;
  std::vector<std::string> problems;
  for (const auto& row : table.rows()) {
    try {
      out.push_back(parse(row));
    } catch (const ValidationError& e) {
      problems.insert(problems.end(), e.violations().begin(), e.violations().end());
    }
  }
  if (!problems.empty()) throw ValidationError(std::move(problems));
  return out;
}

}  // namespace

std::string to_string(const OdKey& od) { return od.origin + "->" + od.dest; }

void DemandMatrix::insert(OdRecord record) {
  if (record.hour != hour_) {
    throw ValidationError({"record " + to_string(record.key()) + " has hour " + std::to_string(record.hour) +
                           ", matrix hour is " + std::to_string(hour_)});
  }
  if (auto p = od_problem(record); !p.empty()) {
    throw ValidationError({"record " + to_string(record.key()) + ": " + p});
  }
  auto key = record.key();
  if (!records_.emplace(key, std::move(record)).second) {
    throw ValidationError({"duplicate OD (" + std::to_string(hour_) + "," + key.origin + "," + key.dest + ")"});
  }
}

const OdRecord* DemandMatrix::find(const OdKey& key) const {
  const auto it = records_.find(key);
  return it == records_.end() ? nullptr : &it->second;
}

double DemandMatrix::total_vehicles() const {
  double s = 0.0;
  for (const auto& [k, r] : records_) s += r.vehicle_flow;
  return s;
}

double DemandMatrix::total_persons() const {
  double s = 0.0;
  for (const auto& [k, r] : records_) s += r.person_flow;
  return s;
}

std::map<int, DemandMatrix> load_demand(const std::filesystem::path& path, double day_scale) {
  if (!(day_scale > 0.0) || !std::isfinite(day_scale)) {
    throw ValidationError({"day_scale must be positive and finite"});
  }
  const auto table = Table::read(path);
  table.require_columns({"hour", "origin_zone", "dest_zone", "vehicle_flow", "person_flow", "commuter_persons"},
                        {"tourist_vehicles"});
  std::map<int, DemandMatrix> out;
  std::vector<std::string> problems;
  for (const auto& row : table.rows()) {
    try {
      OdRecord r;
      r.hour = static_cast<int>(table.integer(row, "hour"));
      r.origin = table.cell(row, "origin_zone");
      r.dest = table.cell(row, "dest_zone");
      r.vehicle_flow = table.number(row, "vehicle_flow");
      r.person_flow = table.number(row, "person_flow");
      r.commuter_persons = table.number(row, "commuter_persons");
      r.tourist_vehicles = table.optional_number(row, "tourist_vehicles").value_or(0.0);
      if (auto p = od_problem(r); !p.empty()) {
        problems.push_back(table.where(row) + ": " + p);
        continue;
      }
      r.vehicle_flow *= day_scale;
      r.person_flow *= day_scale;
      r.commuter_persons *= day_scale;
      r.tourist_vehicles *= day_scale;
      auto [it, fresh] = out.try_emplace(r.hour, r.hour, day_scale);
      if (it->second.find(r.key())) {
        problems.push_back(table.where(row) + ": duplicate OD (" + std::to_string(r.hour) + "," + r.origin + "," +
                           r.dest + ")");
        continue;
      }
      it->second.insert(std::move(r));
    } catch (const ValidationError& e) {
      problems.insert(problems.end(), e.violations().begin(), e.violations().end());
    }
  }
  if (!problems.empty()) throw ValidationError(std::move(problems));
  return out;
}

DemandMatrix load_demand(const std::filesystem::path& path, double day_scale, int hour) {
  auto all = load_demand(path, day_scale);
  if (auto it = all.find(hour); it != all.end()) return std::move(it->second);
  return DemandMatrix(hour, day_scale);
}

void write_demand(const DemandMatrix& demand, const std::filesystem::path& path) {
  TableWriter w({"hour", "origin_zone", "dest_zone", "vehicle_flow", "person_flow", "commuter_persons",
                 "tourist_vehicles"});
  for (const auto& [k, r] : demand.records()) {
    w.row({std::to_string(r.hour), r.origin, r.dest, format_number(r.vehicle_flow), format_number(r.person_flow),
           format_number(r.commuter_persons), format_number(r.tourist_vehicles)});
  }
  w.write(path);
}

std::string to_string(ResidenceKind kind) { return kind == ResidenceKind::airbnb ? "airbnb" : "hotel"; }

ResidenceKind parse_residence_kind(const std::string& text) {
  if (text == "airbnb") return ResidenceKind::airbnb;
  if (text == "hotel") return ResidenceKind::hotel;
  throw ValidationError({"unknown residence kind '" + text + "'"});
}

void DepartureSplit::validate() const {
  std::vector<std::string> problems;
  double sum = 0.0;
  std::set<int> seen;
  for (const auto& s : shares) {
    if (s.hours_ahead < 1) problems.push_back("departure split hours_ahead must be a positive integer");
    if (!(s.fraction >= 0.0 && s.fraction <= 1.0)) problems.push_back("departure split fraction must be in [0,1]");
    if (!seen.insert(s.hours_ahead).second) problems.push_back("departure split repeats an hours_ahead value");
    sum += s.fraction;
  }
  if (std::abs(sum - 1.0) > 1e-9) problems.push_back("departure split fractions must sum to 1");
  if (!problems.empty()) throw ValidationError(std::move(problems));
}

std::string to_string(TouristMode mode) {
  switch (mode) {
    case TouristMode::walk_transit: return "walk_transit";
    case TouristMode::bike_transit: return "bike_transit";
    case TouristMode::bus: return "bus";
    case TouristMode::taxi: return "taxi";
  }
  return "taxi";
}

void ModeSplitConfig::validate() const {
  std::vector<std::string> problems;
  if (!(walk_km > 0.0 && walk_km < bike_km)) problems.push_back("mode split requires 0 < walk_km < bike_km");
  if (!std::isfinite(bike_km)) problems.push_back("mode split bike_km must be finite");
  if (!(taxi_occupancy >= 1.0) || !std::isfinite(taxi_occupancy)) problems.push_back("taxi_occupancy must be >= 1");
  if (!(bus_time_ratio > 0.0)) problems.push_back("bus_time_ratio must be > 0");
  if (!problems.empty()) throw ValidationError(std::move(problems));
}

SpectatorDepartures spectators_per_hour(std::span<const EventSession> sessions, const DepartureSplit& split) {
  split.validate();
  SpectatorDepartures out;
  for (const auto& s : sessions) {
    for (const auto& share : split.shares) {
      int hour = s.start_hour - share.hours_ahead;
      if (hour < 0) {
        hour = 0;
        ++out.clamped;
      }
      out.persons[{s.date, hour, s.venue_id}] += s.expected_attendance * share.fraction;
    }
  }
  return out;
}

std::vector<std::pair<std::string, double>> assign_origins(double departures, std::span<const Residence> residences) {
  if (residences.empty()) throw ValidationError({"no residences to assign spectators to"});
  double total = 0.0;
  for (const auto& r : residences) total += r.accommodates;
  if (!(total > 0.0)) throw ValidationError({"total residence capacity must be positive"});
  std::vector<std::pair<std::string, double>> out;
  out.reserve(residences.size());
  for (const auto& r : residences) out.emplace_back(r.residence_id, departures * (r.accommodates / total));
  return out;
}

TouristMode mode_split(GeoPoint origin, GeoPoint dest, std::span<const GeoPoint> stations,
                       const ModeSplitConfig& config, const BusEstimator& bus) {
  if (stations.empty()) throw ValidationError({"mode split needs at least one station"});
  double d_origin = 0.0;
  double d_dest = 0.0;
  nearest_index(origin, stations, &d_origin);
  nearest_index(dest, stations, &d_dest);
  const double farthest = std::max(d_origin, d_dest);
  if (farthest <= config.walk_km) return TouristMode::walk_transit;
  if (farthest <= config.bike_km) return TouristMode::bike_transit;
  if (config.bus_enabled && bus) {
    if (const auto trip = bus(origin, dest); trip && trip->bus_time_min <= config.bus_time_ratio * trip->taxi_time_min) {
      return TouristMode::bus;
    }
  }
  return TouristMode::taxi;
}

const Zone& locate_zone(GeoPoint p, std::span<const Zone> zones, std::size_t& misses, double max_km) {
  if (zones.empty()) throw ValidationError({"no zones defined"});
  std::size_t best = 0;
  double best_d = haversine_km(p, zones[0].point());
  for (std::size_t i = 1; i < zones.size(); ++i) {
    const double d = haversine_km(p, zones[i].point());
    if (d < best_d) {
      best = i;
      best_d = d;
    }
  }
  if (best_d > max_km) ++misses;
  return zones[best];
}

TouristDemand tourist_vehicle_demand(int hour, const Venue& venue, std::span<const ResidenceFlow> flows,
                                     std::span<const Zone> zones, const ModeSplitConfig& config) {
  config.validate();
  TouristDemand out;
  const Zone& venue_zone = locate_zone(venue.point(), zones, out.unmatched_locations);
  std::map<OdKey, double> taxi_persons;
  std::map<std::pair<OdKey, TouristMode>, double> transit;
  for (const auto& f : flows) {
    if (!(f.persons > 0.0)) continue;
    const Zone& origin_zone = locate_zone(f.residence->point(), zones, out.unmatched_locations);
    const OdKey od{origin_zone.zone_id, venue_zone.zone_id};
    if (f.mode == TouristMode::taxi) {
      taxi_persons[od] += f.persons;
    } else {
      transit[{od, f.mode}] += f.persons;
    }
  }
  for (const auto& [od, persons] : taxi_persons) {
    OdRecord r;
    r.hour = hour;
    r.origin = od.origin;
    r.dest = od.dest;
    r.person_flow = persons;
    r.vehicle_flow = persons / config.taxi_occupancy;
    r.tourist_vehicles = r.vehicle_flow;
    out.vehicle_additions.push_back(std::move(r));
  }
  for (const auto& [key, persons] : transit) {
    out.transit_persons.push_back({key.first.origin, key.first.dest, key.second, persons});
  }
  return out;
}

DemandMatrix combine(const DemandMatrix& base, std::span<const OdRecord> additions) {
  DemandMatrix out(base.hour(), base.day_scale());
  std::map<OdKey, OdRecord> merged = base.records();
  for (const auto& a : additions) {
    if (a.hour != base.hour()) {
      throw ValidationError({"addition " + to_string(a.key()) + " is for hour " + std::to_string(a.hour) +
                             ", base demand is hour " + std::to_string(base.hour())});
    }
    auto [it, fresh] = merged.try_emplace(a.key());
    auto& r = it->second;
    if (fresh) {
      r.hour = a.hour;
      r.origin = a.origin;
      r.dest = a.dest;
    }
    r.vehicle_flow += a.vehicle_flow;
    r.person_flow += a.person_flow;
    r.tourist_vehicles += a.tourist_vehicles;
  }
  for (auto& [k, r] : merged) out.insert(std::move(r));
  return out;
}

EventDemand generate_event_demand(const std::string& date, int hour, const EventDemandInputs& in) {
  EventDemand out;
  const auto departures = spectators_per_hour(in.sessions, in.split);
  out.clamped_departures = departures.clamped;

  std::map<std::string, const Venue*> venues;
  for (const auto& v : in.venues) venues.emplace(v.venue_id, &v);

  std::map<OdKey, OdRecord> merged;
  std::map<std::pair<OdKey, TouristMode>, double> transit;
  for (const auto& [key, persons] : departures.persons) {
    if (key.hour != hour || key.date != date || !(persons > 0.0)) continue;
    const auto vit = venues.find(key.venue_id);
    if (vit == venues.end()) throw ValidationError({"session references unknown venue " + key.venue_id});
    const Venue& venue = *vit->second;
    out.spectators += persons;

    const auto shares = assign_origins(persons, in.residences);
    std::vector<ResidenceFlow> flows;
    flows.reserve(shares.size());
    for (std::size_t i = 0; i < shares.size(); ++i) {
      const auto mode = mode_split(in.residences[i].point(), venue.point(), in.stations, in.modes, in.bus);
      flows.push_back({&in.residences[i], shares[i].second, mode});
      out.persons_by_mode[mode] += shares[i].second;
    }
    auto td = tourist_vehicle_demand(hour, venue, flows, in.zones, in.modes);
    out.unmatched_locations += td.unmatched_locations;
    for (auto& r : td.vehicle_additions) {
      auto [it, fresh] = merged.try_emplace(r.key(), r);
      if (!fresh) {
        it->second.vehicle_flow += r.vehicle_flow;
        it->second.person_flow += r.person_flow;
        it->second.tourist_vehicles += r.tourist_vehicles;
      }
    }
    for (const auto& t : td.transit_persons) transit[{{t.origin, t.dest}, t.mode}] += t.persons;
  }
  for (auto& [k, r] : merged) out.vehicle_additions.push_back(std::move(r));
  for (const auto& [key, persons] : transit) {
    out.transit_persons.push_back({key.first.origin, key.first.dest, key.second, persons});
  }
  return out;
}

std::vector<Zone> load_zones(const std::filesystem::path& path) {
  const auto t = Table::read(path);
  t.require_columns({"zone_id", "lat", "lon", "attach_node"});
  auto zones = load_rows<Zone>(t, [&](const Table::Row& row) {
    return Zone{t.cell(row, "zone_id"), t.number(row, "lat"), t.number(row, "lon"), t.cell(row, "attach_node")};
  });
  std::set<std::string> seen;
  std::vector<std::string> problems;
  for (const auto& z : zones) {
    if (!seen.insert(z.zone_id).second) problems.push_back(path.string() + ": duplicate zone_id " + z.zone_id);
  }
  if (!problems.empty()) throw ValidationError(std::move(problems));
  return zones;
}

std::vector<Venue> load_venues(const std::filesystem::path& path) {
  const auto t = Table::read(path);
  t.require_columns({"venue_id", "lat", "lon", "capacity"});
  return load_rows<Venue>(t, [&](const Table::Row& row) {
    Venue v{t.cell(row, "venue_id"), t.number(row, "lat"), t.number(row, "lon"), t.number(row, "capacity")};
    if (!(v.capacity > 0.0)) throw ValidationError({t.where(row) + ": venue capacity must be > 0"});
    return v;
  });
}

std::vector<EventSession> load_sessions(const std::filesystem::path& path) {
  const auto t = Table::read(path);
  t.require_columns({"venue_id", "date", "start_hour", "expected_attendance"});
  return load_rows<EventSession>(t, [&](const Table::Row& row) {
    EventSession s{t.cell(row, "venue_id"), t.cell(row, "date"), static_cast<int>(t.integer(row, "start_hour")),
                   t.number(row, "expected_attendance")};
    if (s.start_hour < 0 || s.start_hour > 23) throw ValidationError({t.where(row) + ": start_hour outside 0-23"});
    if (!valid_flow(s.expected_attendance)) {
      throw ValidationError({t.where(row) + ": expected_attendance must be non-negative"});
    }
    return s;
  });
}

std::vector<Residence> load_residences(const std::filesystem::path& path) {
  const auto t = Table::read(path);
  t.require_columns({"residence_id", "lat", "lon", "accommodates", "kind"});
  return load_rows<Residence>(t, [&](const Table::Row& row) {
    Residence r{t.cell(row, "residence_id"), t.number(row, "lat"), t.number(row, "lon"),
                t.number(row, "accommodates"), ResidenceKind::hotel};
    try {
      r.kind = parse_residence_kind(t.cell(row, "kind"));
    } catch (const ValidationError&) {
      throw ValidationError({t.where(row) + ": unknown residence kind '" + t.cell(row, "kind") + "'"});
    }
    if (!(r.accommodates > 0.0)) throw ValidationError({t.where(row) + ": accommodates must be > 0"});
    return r;
  });
}

void write_zones(std::span<const Zone> zones, const std::filesystem::path& path) {
  TableWriter w({"zone_id", "lat", "lon", "attach_node"});
  for (const auto& z : zones) w.row({z.zone_id, format_number(z.lat), format_number(z.lon), z.attach_node});
  w.write(path);
}

void write_venues(std::span<const Venue> venues, const std::filesystem::path& path) {
  TableWriter w({"venue_id", "lat", "lon", "capacity"});
  for (const auto& v : venues) w.row({v.venue_id, format_number(v.lat), format_number(v.lon), format_number(v.capacity)});
  w.write(path);
}

void write_sessions(std::span<const EventSession> sessions, const std::filesystem::path& path) {
  TableWriter w({"venue_id", "date", "start_hour", "expected_attendance"});
  for (const auto& s : sessions) {
    w.row({s.venue_id, s.date, std::to_string(s.start_hour), format_number(s.expected_attendance)});
  }
  w.write(path);
}

void write_residences(std::span<const Residence> residences, const std::filesystem::path& path) {
  TableWriter w({"residence_id", "lat", "lon", "accommodates", "kind"});
  for (const auto& r : residences) {
    w.row({r.residence_id, format_number(r.lat), format_number(r.lon), format_number(r.accommodates),
           to_string(r.kind)});
  }
  w.write(path);
}

}  // namespace evtraffic
