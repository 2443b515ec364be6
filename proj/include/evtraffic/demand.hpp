#pragma once

#include <compare>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "evtraffic/geo.hpp"
#include "evtraffic/netgraph.hpp"

namespace evtraffic {

struct Zone {
  std::string zone_id;
  double lat = 0.0;
  double lon = 0.0;
  std::string attach_node;

  GeoPoint point() const { return {lat, lon}; }
  bool operator==(const Zone&) const = default;
};

struct OdKey {
  std::string origin;
  std::string dest;
  auto operator<=>(const OdKey&) const = default;
};

std::string to_string(const OdKey& od);

struct OdRecord {
  int hour = 0;
  std::string origin;
  std::string dest;
  double vehicle_flow = 0.0;
  double person_flow = 0.0;
  double commuter_persons = 0.0;
  // Share of vehicle_flow contributed by tourist taxis (0 for local demand).
  double tourist_vehicles = 0.0;

  OdKey key() const { return {origin, dest}; }
  bool operator==(const OdRecord&) const = default;
};

// All OD records of one hour, unique per (origin, dest).
class DemandMatrix {
 public:
  DemandMatrix() = default;
  explicit DemandMatrix(int hour, double day_scale = 1.0) : hour_(hour), day_scale_(day_scale) {}

  int hour() const noexcept { return hour_; }
  double day_scale() const noexcept { return day_scale_; }
  const std::map<OdKey, OdRecord>& records() const noexcept { return records_; }
  bool empty() const noexcept { return records_.empty(); }
  std::size_t size() const noexcept { return records_.size(); }

  // Throws ValidationError on a duplicate key, an hour mismatch or bad flows.
  void insert(OdRecord record);
  const OdRecord* find(const OdKey& key) const;

  double total_vehicles() const;
  double total_persons() const;

  bool operator==(const DemandMatrix&) const = default;

 private:
  int hour_ = 0;
  double day_scale_ = 1.0;
  std::map<OdKey, OdRecord> records_;
};

// Reads `hour,origin_zone,dest_zone,vehicle_flow,person_flow,commuter_persons`
// (optional trailing `tourist_vehicles`) and multiplies every flow by day_scale.
std::map<int, DemandMatrix> load_demand(const std::filesystem::path& path, double day_scale);
DemandMatrix load_demand(const std::filesystem::path& path, double day_scale, int hour);
void write_demand(const DemandMatrix& demand, const std::filesystem::path& path);

struct Venue {
  std::string venue_id;
  double lat = 0.0;
  double lon = 0.0;
  double capacity = 0.0;

  GeoPoint point() const { return {lat, lon}; }
  bool operator==(const Venue&) const = default;
};

struct EventSession {
  std::string venue_id;
  std::string date;
  int start_hour = 0;
  double expected_attendance = 0.0;
  bool operator==(const EventSession&) const = default;
};

enum class ResidenceKind { airbnb, hotel };

struct Residence {
  std::string residence_id;
  double lat = 0.0;
  double lon = 0.0;
  double accommodates = 0.0;
  ResidenceKind kind = ResidenceKind::hotel;

  GeoPoint point() const { return {lat, lon}; }
  bool operator==(const Residence&) const = default;
};

std::string to_string(ResidenceKind kind);
ResidenceKind parse_residence_kind(const std::string& text);

struct DepartureSplit {
  struct Share {
    int hours_ahead = 0;
    double fraction = 0.0;
    bool operator==(const Share&) const = default;
  };
  std::vector<Share> shares{{1, 0.30}, {2, 0.40}, {3, 0.30}};

  void validate() const;
  bool operator==(const DepartureSplit&) const = default;
};

enum class TouristMode { walk_transit, bike_transit, bus, taxi };
std::string to_string(TouristMode mode);

struct ModeSplitConfig {
  double walk_km = 1.0;
  double bike_km = 2.0;
  double taxi_occupancy = 2.0;
  bool bus_enabled = false;
  double bus_time_ratio = 1.5;

  void validate() const;
  bool operator==(const ModeSplitConfig&) const = default;
};

// Bus option for one trip, when a transit-hop path exists.
struct BusTrip {
  double bus_time_min = 0.0;
  double taxi_time_min = 0.0;
};
using BusEstimator = std::function<std::optional<BusTrip>(GeoPoint origin, GeoPoint dest)>;

struct DepartureKey {
  std::string date;
  int hour = 0;
  std::string venue_id;
  auto operator<=>(const DepartureKey&) const = default;
};

struct SpectatorDepartures {
  std::map<DepartureKey, double> persons;
  // Departures that fell before hour 0 and were folded into hour 0.
  std::size_t clamped = 0;
};

SpectatorDepartures spectators_per_hour(std::span<const EventSession> sessions,
                                        const DepartureSplit& split = {});

// Proportional to accommodates, in input order. Throws on an empty list.
std::vector<std::pair<std::string, double>> assign_origins(double departures,
                                                           std::span<const Residence> residences);

TouristMode mode_split(GeoPoint origin, GeoPoint dest, std::span<const GeoPoint> stations,
                       const ModeSplitConfig& config, const BusEstimator& bus = {});

struct TransitPersonFlow {
  std::string origin;
  std::string dest;
  TouristMode mode = TouristMode::walk_transit;
  double persons = 0.0;
};

struct TouristDemand {
  std::vector<OdRecord> vehicle_additions;
  std::vector<TransitPersonFlow> transit_persons;
  // Locations farther than the zone match radius from every zone centroid.
  std::size_t unmatched_locations = 0;
};

struct ResidenceFlow {
  const Residence* residence = nullptr;
  double persons = 0.0;
  TouristMode mode = TouristMode::taxi;
};

inline constexpr double kZoneMatchKm = 3.0;

// Nearest zone by centroid; counts a miss when farther than max_km.
const Zone& locate_zone(GeoPoint p, std::span<const Zone> zones, std::size_t& misses,
                        double max_km = kZoneMatchKm);

TouristDemand tourist_vehicle_demand(int hour, const Venue& venue, std::span<const ResidenceFlow> flows,
                                     std::span<const Zone> zones, const ModeSplitConfig& config);

// Per-OD sum. Commuter persons stay as in `base`.
DemandMatrix combine(const DemandMatrix& base, std::span<const OdRecord> additions);

struct EventDemandInputs {
  std::span<const EventSession> sessions;
  std::span<const Venue> venues;
  std::span<const Residence> residences;
  std::span<const Zone> zones;
  std::span<const GeoPoint> stations;
  DepartureSplit split;
  ModeSplitConfig modes;
  BusEstimator bus;
};

struct EventDemand {
  std::vector<OdRecord> vehicle_additions;  // merged per OD
  std::vector<TransitPersonFlow> transit_persons;
  double spectators = 0.0;  // departing in the hour
  std::map<TouristMode, double> persons_by_mode;
  std::size_t clamped_departures = 0;
  std::size_t unmatched_locations = 0;
};

// Tourist vehicle additions for one (date, hour) across all venues.
EventDemand generate_event_demand(const std::string& date, int hour, const EventDemandInputs& inputs);

std::vector<Zone> load_zones(const std::filesystem::path& path);
std::vector<Venue> load_venues(const std::filesystem::path& path);
std::vector<EventSession> load_sessions(const std::filesystem::path& path);
std::vector<Residence> load_residences(const std::filesystem::path& path);
void write_zones(std::span<const Zone> zones, const std::filesystem::path& path);
void write_venues(std::span<const Venue> venues, const std::filesystem::path& path);
void write_sessions(std::span<const EventSession> sessions, const std::filesystem::path& path);
void write_residences(std::span<const Residence> residences, const std::filesystem::path& path);

}  // namespace evtraffic
