#include <gtest/gtest.h>

#include <numeric>
#include <random>

#include "evtraffic/error.hpp"
#include "evtraffic/fixtures.hpp"
#include "evtraffic/demand.hpp"
#include "evtraffic/table.hpp"
#include "oracles.hpp"

using namespace evtraffic;

namespace {

const GeoPoint kBase{-22.9, -43.2};

OdRecord rec(const std::string& o, const std::string& d, double v, double p = -1, double c = 0, int hour = 8) {
  OdRecord r;
  r.hour = hour;
  r.origin = o;
  r.dest = d;
  r.vehicle_flow = v;
  r.person_flow = p < 0 ? v : p;
  r.commuter_persons = c;
  return r;
}

Residence residence(const std::string& id, double cap) { return {id, kBase.lat, kBase.lon, cap, ResidenceKind::hotel}; }

}  // namespace

TEST(LoadDemand, EmptyBodyGivesEmptyMatrix) {
  oracle::TempDir dir("demand");
  write_text_file(dir / "d.csv", "hour,origin_zone,dest_zone,vehicle_flow,person_flow,commuter_persons\n");
  EXPECT_TRUE(load_demand(dir / "d.csv", 1.0).empty());
  EXPECT_TRUE(load_demand(dir / "d.csv", 1.0, 8).empty());
}

TEST(LoadDemand, DayScaleAppliedOnce) {
  oracle::TempDir dir("demand");
  write_text_file(dir / "d.csv",
                  "hour,origin_zone,dest_zone,vehicle_flow,person_flow,commuter_persons\n8,A,B,100,120,100\n");
  const auto m = load_demand(dir / "d.csv", 1.1, 8);
  const auto* r = m.find({"A", "B"});
  ASSERT_NE(r, nullptr);
  EXPECT_DOUBLE_EQ(r->vehicle_flow, 110.0);
  EXPECT_DOUBLE_EQ(r->person_flow, 132.0);
  EXPECT_DOUBLE_EQ(m.day_scale(), 1.1);
}

TEST(LoadDemand, DuplicateNamesKey) {
  oracle::TempDir dir("demand");
  write_text_file(dir / "d.csv",
                  "hour,origin_zone,dest_zone,vehicle_flow,person_flow,commuter_persons\n"
                  "8,A,B,100,120,100\n8,A,B,5,5,5\n9,A,B,1,1,1\n");
  try {
    load_demand(dir / "d.csv", 1.0);
    FAIL();
  } catch (const ValidationError& e) {
    ASSERT_EQ(e.violations().size(), 1u);
    EXPECT_NE(e.violations()[0].find("8,A,B"), std::string::npos);
  }
}

TEST(LoadDemand, RejectsBadFlows) {
  oracle::TempDir dir("demand");
  write_text_file(dir / "d.csv",
                  "hour,origin_zone,dest_zone,vehicle_flow,person_flow,commuter_persons\n"
                  "8,A,B,-1,1,0\n8,A,C,1,1,5\n24,A,D,1,1,0\n");
  try {
    load_demand(dir / "d.csv", 1.0);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.violations().size(), 3u);
  }
}

TEST(LoadDemand, RoundTripWithTouristColumn) {
  oracle::TempDir dir("demand");
  DemandMatrix m(8);
  auto r = rec("A", "B", 12.5, 30, 10);
  r.tourist_vehicles = 2.5;
  m.insert(r);
  m.insert(rec("B", "A", 1.0 / 3.0, 1, 1));
  write_demand(m, dir / "d.csv");
  EXPECT_EQ(load_demand(dir / "d.csv", 1.0, 8), m);
}

TEST(Spectators, PaperSplit) {
  const std::vector<EventSession> s{{"V", "2016-08-08", 18, 1000}};
  const auto out = spectators_per_hour(s);
  ASSERT_EQ(out.persons.size(), 3u);
  EXPECT_DOUBLE_EQ(out.persons.at({"2016-08-08", 17, "V"}), 300.0);
  EXPECT_DOUBLE_EQ(out.persons.at({"2016-08-08", 16, "V"}), 400.0);
  EXPECT_DOUBLE_EQ(out.persons.at({"2016-08-08", 15, "V"}), 300.0);
  EXPECT_EQ(out.clamped, 0u);
}

TEST(Spectators, EmptySessions) { EXPECT_TRUE(spectators_per_hour({}).persons.empty()); }

TEST(Spectators, OverlappingSessionsSum) {
  const std::vector<EventSession> s{{"V", "d", 18, 1000}, {"V", "d", 19, 1000}};
  const auto out = spectators_per_hour(s);
  EXPECT_DOUBLE_EQ(out.persons.at({"d", 16, "V"}), 700.0);
  EXPECT_DOUBLE_EQ(out.persons.at({"d", 17, "V"}), 300.0 + 400.0);
  EXPECT_DOUBLE_EQ(out.persons.at({"d", 18, "V"}), 300.0);
}

TEST(Spectators, EarlySessionsClampToHourZero) {
  const std::vector<EventSession> s{{"V", "d", 1, 1000}};
  const auto out = spectators_per_hour(s);
  EXPECT_EQ(out.clamped, 2u);
  EXPECT_DOUBLE_EQ(out.persons.at({"d", 0, "V"}), 1000.0);
}

TEST(Spectators, SplitMustSumToOne) {
  DepartureSplit bad{{{1, 0.5}, {2, 0.4}}};
  EXPECT_THROW(bad.validate(), ValidationError);
}

TEST(SpectatorsProperty, Conservation) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> hour(0, 23), count(1, 12);
  std::uniform_real_distribution<double> att(1, 60000);
  for (int t = 0; t < 100; ++t) {
    std::vector<EventSession> s;
    double total = 0;
    for (int i = count(rng); i > 0; --i) {
      s.push_back({"V" + std::to_string(i % 3), "d", hour(rng), att(rng)});
      total += s.back().expected_attendance;
    }
    double sum = 0;
    for (const auto& [k, v] : spectators_per_hour(s).persons) sum += v;
    EXPECT_LE(std::abs(sum - total), 1e-9 * total);
  }
}

TEST(AssignOrigins, Examples) {
  const std::vector<Residence> two{residence("a", 30), residence("b", 70)};
  auto out = assign_origins(100, two);
  EXPECT_DOUBLE_EQ(out[0].second, 30.0);
  EXPECT_DOUBLE_EQ(out[1].second, 70.0);
  const std::vector<Residence> one{residence("a", 5)};
  EXPECT_DOUBLE_EQ(assign_origins(100, one)[0].second, 100.0);
  const std::vector<Residence> three{residence("a", 1), residence("b", 1), residence("c", 2)};
  out = assign_origins(100, three);
  EXPECT_DOUBLE_EQ(out[0].second, 25.0);
  EXPECT_DOUBLE_EQ(out[1].second, 25.0);
  EXPECT_DOUBLE_EQ(out[2].second, 50.0);
  EXPECT_THROW(assign_origins(100, std::span<const Residence>{}), ValidationError);
}

TEST(AssignOriginsProperty, SumsToInput) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> cap(1, 500), dep(0, 1e5);
  for (int t = 0; t < 100; ++t) {
    std::vector<Residence> rs;
    for (int i = 0; i < 1 + t % 17; ++i) rs.push_back(residence("r" + std::to_string(i), cap(rng)));
    const double d = dep(rng);
    double sum = 0;
    for (const auto& [id, v] : assign_origins(d, rs)) sum += v;
    EXPECT_LE(std::abs(sum - d), 1e-9 * std::max(1.0, d));
  }
}

TEST(ModeSplit, Thresholds) {
  const std::vector<GeoPoint> stations{kBase};
  const ModeSplitConfig cfg;
  const auto at = [](double km) { return offset_km(kBase, km, 0); };
  EXPECT_EQ(mode_split(at(0.5), at(-0.5), stations, cfg), TouristMode::walk_transit);
  EXPECT_EQ(mode_split(at(1.5), at(0.5), stations, cfg), TouristMode::bike_transit);
  EXPECT_EQ(mode_split(at(5), at(-5), stations, cfg), TouristMode::taxi);
  EXPECT_EQ(mode_split(at(0.999), at(0), stations, cfg), TouristMode::walk_transit);
  EXPECT_EQ(mode_split(at(1.999), at(0), stations, cfg), TouristMode::bike_transit);
}

TEST(ModeSplit, BusOnlyWhenEnabledAndAcceptable) {
  const std::vector<GeoPoint> stations{kBase};
  ModeSplitConfig cfg;
  const auto far = offset_km(kBase, 5, 0);
  const BusEstimator fast = [](GeoPoint, GeoPoint) { return std::optional<BusTrip>({20, 15}); };
  const BusEstimator slow = [](GeoPoint, GeoPoint) { return std::optional<BusTrip>({40, 15}); };
  EXPECT_EQ(mode_split(far, far, stations, cfg, fast), TouristMode::taxi);
  cfg.bus_enabled = true;
  EXPECT_EQ(mode_split(far, far, stations, cfg, fast), TouristMode::bus);
  EXPECT_EQ(mode_split(far, far, stations, cfg, slow), TouristMode::taxi);
  EXPECT_EQ(mode_split(far, far, stations, cfg, {}), TouristMode::taxi);
}

TEST(ModeSplitProperty, LoweringWalkRadiusNeverAddsWalkers) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> off(-4, 4);
  const std::vector<GeoPoint> stations{kBase, offset_km(kBase, 2, 2), offset_km(kBase, -3, 1)};
  ModeSplitConfig wide;
  ModeSplitConfig narrow;
  narrow.walk_km = 0.4;
  for (int i = 0; i < 2000; ++i) {
    const auto o = offset_km(kBase, off(rng), off(rng));
    const auto d = offset_km(kBase, off(rng), off(rng));
    const auto before = mode_split(o, d, stations, wide);
    const auto after = mode_split(o, d, stations, narrow);
    if (after == TouristMode::walk_transit) EXPECT_EQ(before, TouristMode::walk_transit);
  }
}

TEST(TouristVehicles, OccupancyAndFractions) {
  const std::vector<Zone> zones{{"Z1", kBase.lat, kBase.lon, "N1"}};
  const Venue v{"V", kBase.lat, kBase.lon, 1000};
  const Residence r = residence("r", 10);
  const ModeSplitConfig cfg;
  std::vector<ResidenceFlow> flows{{&r, 20, TouristMode::taxi}};
  auto out = tourist_vehicle_demand(8, v, flows, zones, cfg);
  ASSERT_EQ(out.vehicle_additions.size(), 1u);
  EXPECT_DOUBLE_EQ(out.vehicle_additions[0].vehicle_flow, 10.0);
  EXPECT_DOUBLE_EQ(out.vehicle_additions[0].tourist_vehicles, 10.0);
  EXPECT_EQ(out.vehicle_additions[0].commuter_persons, 0.0);

  flows = {{&r, 15, TouristMode::taxi}};
  EXPECT_DOUBLE_EQ(tourist_vehicle_demand(8, v, flows, zones, cfg).vehicle_additions[0].vehicle_flow, 7.5);

  flows = {{&r, 0, TouristMode::taxi}, {&r, 12, TouristMode::walk_transit}};
  out = tourist_vehicle_demand(8, v, flows, zones, cfg);
  EXPECT_TRUE(out.vehicle_additions.empty());
  ASSERT_EQ(out.transit_persons.size(), 1u);
  EXPECT_DOUBLE_EQ(out.transit_persons[0].persons, 12.0);
}

TEST(TouristVehicles, FarLocationsCountedAsUnmatched) {
  const std::vector<Zone> zones{{"Z1", kBase.lat, kBase.lon, "N1"}};
  const auto far = offset_km(kBase, 10, 0);
  const Venue v{"V", far.lat, far.lon, 1000};
  const Residence r = residence("r", 10);
  const std::vector<ResidenceFlow> flows{{&r, 4, TouristMode::taxi}};
  const auto out = tourist_vehicle_demand(8, v, flows, zones, ModeSplitConfig{});
  EXPECT_EQ(out.unmatched_locations, 1u);
  EXPECT_EQ(out.vehicle_additions.at(0).dest, "Z1");
}

TEST(Combine, Examples) {
  DemandMatrix base(8);
  base.insert(rec("a", "b", 100, 120, 100));
  EXPECT_EQ(combine(base, {}), base);

  const std::vector<OdRecord> add{rec("a", "b", 10, 20, 0), rec("b", "c", 5, 10, 0)};
  const auto out = combine(base, add);
  EXPECT_DOUBLE_EQ(out.find({"a", "b"})->vehicle_flow, 110.0);
  EXPECT_DOUBLE_EQ(out.find({"a", "b"})->commuter_persons, 100.0);
  ASSERT_NE(out.find({"b", "c"}), nullptr);
  EXPECT_EQ(out.size(), 2u);

  const std::vector<OdRecord> wrong_hour{rec("a", "b", 1, 1, 0, 9)};
  EXPECT_THROW(combine(base, wrong_hour), ValidationError);
}

TEST(CombineProperty, TotalsPreserved) {
  std::mt19937_64 rng(13);
  std::uniform_int_distribution<int> zone(0, 5);
  std::uniform_real_distribution<double> flow(0, 500);
  for (int t = 0; t < 100; ++t) {
    DemandMatrix base(8);
    for (int i = 0; i < 10; ++i) {
      const auto o = "z" + std::to_string(zone(rng));
      const auto d = "z" + std::to_string(zone(rng));
      if (!base.find({o, d})) base.insert(rec(o, d, flow(rng)));
    }
    std::vector<OdRecord> add;
    double added = 0;
    for (int i = 0; i < 6; ++i) {
      add.push_back(rec("z" + std::to_string(zone(rng)), "z" + std::to_string(zone(rng)), flow(rng)));
      added += add.back().vehicle_flow;
    }
    const auto out = combine(base, add);
    EXPECT_NEAR(out.total_vehicles(), base.total_vehicles() + added, 1e-9 * (base.total_vehicles() + added));
  }
}

TEST(EventDemand, DiamondFixture) {
  const auto b = fixtures::diamond();
  std::vector<GeoPoint> stations;
  for (const auto& l : b.lines) {
    for (const auto& s : l.stations) stations.push_back(s.point());
  }
  const EventDemandInputs in{b.sessions, b.venues, b.residences, b.zones, stations, {}, {}, {}};
  // Session at 10:00 with 2000 spectators; 40% leave two hours ahead.
  const auto ev = generate_event_demand(b.date, 8, in);
  EXPECT_DOUBLE_EQ(ev.spectators, 800.0);
  // R1 (300 beds) and R2 (100) are far from stations; R3 (100) is within walking distance.
  EXPECT_DOUBLE_EQ(ev.persons_by_mode.at(TouristMode::taxi), 640.0);
  EXPECT_DOUBLE_EQ(ev.persons_by_mode.at(TouristMode::walk_transit), 160.0);
  double vehicles = 0;
  for (const auto& r : ev.vehicle_additions) {
    vehicles += r.vehicle_flow;
    EXPECT_EQ(r.dest, "ZN4");
  }
  EXPECT_DOUBLE_EQ(vehicles, 320.0);
  // Other date: the second session is on 2016-08-09.
  EXPECT_DOUBLE_EQ(generate_event_demand("2016-08-09", 8, in).spectators, 1200.0);
  EXPECT_DOUBLE_EQ(generate_event_demand(b.date, 12, in).spectators, 0.0);
}

TEST(EventFiles, RoundTrip) {
  oracle::TempDir dir("event");
  const auto b = fixtures::diamond();
  write_zones(b.zones, dir / "zones.csv");
  write_venues(b.venues, dir / "venues.csv");
  write_sessions(b.sessions, dir / "sessions.csv");
  write_residences(b.residences, dir / "residences.csv");
  EXPECT_EQ(load_zones(dir / "zones.csv"), b.zones);
  EXPECT_EQ(load_venues(dir / "venues.csv"), b.venues);
  EXPECT_EQ(load_sessions(dir / "sessions.csv"), b.sessions);
  EXPECT_EQ(load_residences(dir / "residences.csv"), b.residences);
}
