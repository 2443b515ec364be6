#include "evtraffic/fixtures.hpp"

#include "evtraffic/error.hpp"
#include "evtraffic/pipeline.hpp"

namespace evtraffic::fixtures {
namespace {

constexpr GeoPoint kAnchor{-22.90, -43.20};

Node node_at(const std::string& id, double north_km, double east_km) {
  const auto p = offset_km(kAnchor, north_km, east_km);
  return {id, p.lat, p.lon};
}

Zone zone_at(const Node& n) { return {"Z" + n.node_id, n.lat, n.lon, n.node_id}; }

OdRecord od(int hour, const std::string& o, const std::string& d, double vehicles, double persons, double commuters) {
  OdRecord r;
  r.hour = hour;
  r.origin = o;
  r.dest = d;
  r.vehicle_flow = vehicles;
  r.person_flow = persons;
  r.commuter_persons = commuters;
  return r;
}

Station station_at(const std::string& id, double north_km, double east_km) {
  const auto p = offset_km(kAnchor, north_km, east_km);
  return {id, p.lat, p.lon};
}

}  // namespace

Bundle diamond() {
  const std::vector<Node> nodes{node_at("N1", 0, 0), node_at("N2", 2, 3), node_at("N3", -2, 3), node_at("N4", 0, 6)};
  const std::vector<Link> links{
      {"a", "N1", "N2", 3600, 1000, 5.0, false},
      {"b", "N1", "N3", 3600, 1200, 6.0, false},
      {"c", "N2", "N4", 3600, 1800, 5.0, true},
      {"d", "N3", "N4", 3600, 1200, 6.0, false},
      {"r", "N4", "N1", 6000, 2000, 8.0, false},
  };
  Bundle b{"f1", RoadNetwork(nodes, links), {}, DemandMatrix(8), {}, {}, {}, {}, {}, "2016-08-08"};
  for (const auto& n : b.network.nodes()) b.zones.push_back(zone_at(n));
  b.demand.insert(od(8, "ZN1", "ZN4", 1200, 1450, 1300));
  b.demand.insert(od(8, "ZN2", "ZN4", 300, 360, 300));
  b.demand.insert(od(8, "ZN3", "ZN4", 300, 360, 300));
  b.demand.insert(od(8, "ZN4", "ZN1", 400, 480, 400));

  const auto venue = offset_km(kAnchor, 0.3, 6.0);
  b.venues.push_back({"V1", venue.lat, venue.lon, 5000});
  b.sessions.push_back({"V1", b.date, 10, 2000});
  b.sessions.push_back({"V1", "2016-08-09", 10, 3000});
  const auto r1 = offset_km(kAnchor, 2.1, 3.0);
  const auto r2 = offset_km(kAnchor, 0.0, 0.2);
  const auto r3 = offset_km(kAnchor, -2.0, 3.4);
  b.residences.push_back({"R1", r1.lat, r1.lon, 300, ResidenceKind::hotel});
  b.residences.push_back({"R2", r2.lat, r2.lon, 100, ResidenceKind::airbnb});
  b.residences.push_back({"R3", r3.lat, r3.lon, 100, ResidenceKind::airbnb});
  b.lines.push_back({"L1", LineKind::metro, {station_at("S1", -2, 3), station_at("S2", 0, 6.5)}, kDefaultSegmentCapacity});
  b.overlay = b.network.olympic_lane_overlay();
  return b;
}

Bundle braess(bool crossing) {
  const std::vector<Node> nodes{node_at("O", 0, 0), node_at("A", 2, 3), node_at("B", -2, 3), node_at("D", 0, 6)};
  std::vector<Link> links{
      {"OA", "O", "A", 3600, 500, 10.0, false},
      {"OB", "O", "B", 3600, 10000, 25.0, false},
      {"AD", "A", "D", 3600, 10000, 25.0, false},
      {"BD", "B", "D", 3600, 500, 10.0, false},
  };
  if (crossing) links.push_back({"AB", "A", "B", 4000, 10000, 1.0, false});
  Bundle b{crossing ? "f2" : "f2-open", RoadNetwork(nodes, links), {}, DemandMatrix(8), {}, {}, {}, {}, {}, "2016-08-08"};
  for (const auto& n : b.network.nodes()) b.zones.push_back(zone_at(n));
  b.demand.insert(od(8, "ZO", "ZD", 1000, 1200, 1000));
  return b;
}

Bundle bottleneck() {
  const std::vector<Node> nodes{
      node_at("W1", 1, 0),  node_at("W2", 0, 0.5), node_at("W3", -1, 0), node_at("H1", 0, 2),
      node_at("X", 2, 4.5), node_at("H2", 0, 7),   node_at("E1", 1, 9),  node_at("E2", 0, 8.5),
      node_at("E3", -1, 9),
  };
  const std::vector<Link> links{
      {"bridge", "H1", "H2", 5000, 1500, 5.0, false},
      {"byp1", "H1", "X", 3500, 1000, 4.5, false},
      {"byp2", "X", "H2", 3500, 1000, 4.5, false},
      {"e1", "H2", "E1", 2300, 2000, 4.0, false},
      {"e2", "H2", "E2", 1600, 2000, 4.0, false},
      {"e3", "H2", "E3", 2300, 2000, 4.0, false},
      {"le12", "E1", "E2", 1200, 1500, 3.0, false},
      {"le23", "E2", "E3", 1200, 1500, 3.0, false},
      {"lw12", "W1", "W2", 1200, 1500, 3.0, false},
      {"w1", "W1", "H1", 2300, 2000, 4.0, false},
      {"w2", "W2", "H1", 1600, 2000, 5.0, false},
      {"w3", "W3", "H1", 2300, 2000, 6.0, false},
  };
  Bundle b{"f3", RoadNetwork(nodes, links), {}, DemandMatrix(8), {}, {}, {}, {}, {}, "2016-08-08"};
  for (const auto& n : b.network.nodes()) b.zones.push_back(zone_at(n));
  b.demand.insert(od(8, "ZW1", "ZE1", 800, 880, 800));
  b.demand.insert(od(8, "ZW2", "ZE2", 700, 770, 700));
  b.demand.insert(od(8, "ZW3", "ZE3", 600, 660, 600));
  b.demand.insert(od(8, "ZW1", "ZW2", 900, 990, 900));
  b.demand.insert(od(8, "ZE1", "ZE2", 900, 990, 900));
  b.demand.insert(od(8, "ZE2", "ZE3", 800, 880, 800));
  b.lines.push_back({"M1",
                     LineKind::metro,
                     {station_at("sW1", 1.1, 0), station_at("sW2", 0.1, 0.5), station_at("sH1", 0, 2.2),
                      station_at("sH2", 0, 6.8), station_at("sE2", 0.1, 8.5), station_at("sE1", 1.1, 9)},
                     kDefaultSegmentCapacity});
  b.lines.push_back({"B1",
                     LineKind::brt,
                     {station_at("sW3", -1.1, 0), station_at("sH1", 0, 2.2), station_at("sH2", 0, 6.8),
                      station_at("sE3", -1.1, 9)},
                     kDefaultSegmentCapacity});
  return b;
}

Bundle by_name(const std::string& name) {
  if (name == "f1" || name == "diamond") return diamond();
  if (name == "f2" || name == "braess") return braess(true);
  if (name == "f2-open") return braess(false);
  if (name == "f3" || name == "bottleneck") return bottleneck();
  throw ValidationError({"unknown fixture '" + name + "' (expected f1, f2, f2-open, f3)"});
}

ScenarioConfig write_bundle(const Bundle& b, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  ScenarioConfig c;
  c.data.nodes = dir / "nodes.csv";
  c.data.links = dir / "links.csv";
  c.data.zones = dir / "zones.csv";
  c.data.demand = dir / "demand.csv";
  write_nodes(b.network, c.data.nodes);
  write_links(b.network, c.data.links);
  write_zones(b.zones, c.data.zones);
  write_demand(b.demand, c.data.demand);
  if (!b.venues.empty()) {
    c.data.venues = dir / "venues.csv";
    c.data.sessions = dir / "sessions.csv";
    c.data.residences = dir / "residences.csv";
    write_venues(b.venues, c.data.venues);
    write_sessions(b.sessions, c.data.sessions);
    write_residences(b.residences, c.data.residences);
  }
  if (!b.lines.empty()) {
    c.data.lines = dir / "lines.csv";
    write_lines(b.lines, c.data.lines);
  }
  if (!b.overlay.entries.empty()) {
    c.data.overlay = dir / "overlay.csv";
    write_overlay(b.overlay, c.data.overlay);
  }
  c.hour = b.demand.hour();
  c.date = b.date;
  c.bpr = b.network.params();
  if (c.has_event_inputs()) {
    c.scenarios = {Scenario::habit, Scenario::selfish, Scenario::altruism};
  }
  write_json(dir / "scenario.json", config_to_json(c, dir));
  return c;
}

}  // namespace evtraffic::fixtures
