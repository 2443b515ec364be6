#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "evtraffic/config.hpp"
#include "evtraffic/demand.hpp"
#include "evtraffic/netgraph.hpp"
#include "evtraffic/strategy.hpp"

// Small synthetic datasets used by the tests, the acceptance suite and the
// `fixture` CLI command. Coordinates are synthetic offsets around a fixed point.
namespace evtraffic::fixtures {

struct Bundle {
  std::string name;
  RoadNetwork network;
  std::vector<Zone> zones;
  DemandMatrix demand;
  std::vector<Venue> venues;
  std::vector<EventSession> sessions;
  std::vector<Residence> residences;
  std::vector<TransitLine> lines;
  CapacityOverlay overlay;
  std::string date = "2016-08-08";
};

// F1: four-node diamond (two routes between the west and east zones), one
// olympic lane on the upper route, one venue in the east.
Bundle diamond();

// F2: Braess network. With `crossing` the cheap A->B link is present.
Bundle braess(bool crossing = true);

// F3: west/east corridor with a single overloaded bridge, a slower bypass and
// local trips on each side; every zone centroid sits next to a transit station.
Bundle bottleneck();

Bundle by_name(const std::string& name);

// Writes the data files plus scenario.json into dir and returns the config.
ScenarioConfig write_bundle(const Bundle& bundle, const std::filesystem::path& dir);

}  // namespace evtraffic::fixtures
