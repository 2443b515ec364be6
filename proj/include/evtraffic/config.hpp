#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "evtraffic/assign.hpp"
#include "evtraffic/demand.hpp"
#include "evtraffic/netgraph.hpp"
#include "evtraffic/strategy.hpp"

namespace evtraffic {

struct DataFiles {
  std::filesystem::path nodes;
  std::filesystem::path links;
  std::filesystem::path zones;
  std::filesystem::path demand;
  // Event inputs; optional for baseline-only runs.
  std::filesystem::path venues;
  std::filesystem::path sessions;
  std::filesystem::path residences;
  std::filesystem::path lines;
  std::filesystem::path overlay;
};

struct StrategyConfig {
  bool enabled = false;
  StrategyMode mode = StrategyMode::marginal;
  double radius_km = 2.0;
  int top_k = 1000;
  double reduction_fraction = 0.60;
  double persons_per_vehicle = 1.0;
  // Optional sweep written as a savings-vs-k table (marginal and uniform).
  std::vector<int> top_k_sweep;
  std::vector<double> radius_sweep;
};

struct ScenarioConfig {
  DataFiles data;
  int hour = 8;
  std::string date;
  double day_scale = 1.0;
  BprParams bpr;
  ModeSplitConfig mode_split;
  DepartureSplit departure_split;
  SolverConfig solver;
  std::vector<Scenario> scenarios;  // habit / selfish / altruism; baseline always runs
  std::vector<double> lambdas;      // mixed runs
  StrategyConfig strategy;

  bool has_event_inputs() const;
};

// Relative data paths are resolved against base_dir.
ScenarioConfig config_from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
// Data paths are written relative to base_dir when they live below it.
nlohmann::json config_to_json(const ScenarioConfig& config, const std::filesystem::path& base_dir = {});
ScenarioConfig load_config(const std::filesystem::path& path);

// SHA-256 over the canonical configuration (sorted keys, data paths replaced by
// the digest of the file content). Independent of key order and file location.
std::string config_hash(const ScenarioConfig& config);
std::string sha256_hex(std::string_view bytes);

struct Violation {
  std::string file;
  std::size_t line = 0;  // 0 when not tied to a row
  std::string message;
  std::string str() const;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
};

// Parses every referenced file and checks parameter ranges and cross-file references.
ValidationReport validate(const ScenarioConfig& config);

// Everything a run needs, loaded and checked.
struct Dataset {
  RoadNetwork network;
  std::vector<Zone> zones;
  DemandMatrix demand;  // selected hour, day_scale applied
  std::vector<Venue> venues;
  std::vector<EventSession> sessions;
  std::vector<Residence> residences;
  std::vector<TransitLine> lines;
  CapacityOverlay overlay;  // file overlay merged with olympic_lane flags
};

// Throws ValidationError with the full report when validation fails.
Dataset load_dataset(const ScenarioConfig& config);

}  // namespace evtraffic
