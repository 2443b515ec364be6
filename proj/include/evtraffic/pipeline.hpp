#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "evtraffic/config.hpp"

namespace evtraffic {

inline constexpr const char* kVersion = "0.3.0";

struct PipelineOptions {
  std::filesystem::path run_root = "runs";
  bool force = false;
  int workers = 1;
  // Stage-level control. Baseline always runs.
  bool event_stages = true;
  bool strategy_stage = true;
  std::function<void(const std::string& stage, int iteration)> progress;
};

struct RunOutcome {
  std::filesystem::path run_dir;
  std::string config_hash;
  bool reused = false;
  bool converged = true;
  nlohmann::json manifest;
};

// Stage error carrying the stage that failed; the partial manifest is on disk.
// cause is "validation", "io" or "error".
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& message, std::string cause = "error")
      : std::runtime_error(stage + ": " + message), stage_(std::move(stage)), cause_(std::move(cause)) {}
  const std::string& stage() const noexcept { return stage_; }
  const std::string& cause() const noexcept { return cause_; }

 private:
  std::string stage_;
  std::string cause_;
};

// baseline UE -> event demand -> scenario solves -> metrics -> optional strategy.
// Results are written under run_root/<config hash>; an existing completed run
// with the same hash is reused unless options.force.
RunOutcome run_pipeline(const ScenarioConfig& config, const PipelineOptions& options = {});

std::string mixed_stem(double lambda);

// Loaded dataset plus everything derived from it before any event solve.
struct EventContext {
  ScenarioConfig config;
  Dataset data;
  std::vector<Trip> base_trips;
  bool has_event = false;
  EventDemand generated;
  DemandMatrix event_demand;  // base + tourist vehicles; equals base without event inputs
  DemandMatrix delta_demand;  // tourist vehicles only
  RoadNetwork event_network;  // overlay applied
  std::vector<Trip> event_trips;
  std::vector<Trip> delta_trips;
};

// Throws ValidationError when the configuration does not validate.
EventContext prepare_event(const ScenarioConfig& config);

struct StrategyRequest {
  StrategyMode mode = StrategyMode::marginal;
  double radius_km = 2.0;
  int top_k = 1000;
  double reduction_fraction = 0.6;
  double persons_per_vehicle = 1.0;
};

// Eligibility, plan and reassignment over `before` on the event network. A
// uniform request removes the same total the marginal plan of equal top_k would.
StrategyPlan evaluate_strategy(const EventContext& ctx, const AssignmentResult& before, const StrategyRequest& request,
                               const SolverConfig& solver);

nlohmann::json savings_json(const StrategyPlan& plan);

// Table files that make up an export, in export order.
std::vector<std::string> export_tables(const std::filesystem::path& run_dir);

// Re-renders every table of a run through its loader into out_dir.
// format is "csv" or "json". Throws IoError for a missing run.
std::vector<std::filesystem::path> export_run(const std::filesystem::path& run_dir,
                                              const std::filesystem::path& out_dir,
                                              const std::string& format = "csv");

nlohmann::json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const nlohmann::json& doc);

}  // namespace evtraffic
