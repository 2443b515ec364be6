#pragma once

#include <condition_variable>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "evtraffic/config.hpp"
#include "evtraffic/pipeline.hpp"

namespace httplib {
class Server;
}

namespace evtraffic {

inline constexpr const char* kApiVersion = "v1";

struct ServiceOptions {
  // Directory holding scenario.json and the data files it references.
  std::filesystem::path data_dir;
  std::filesystem::path run_root = "runs";
  int job_slots = 1;       // concurrently running pipeline jobs
  int solver_workers = 1;  // threads inside one solve
  std::filesystem::path ui_dir;  // optional static bundle served at /
};

enum class JobState { queued, running, done, failed };
std::string to_string(JobState state);

struct ApiResponse {
  int status = 200;
  nlohmann::json body;
  bool cache_hit = false;
};

// Job store, worker pool and the /api/v1 handlers. Every response for a done
// job is derived from the run directory, so a restarted service answers the same.
class ScenarioService {
 public:
  explicit ScenarioService(ServiceOptions options);
  ~ScenarioService();
  ScenarioService(const ScenarioService&) = delete;
  ScenarioService& operator=(const ScenarioService&) = delete;

  ApiResponse health() const;
  // Merge-patches the fragment onto the base scenario and enqueues it.
  ApiResponse submit(const nlohmann::json& fragment);
  ApiResponse list() const;
  ApiResponse status(const std::string& job_id) const;
  ApiResponse zone_times(const std::string& job_id, const std::string& zone,
                         const std::string& scenario = {}) const;
  ApiResponse whatif(const std::string& job_id, const nlohmann::json& params);

  // Blocks until the job leaves queued/running or the timeout expires.
  std::optional<JobState> wait(const std::string& job_id, std::chrono::milliseconds timeout) const;

  void mount(httplib::Server& server);

  const ScenarioConfig& base_config() const { return base_; }

 private:
  struct Job {
    std::string id;
    ScenarioConfig config;
    JobState state = JobState::queued;
    std::string stage;
    int iteration = 0;
    std::string error_stage;
    std::string error;
  };
  struct WhatIfBase;

  void work(std::stop_token stop);
  void run(const std::string& id);
  std::optional<Job> find(const std::string& id) const;
  std::shared_ptr<const WhatIfBase> whatif_base(const std::string& id, const Job& job);
  std::filesystem::path run_dir(const std::string& id) const { return options_.run_root / id; }

  ServiceOptions options_;
  ScenarioConfig base_;

  mutable std::mutex mutex_;
  mutable std::condition_variable_any changed_;
  std::map<std::string, Job> jobs_;
  std::deque<std::string> queue_;

  std::mutex cache_mutex_;
  std::map<std::string, std::shared_ptr<const WhatIfBase>> bases_;
  std::map<std::string, nlohmann::json> whatif_cache_;

  std::vector<std::jthread> workers_;
};

}  // namespace evtraffic
