#include "evtraffic/service.hpp"

#include <httplib.h>

#include "evtraffic/error.hpp"
#include "evtraffic/result_io.hpp"
#include "evtraffic/table.hpp"

namespace evtraffic {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

ApiResponse error_response(int status, const std::string& code, const std::string& message,
                           const std::vector<std::string>& violations = {}) {
  json err = {{"code", code}, {"message", message}};
  if (!violations.empty()) err["violations"] = violations;
  return {status, {{"api_version", kApiVersion}, {"error", err}}};
}

json envelope(json body) {
  body["api_version"] = kApiVersion;
  return body;
}

std::map<OdKey, double> read_od_times(const fs::path& file) {
  std::map<OdKey, double> out;
  const auto t = Table::read(file);
  for (const auto& row : t.rows()) out[{t.cell(row, "origin"), t.cell(row, "dest")}] = t.number(row, "time_min");
  return out;
}

bool file_exists(const fs::path& p) {
  std::error_code ec;
  return fs::exists(p, ec);
}

}  // namespace

struct ScenarioService::WhatIfBase {
  EventContext ctx;
  AssignmentResult before;
};

std::string to_string(JobState state) {
  switch (state) {
    case JobState::queued: return "queued";
    case JobState::running: return "running";
    case JobState::done: return "done";
    case JobState::failed: return "failed";
  }
  return "unknown";
}

ScenarioService::ScenarioService(ServiceOptions options) : options_(std::move(options)) {
  base_ = load_config(options_.data_dir / "scenario.json");
  const auto report = validate(base_);
  if (!report.ok()) {
    std::vector<std::string> messages;
    for (const auto& v : report.violations) messages.push_back(v.str());
    throw ValidationError(std::move(messages));
  }
  const int slots = std::max(1, options_.job_slots);
  for (int i = 0; i < slots; ++i) workers_.emplace_back([this](std::stop_token st) { work(st); });
}

ScenarioService::~ScenarioService() {
  for (auto& w : workers_) w.request_stop();
  changed_.notify_all();
  workers_.clear();
}

void ScenarioService::work(std::stop_token stop) {
  while (true) {
    std::string id;
    {
      std::unique_lock lock(mutex_);
      if (!changed_.wait(lock, stop, [this] { return !queue_.empty(); })) return;
      id = queue_.front();
      queue_.pop_front();
      jobs_.at(id).state = JobState::running;
    }
    changed_.notify_all();
    run(id);
    changed_.notify_all();
  }
}

void ScenarioService::run(const std::string& id) {
  ScenarioConfig config;
  {
    std::lock_guard lock(mutex_);
    config = jobs_.at(id).config;
  }
  PipelineOptions opts;
  opts.run_root = options_.run_root;
  opts.workers = options_.solver_workers;
  opts.progress = [this, id](const std::string& stage, int iteration) {
    std::lock_guard lock(mutex_);
    auto& job = jobs_.at(id);
    job.stage = stage;
    job.iteration = iteration;
  };
  std::string error_stage;
  std::string error;
  try {
    run_pipeline(config, opts);
  } catch (const StageError& e) {
    error_stage = e.stage();
    error = std::string(e.what()).substr(error_stage.size() + 2);  // as recorded in the manifest
  } catch (const std::exception& e) {
    error_stage = "setup";
    error = e.what();
  }
  std::lock_guard lock(mutex_);
  auto& job = jobs_.at(id);
  job.state = error.empty() ? JobState::done : JobState::failed;
  job.error_stage = error_stage;
  job.error = error;
  // Finished jobs report the same progress a restarted service reads from disk.
  job.stage = error.empty() ? "complete" : error_stage;
  job.iteration = 0;
}

std::optional<ScenarioService::Job> ScenarioService::find(const std::string& id) const {
  {
    std::lock_guard lock(mutex_);
    if (const auto it = jobs_.find(id); it != jobs_.end()) return it->second;
  }
  // Not submitted in this process: fall back to the run store.
  if (id.find_first_not_of("0123456789abcdef") != std::string::npos || id.size() != 64) return std::nullopt;
  const auto dir = run_dir(id);
  if (!file_exists(dir / "manifest.json") || !file_exists(dir / "config.json")) return std::nullopt;
  try {
    const auto manifest = read_json(dir / "manifest.json");
    Job job;
    job.id = id;
    job.config = config_from_json(read_json(dir / "config.json"));
    const auto status = manifest.value("status", "");
    if (status == "complete") {
      job.state = JobState::done;
      job.stage = "complete";
    } else {
      job.state = JobState::failed;
      job.error_stage = manifest.value("failed_stage", "");
      job.error = manifest.value("error", "run interrupted");
      job.stage = job.error_stage;
    }
    return job;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

ApiResponse ScenarioService::health() const {
  std::lock_guard lock(mutex_);
  return {200, envelope({{"status", "ok"}, {"version", kVersion}, {"queued", queue_.size()}})};
}

ApiResponse ScenarioService::submit(const json& fragment) {
  if (!fragment.is_object()) return error_response(400, "bad_request", "request body must be a JSON object");
  ScenarioConfig config;
  try {
    auto doc = config_to_json(base_, options_.data_dir);
    doc.merge_patch(fragment);
    config = config_from_json(doc, options_.data_dir);
  } catch (const ValidationError& e) {
    return error_response(422, "validation", "configuration rejected", e.violations());
  } catch (const std::exception& e) {
    return error_response(422, "validation", e.what());
  }
  const auto report = validate(config);
  if (!report.ok()) {
    std::vector<std::string> messages;
    for (const auto& v : report.violations) messages.push_back(v.str());
    return error_response(422, "validation", "configuration rejected", messages);
  }
  const auto id = config_hash(config);
  bool created = false;
  {
    std::lock_guard lock(mutex_);
    auto it = jobs_.find(id);
    if (it == jobs_.end() || it->second.state == JobState::failed) {
      Job job;
      job.id = id;
      job.config = std::move(config);
      jobs_[id] = std::move(job);
      queue_.push_back(id);
      created = true;
    }
  }
  if (created) changed_.notify_all();
  auto view = status(id);
  view.status = created ? 202 : 200;
  view.body["created"] = created;
  return view;
}

ApiResponse ScenarioService::list() const {
  json jobs = json::array();
  std::lock_guard lock(mutex_);
  for (const auto& [id, job] : jobs_) jobs.push_back({{"job_id", id}, {"state", to_string(job.state)}});
  return {200, envelope({{"jobs", jobs}})};
}

ApiResponse ScenarioService::status(const std::string& job_id) const {
  const auto job = find(job_id);
  if (!job) return error_response(404, "not_found", "unknown job " + job_id);
  json body = {{"job_id", job->id},
               {"state", to_string(job->state)},
               {"progress", {{"stage", job->stage}, {"iteration", job->iteration}}},
               {"config", config_to_json(job->config, options_.data_dir)}};
  if (job->state == JobState::failed) body["error"] = {{"stage", job->error_stage}, {"message", job->error}};
  if (job->state == JobState::done) {
    try {
      body["summary"] = read_json(run_dir(job_id) / "summary.json");
    } catch (const std::exception& e) {
      return error_response(500, "io", e.what());
    }
  }
  return {200, envelope(std::move(body))};
}

std::optional<JobState> ScenarioService::wait(const std::string& job_id, std::chrono::milliseconds timeout) const {
  std::unique_lock lock(mutex_);
  const auto done = [&] {
    const auto it = jobs_.find(job_id);
    return it == jobs_.end() || it->second.state == JobState::done || it->second.state == JobState::failed;
  };
  changed_.wait_for(lock, timeout, done);
  const auto it = jobs_.find(job_id);
  if (it == jobs_.end()) {
    lock.unlock();
    const auto job = find(job_id);
    return job ? std::optional(job->state) : std::nullopt;
  }
  return it->second.state;
}

ApiResponse ScenarioService::zone_times(const std::string& job_id, const std::string& zone,
                                        const std::string& scenario) const {
  const auto job = find(job_id);
  if (!job) return error_response(404, "not_found", "unknown job " + job_id);
  if (job->state != JobState::done) return error_response(409, "not_ready", "job is " + to_string(job->state));
  const auto dir = run_dir(job_id);
  std::string stem = scenario;
  if (stem.empty()) stem = file_exists(dir / "selfish_ods.csv") ? "selfish" : "baseline";
  if (stem.find_first_of("/\\") != std::string::npos || !file_exists(dir / (stem + "_ods.csv"))) {
    return error_response(404, "not_found", "no scenario '" + stem + "' in job " + job_id);
  }
  try {
    bool known = false;
    for (const auto& z : load_zones(job->config.data.zones)) known = known || z.zone_id == zone;
    if (!known) return error_response(404, "not_found", "unknown zone " + zone);
    const auto during = read_od_times(dir / (stem + "_ods.csv"));
    const auto before = read_od_times(dir / "baseline_ods.csv");
    json dests = json::object();
    for (const auto& [od, minutes] : during) {
      if (od.origin != zone) continue;
      json entry = {{"minutes", minutes}, {"baseline_minutes", nullptr}, {"increment_pct", nullptr}};
      if (const auto b = before.find(od); b != before.end()) {
        entry["baseline_minutes"] = b->second;
        if (b->second > 0.0) entry["increment_pct"] = (minutes - b->second) / b->second * 100.0;
      }
      dests[od.dest] = std::move(entry);
    }
    return {200, envelope({{"job_id", job_id}, {"origin", zone}, {"scenario", stem}, {"destinations", dests}})};
  } catch (const std::exception& e) {
    return error_response(500, "io", e.what());
  }
}

std::shared_ptr<const ScenarioService::WhatIfBase> ScenarioService::whatif_base(const std::string& id,
                                                                                const Job& job) {
  if (const auto it = bases_.find(id); it != bases_.end()) return it->second;
  auto ctx = prepare_event(job.config);
  const auto dir = run_dir(id);
  const bool selfish = file_exists(dir / "selfish_links.csv");
  auto before = selfish ? load_result(ctx.event_network, dir, "selfish") : load_result(ctx.data.network, dir, "baseline");
  before.scenario = selfish ? Scenario::selfish : Scenario::baseline;
  auto base = std::make_shared<const WhatIfBase>(WhatIfBase{std::move(ctx), std::move(before)});
  bases_[id] = base;
  return base;
}

ApiResponse ScenarioService::whatif(const std::string& job_id, const json& params) {
  const auto job = find(job_id);
  if (!job) return error_response(404, "not_found", "unknown job " + job_id);
  if (job->state != JobState::done) return error_response(409, "not_ready", "job is " + to_string(job->state));
  if (!params.is_object()) return error_response(400, "bad_request", "request body must be a JSON object");

  const auto& sc = job->config.strategy;
  StrategyRequest req{sc.mode, sc.radius_km, sc.top_k, sc.reduction_fraction, sc.persons_per_vehicle};
  std::vector<std::string> problems;
  try {
    for (const auto& [key, value] : params.items()) {
      if (key == "radius_km") {
        req.radius_km = value.get<double>();
      } else if (key == "top_k") {
        req.top_k = value.get<int>();
      } else if (key == "fraction") {
        req.reduction_fraction = value.get<double>();
      } else if (key == "mode") {
        req.mode = parse_strategy_mode(value.get<std::string>());
      } else {
        problems.push_back("unknown parameter '" + key + "'");
      }
    }
  } catch (const std::exception& e) {
    problems.push_back(e.what());
  }
  if (!(req.radius_km >= 0.0)) problems.push_back("radius_km must be >= 0");
  if (req.top_k < 1) problems.push_back("top_k must be >= 1");
  if (!(req.reduction_fraction >= 0.0 && req.reduction_fraction <= 1.0)) problems.push_back("fraction must be in [0,1]");
  if (job->config.data.lines.empty()) problems.push_back("job has no transit lines");
  if (!problems.empty()) return error_response(422, "validation", "what-if parameters rejected", problems);

  const auto key = job_id + "|" + to_string(req.mode) + "|" + format_number(req.radius_km) + "|" +
                   std::to_string(req.top_k) + "|" + format_number(req.reduction_fraction);
  std::lock_guard lock(cache_mutex_);
  if (const auto it = whatif_cache_.find(key); it != whatif_cache_.end()) return {200, it->second, true};
  try {
    const auto base = whatif_base(job_id, *job);
    auto solver = job->config.solver;
    solver.workers = options_.solver_workers;
    const auto plan = evaluate_strategy(base->ctx, base->before, req, solver);
    auto body = savings_json(plan);
    body["job_id"] = job_id;
    body["baseline_scenario"] = to_string(base->before.scenario);
    body = envelope(std::move(body));
    whatif_cache_[key] = body;
    return {200, body, false};
  } catch (const ValidationError& e) {
    return error_response(422, "validation", "what-if evaluation rejected", e.violations());
  } catch (const std::exception& e) {
    return error_response(500, "error", e.what());
  }
}

void ScenarioService::mount(httplib::Server& server) {
  const auto reply = [](httplib::Response& res, const ApiResponse& r) {
    res.status = r.status;
    res.set_header("Access-Control-Allow-Origin", "*");
    res.set_header("X-Cache", r.cache_hit ? "hit" : "miss");
    res.set_content(r.body.dump(), "application/json");
  };
  const auto parse_body = [](const httplib::Request& req) -> std::optional<json> {
    if (req.body.empty()) return json::object();
    try {
      return json::parse(req.body);
    } catch (const json::parse_error&) {
      return std::nullopt;
    }
  };

  server.Get("/api/v1/health", [=, this](const httplib::Request&, httplib::Response& res) { reply(res, health()); });
  server.Get("/api/v1/jobs", [=, this](const httplib::Request&, httplib::Response& res) { reply(res, list()); });
  server.Post("/api/v1/jobs", [=, this](const httplib::Request& req, httplib::Response& res) {
    const auto body = parse_body(req);
    reply(res, body ? submit(*body) : error_response(400, "bad_request", "malformed JSON body"));
  });
  server.Get(R"(/api/v1/jobs/([0-9a-f]+))", [=, this](const httplib::Request& req, httplib::Response& res) {
    reply(res, status(req.matches[1]));
  });
  server.Get(R"(/api/v1/jobs/([0-9a-f]+)/zones/([^/]+))",
             [=, this](const httplib::Request& req, httplib::Response& res) {
               const auto scenario = req.has_param("scenario") ? req.get_param_value("scenario") : std::string();
               reply(res, zone_times(req.matches[1], req.matches[2], scenario));
             });
  server.Post(R"(/api/v1/jobs/([0-9a-f]+)/whatif)", [=, this](const httplib::Request& req, httplib::Response& res) {
    const auto body = parse_body(req);
    reply(res, body ? whatif(req.matches[1], *body) : error_response(400, "bad_request", "malformed JSON body"));
  });
  if (!options_.ui_dir.empty()) server.set_mount_point("/", options_.ui_dir.string());
}

}  // namespace evtraffic
