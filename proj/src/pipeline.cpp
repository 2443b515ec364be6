#include "evtraffic/pipeline.hpp"

#include <algorithm>
#include <set>

#include "evtraffic/error.hpp"
#include "evtraffic/metrics.hpp"
#include "evtraffic/result_io.hpp"
#include "evtraffic/table.hpp"

namespace evtraffic {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// An hour without trips still produces a run: zero volumes at free-flow times.
AssignmentResult assign_or_idle(const RoadNetwork& network, std::span<const Trip> trips, bool system_optimum,
                                const SolverConfig& solver) {
  if (!trips.empty()) return system_optimum ? solve_so(network, trips, solver) : solve_ue(network, trips, solver);
  AssignmentResult r;
  r.scenario = system_optimum ? Scenario::altruism : Scenario::selfish;
  r.link_volumes.assign(network.num_links(), 0.0);
  r.link_times = network.freeflow_costs();
  return r;
}

// Columns that stay strings in JSON exports even when they look numeric.
const std::set<std::string> kTextColumns{"edge_id",      "origin",       "dest",         "origin_zone",
                                         "dest_zone",    "zone",         "scenario",     "line_id",
                                         "from_station", "to_station",   "origin_station", "dest_station",
                                         "direction",    "edges",        "mode",         "stem"};

std::string pct(double fraction) { return format_number(fraction * 100.0); }

json result_entry(const AssignmentResult& r, const std::string& stem) {
  return {{"stem", stem},
          {"scenario", to_string(r.scenario)},
          {"lambda", r.lambda},
          {"converged", r.converged},
          {"relative_gap", r.relative_gap},
          {"iterations", r.iterations}};
}

class RunWriter {
 public:
  RunWriter(fs::path dir, const std::string& hash) : dir_(std::move(dir)) {
    manifest_ = {{"version", kVersion},
                 {"config_hash", hash},
                 {"status", "running"},
                 {"stages", json::array()},
                 {"results", json::array()},
                 {"tables", json::array()},
                 {"converged", true}};
  }

  template <typename Fn>
  void stage(const std::string& name, Fn&& fn) {
    try {
      fn();
    } catch (const ValidationError& e) {
      fail(name, e.what(), "validation");
    } catch (const IoError& e) {
      fail(name, e.what(), "io");
    } catch (const std::exception& e) {
      fail(name, e.what(), "error");
    }
    manifest_["stages"].push_back(name);
    flush();
  }

  void result(const AssignmentResult& r, const RoadNetwork& network, const std::string& stem) {
    write_result(r, network, dir_, stem);
    manifest_["results"].push_back(result_entry(r, stem));
    if (!r.converged) manifest_["converged"] = false;
    for (const char* suffix : {"_links.csv", "_ods.csv", "_paths.csv"}) table(stem + suffix);
  }

  void table(const std::string& name) { manifest_["tables"].push_back(name); }

  void text(const std::string& name, const std::string& content) {
    write_text_file(dir_ / name, content);
    table(name);
  }

  void complete() {
    manifest_["status"] = "complete";
    flush();
  }

  const json& manifest() const { return manifest_; }
  json& manifest() { return manifest_; }

 private:
  [[noreturn]] void fail(const std::string& name, const std::string& what, const std::string& cause) {
    manifest_["status"] = "failed";
    manifest_["failed_stage"] = name;
    manifest_["error"] = what;
    manifest_["error_cause"] = cause;
    try {
      flush();
    } catch (...) {
    }
    throw StageError(name, what, cause);
  }

  void flush() { write_json(dir_ / "manifest.json", manifest_); }

  fs::path dir_;
  json manifest_;
};


DataFiles absolute(DataFiles d) {
  for (auto* p : {&d.nodes, &d.links, &d.zones, &d.demand, &d.venues, &d.sessions, &d.residences, &d.lines,
                  &d.overlay}) {
    if (!p->empty()) *p = fs::absolute(*p).lexically_normal();
  }
  return d;
}

json table_to_json(const Table& t) {
  json rows = json::array();
  for (const auto& row : t.rows()) {
    json obj = json::object();
    for (std::size_t i = 0; i < t.header().size(); ++i) {
      const auto& col = t.header()[i];
      const auto& cell = row.fields[i];
      if (kTextColumns.contains(col) || cell.empty()) {
        obj[col] = cell;
        continue;
      }
      try {
        obj[col] = parse_number(cell);
      } catch (const std::exception&) {
        obj[col] = cell;
      }
    }
    rows.push_back(std::move(obj));
  }
  return rows;
}

}  // namespace

std::string mixed_stem(double lambda) { return "mixed_" + format_number(lambda); }

json read_json(const fs::path& path) {
  try {
    return json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const json& doc) { write_text_file(path, doc.dump(2) + "\n"); }

EventContext prepare_event(const ScenarioConfig& config) {
  auto data = load_dataset(config);
  auto base_trips = make_trips(data.network, data.zones, data.demand);
  const bool has_event = config.has_event_inputs();
  EventDemand generated;
  DemandMatrix event_demand = data.demand;
  DemandMatrix delta(config.hour, config.day_scale);
  std::optional<RoadNetwork> event_network;
  if (has_event) {
    std::vector<GeoPoint> stations;
    for (const auto& s : all_stations(data.lines)) stations.push_back(s.point());
    const EventDemandInputs inputs{data.sessions, data.venues, data.residences, data.zones, stations,
                                   config.departure_split, config.mode_split, {}};
    generated = generate_event_demand(config.date, config.hour, inputs);
    event_demand = combine(data.demand, generated.vehicle_additions);
    for (auto r : generated.vehicle_additions) delta.insert(r);
    event_network = apply_overlay(data.network, data.overlay);
  } else {
    event_network = data.network;
  }
  auto event_trips = make_trips(*event_network, data.zones, event_demand);
  auto delta_trips = make_trips(*event_network, data.zones, delta);
  auto cfg = config;
  cfg.data = absolute(cfg.data);
  return EventContext{std::move(cfg),           std::move(data),        std::move(base_trips),
                      has_event,                std::move(generated),   std::move(event_demand),
                      std::move(delta),         std::move(*event_network), std::move(event_trips),
                      std::move(delta_trips)};
}

StrategyPlan evaluate_strategy(const EventContext& ctx, const AssignmentResult& before, const StrategyRequest& request,
                               const SolverConfig& solver) {
  const auto eligible = eligible_ods(ctx.event_network, ctx.data.zones, ctx.data.lines, before, ctx.event_demand,
                                     request.radius_km);
  auto plan = plan_marginal(eligible, request.top_k, request.reduction_fraction);
  if (request.mode == StrategyMode::uniform) {
    plan = plan_uniform(eligible, plan.total_removed());
    plan.top_k = request.top_k;
  }
  plan.radius_km = request.radius_km;
  plan = apply_and_evaluate(ctx.event_network, ctx.data.zones, ctx.event_demand, before, std::move(plan), solver);
  plan.ridership =
      ridership_deltas(plan, ctx.data.lines, {request.persons_per_vehicle, ctx.config.mode_split.taxi_occupancy});
  return plan;
}

json savings_json(const StrategyPlan& plan) {
  const Savings s = plan.savings.value_or(Savings{});
  json reductions = json::array();
  for (const auto& r : plan.reductions) {
    reductions.push_back({{"origin", r.od.origin},
                          {"dest", r.od.dest},
                          {"removed_vph", r.removed_vph},
                          {"mc_p_min", r.marginal_path_cost},
                          {"origin_station", r.origin_station},
                          {"dest_station", r.dest_station},
                          {"tourist_share", r.tourist_share}});
  }
  json segments = json::array();
  std::size_t over = 0;
  for (const auto& d : plan.ridership) {
    over += d.over_capacity ? 1 : 0;
    segments.push_back({{"line_id", d.line_id},
                        {"from_station", d.from_station},
                        {"to_station", d.to_station},
                        {"direction", d.direction},
                        {"delta_persons", d.delta_persons},
                        {"over_capacity", d.over_capacity}});
  }
  return {{"mode", to_string(plan.mode)},
          {"radius_km", plan.radius_km},
          {"top_k", plan.top_k},
          {"reduction_fraction", plan.reduction_fraction},
          {"time_before_vmin", s.time_before},
          {"time_after_vmin", s.time_after},
          {"saving_pct", s.saving_fraction * 100.0},
          {"removed_vph", s.removed_vehicles},
          {"total_vph", s.total_vehicles},
          {"removed_pct", s.removed_fraction * 100.0},
          {"speed_before_kmh", s.speed_before_kmh},
          {"speed_after_kmh", s.speed_after_kmh},
          {"converged", s.converged},
          {"reductions", reductions},
          {"segments", segments},
          {"over_capacity_segments", over}};
}

RunOutcome run_pipeline(const ScenarioConfig& config, const PipelineOptions& options) {
  const auto hash = config_hash(config);
  const auto run_dir = options.run_root / hash;
  const auto manifest_path = run_dir / "manifest.json";
  std::error_code ec;
  if (!options.force && fs::exists(manifest_path, ec)) {
    auto manifest = read_json(manifest_path);
    if (manifest.value("status", "") == "complete") {
      return {run_dir, hash, true, manifest.value("converged", true), manifest};
    }
  }

  // Validation errors surface before anything is written.
  auto ctx = prepare_event(config);

  fs::remove_all(run_dir, ec);
  fs::create_directories(run_dir, ec);
  if (ec) throw IoError("cannot create run directory " + run_dir.string() + ": " + ec.message());

  RunWriter w(run_dir, hash);
  write_json(run_dir / "config.json", config_to_json(ctx.config));

  auto solver_for = [&](const std::string& stage) {
    auto s = config.solver;
    s.workers = options.workers;
    if (options.progress) s.on_iteration = [&, stage](int it, double) { options.progress(stage, it); };
    return s;
  };

  const auto& network = ctx.data.network;
  AssignmentResult baseline;
  w.stage("baseline", [&] {
    write_demand(ctx.data.demand, run_dir / "demand.csv");
    w.table("demand.csv");
    baseline = assign_or_idle(network, ctx.base_trips, false, solver_for("baseline"));
    baseline.scenario = Scenario::baseline;
    w.result(baseline, network, "baseline");
  });

  json summary = {{"version", kVersion},
                  {"config_hash", hash},
                  {"hour", config.hour},
                  {"date", config.date},
                  {"scenarios", json::object()}};
  std::vector<std::pair<std::string, AssignmentResult>> scenario_results;
  std::vector<std::pair<double, AssignmentResult>> mixed_results;
  const bool event = ctx.has_event && options.event_stages;

  if (event) {
    w.stage("event_demand", [&] {
      write_demand(ctx.event_demand, run_dir / "event_demand.csv");
      w.table("event_demand.csv");
      TableWriter transit({"origin", "dest", "mode", "persons"});
      for (const auto& t : ctx.generated.transit_persons) {
        transit.row({t.origin, t.dest, to_string(t.mode), format_number(t.persons)});
      }
      w.text("transit_persons.csv", transit.str());
      json by_mode = json::object();
      for (const auto& [mode, persons] : ctx.generated.persons_by_mode) by_mode[to_string(mode)] = persons;
      summary["event"] = {{"spectators", ctx.generated.spectators},
                          {"persons_by_mode", by_mode},
                          {"tourist_vehicles", ctx.delta_demand.total_vehicles()},
                          {"clamped_departures", ctx.generated.clamped_departures},
                          {"unmatched_locations", ctx.generated.unmatched_locations}};
    });

    const auto wanted = [&](Scenario s) { return std::ranges::find(config.scenarios, s) != config.scenarios.end(); };
    std::optional<AssignmentResult> habit;
    if (wanted(Scenario::habit) || !config.lambdas.empty()) {
      w.stage("habit", [&] {
        habit = solve_habit(ctx.event_network, baseline, ctx.delta_trips, baseline.link_times, options.workers);
        w.result(*habit, ctx.event_network, "habit");
        scenario_results.emplace_back("habit", *habit);
      });
    }
    if (wanted(Scenario::selfish) || config.strategy.enabled) {
      w.stage("selfish", [&] {
        auto r = assign_or_idle(ctx.event_network, ctx.event_trips, false, solver_for("selfish"));
        r.scenario = Scenario::selfish;
        w.result(r, ctx.event_network, "selfish");
        scenario_results.emplace_back("selfish", std::move(r));
      });
    }
    if (wanted(Scenario::altruism)) {
      w.stage("altruism", [&] {
        auto r = assign_or_idle(ctx.event_network, ctx.event_trips, true, solver_for("altruism"));
        r.scenario = Scenario::altruism;
        w.result(r, ctx.event_network, "altruism");
        scenario_results.emplace_back("altruism", std::move(r));
      });
    }
    for (double lambda : config.lambdas) {
      const auto stem = mixed_stem(lambda);
      w.stage(stem, [&] {
        auto r = solve_mixed(ctx.event_network, *habit, ctx.event_trips, lambda, solver_for(stem));
        w.result(r, ctx.event_network, stem);
        mixed_results.emplace_back(lambda, std::move(r));
      });
    }
  }

  w.stage("metrics", [&] {
    TableWriter metrics({"scenario", "lambda", "collective_time_vmin", "avg_speed_kmh", "i_comm_pct", "converged",
                         "relative_gap", "iterations"});
    TableWriter zones({"scenario", "zone", "origin_increment_pct", "dest_increment_pct"});
    TableWriter tourists({"scenario", "count", "min", "q1", "median", "q3", "max", "mean"});
    auto add = [&](const std::string& label, const RoadNetwork& net, const AssignmentResult& r) {
      const auto report = impact_report(label, net, baseline, r, ctx.data.demand, ctx.event_demand);
      metrics.row({label, format_number(r.lambda), format_number(report.collective_time),
                   report.avg_speed_kmh ? format_number(*report.avg_speed_kmh) : "", format_number(report.commuter.percent),
                   r.converged ? "1" : "0", format_number(r.relative_gap), std::to_string(r.iterations)});
      std::set<std::string> zone_ids;
      for (const auto& [z, v] : report.zones.by_origin) zone_ids.insert(z);
      for (const auto& [z, v] : report.zones.by_dest) zone_ids.insert(z);
      for (const auto& z : zone_ids) {
        const auto o = report.zones.by_origin.find(z);
        const auto d = report.zones.by_dest.find(z);
        zones.row({label, z, o == report.zones.by_origin.end() ? "" : format_number(o->second),
                   d == report.zones.by_dest.end() ? "" : format_number(d->second)});
      }
      if (report.tourist_times) {
        const auto& t = *report.tourist_times;
        tourists.row({report.scenario, std::to_string(t.count), format_number(t.min), format_number(t.q1),
                      format_number(t.median), format_number(t.q3), format_number(t.max), format_number(t.mean)});
      }
      summary["scenarios"][label] = {{"lambda", r.lambda},
                                     {"collective_time_vmin", report.collective_time},
                                     {"avg_speed_kmh", report.avg_speed_kmh ? json(*report.avg_speed_kmh) : json(nullptr)},
                                     {"i_comm_pct", report.commuter.percent},
                                     {"converged", r.converged},
                                     {"relative_gap", r.relative_gap},
                                     {"iterations", r.iterations}};
      return report;
    };
    add("baseline", network, baseline);
    for (const auto& [label, r] : scenario_results) add(label, ctx.event_network, r);
    TableWriter sweep({"lambda", "i_comm_pct", "collective_time_vmin", "converged"});
    json sweep_doc = json::array();
    for (const auto& [lambda, r] : mixed_results) {
      const auto report = add(mixed_stem(lambda), ctx.event_network, r);
      sweep.row({format_number(lambda), format_number(report.commuter.percent), format_number(report.collective_time),
                 r.converged ? "1" : "0"});
      sweep_doc.push_back({{"lambda", lambda}, {"i_comm_pct", report.commuter.percent}});
    }
    w.text("metrics.csv", metrics.str());
    w.text("zone_increments.csv", zones.str());
    w.text("tourist_times.csv", tourists.str());
    if (!mixed_results.empty()) {
      w.text("lambda_sweep.csv", sweep.str());
      summary["lambda_sweep"] = sweep_doc;
    }
  });

  if (config.strategy.enabled && options.strategy_stage) {
    w.stage("strategy", [&] {
      const AssignmentResult* before = &baseline;
      for (const auto& [label, r] : scenario_results) {
        if (label == "selfish") before = &r;
      }
      auto solver = solver_for("strategy");
      const auto& sc = config.strategy;
      const StrategyRequest request{sc.mode, sc.radius_km, sc.top_k, sc.reduction_fraction, sc.persons_per_vehicle};
      const auto plan = evaluate_strategy(ctx, *before, request, solver);
      write_reductions(plan, run_dir / "strategy_reductions.csv");
      w.table("strategy_reductions.csv");
      write_segment_deltas(plan.ridership, run_dir / "strategy_segments.csv");
      w.table("strategy_segments.csv");
      w.result(*plan.reassignment, ctx.event_network, "strategy");
      const auto doc = savings_json(plan);
      write_json(run_dir / "strategy_summary.json", doc);
      w.table("strategy_summary.json");
      summary["strategy"] = doc;
      if (!plan.savings->converged) w.manifest()["converged"] = false;

      if (!sc.top_k_sweep.empty() || !sc.radius_sweep.empty()) {
        const auto radii = sc.radius_sweep.empty() ? std::vector<double>{sc.radius_km} : sc.radius_sweep;
        const auto ks = sc.top_k_sweep.empty() ? std::vector<int>{sc.top_k} : sc.top_k_sweep;
        TableWriter sweep({"radius_km", "top_k", "removed_vph", "removed_pct", "marginal_saving_pct",
                           "uniform_saving_pct", "converged"});
        for (double r : radii) {
          for (int k : ks) {
            StrategyRequest m{StrategyMode::marginal, r, k, sc.reduction_fraction, sc.persons_per_vehicle};
            auto u = m;
            u.mode = StrategyMode::uniform;
            const auto pm = evaluate_strategy(ctx, *before, m, solver);
            const auto pu = evaluate_strategy(ctx, *before, u, solver);
            const bool ok = pm.savings->converged && pu.savings->converged;
            if (!ok) w.manifest()["converged"] = false;
            sweep.row({format_number(r), std::to_string(k), format_number(pm.savings->removed_vehicles),
                       pct(pm.savings->removed_fraction), pct(pm.savings->saving_fraction),
                       pct(pu.savings->saving_fraction), ok ? "1" : "0"});
          }
        }
        w.text("strategy_sweep.csv", sweep.str());
      }
    });
  }

  summary["converged"] = w.manifest()["converged"];
  write_json(run_dir / "summary.json", summary);
  w.table("summary.json");
  w.complete();
  return {run_dir, hash, false, w.manifest()["converged"].get<bool>(), w.manifest()};
}

std::vector<std::string> export_tables(const fs::path& run_dir) {
  const auto manifest_path = run_dir / "manifest.json";
  std::error_code ec;
  if (!fs::exists(manifest_path, ec)) throw IoError("unknown run " + run_dir.string());
  const auto manifest = read_json(manifest_path);
  std::vector<std::string> out;
  for (const auto& t : manifest.at("tables")) out.push_back(t.get<std::string>());
  return out;
}

std::vector<fs::path> export_run(const fs::path& run_dir, const fs::path& out_dir, const std::string& format) {
  if (format != "csv" && format != "json") throw ValidationError({"unknown export format '" + format + "'"});
  const auto tables = export_tables(run_dir);
  std::vector<fs::path> written;
  for (const auto& name : tables) {
    const auto src = run_dir / name;
    if (fs::path(name).extension() == ".json") {
      const auto target = out_dir / name;
      write_json(target, read_json(src));
      written.push_back(target);
      continue;
    }
    const auto table = Table::read(src);
    if (format == "csv") {
      TableWriter out(table.header());
      for (const auto& row : table.rows()) out.row(row.fields);
      const auto target = out_dir / name;
      out.write(target);
      written.push_back(target);
    } else {
      auto target = out_dir / name;
      target.replace_extension(".json");
      write_json(target, table_to_json(table));
      written.push_back(target);
    }
  }
  return written;
}

}  // namespace evtraffic
