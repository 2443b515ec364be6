#include <CLI11.hpp>
#include <httplib.h>

#include <csignal>
#include <iostream>

#include "evtraffic/error.hpp"
#include "evtraffic/fixtures.hpp"
#include "evtraffic/metrics.hpp"
#include "evtraffic/pipeline.hpp"
#include "evtraffic/result_io.hpp"
#include "evtraffic/service.hpp"
#include "evtraffic/table.hpp"

namespace fs = std::filesystem;
using namespace evtraffic;

namespace {

constexpr int kOk = 0;
constexpr int kInvalid = 1;
constexpr int kNotConverged = 2;
constexpr int kIo = 3;

struct Common {
  std::string config;
  std::string out = ".";
  int workers = 1;
};

SolverConfig solver_of(const ScenarioConfig& c, int workers) {
  auto s = c.solver;
  s.workers = workers;
  return s;
}

int converged_code(bool converged) {
  if (converged) return kOk;
  std::cerr << "warning: solver did not reach the gap tolerance\n";
  return kNotConverged;
}

void report_result(const std::string& label, const AssignmentResult& r) {
  std::cout << label << ": collective_time_vmin=" << format_number(collective_time(r))
            << " relative_gap=" << format_number(r.relative_gap) << " iterations=" << r.iterations
            << " converged=" << (r.converged ? "yes" : "no") << "\n";
}

httplib::Server* g_server = nullptr;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Event traffic impact engine"};
  app.require_subcommand(1);
  Common common;

  auto add_config = [&](CLI::App* cmd, bool out = true) {
    cmd->add_option("-c,--config", common.config, "scenario configuration (JSON)")->required();
    if (out) cmd->add_option("-o,--out", common.out, "output directory");
    cmd->add_option("-w,--workers", common.workers, "solver threads")->check(CLI::PositiveNumber);
  };

  auto* validate_cmd = app.add_subcommand("validate", "check configuration and data files");
  validate_cmd->add_option("-c,--config", common.config, "scenario configuration (JSON)")->required();

  std::string run_root = "runs";
  bool force = false;
  auto* run_cmd = app.add_subcommand("run", "full pipeline into the run store");
  add_config(run_cmd, false);
  run_cmd->add_option("--runs", run_root, "run store directory");
  run_cmd->add_flag("--force", force, "recompute even when a run with the same hash exists");

  auto* baseline_cmd = app.add_subcommand("baseline", "baseline user equilibrium");
  add_config(baseline_cmd);

  auto* event_cmd = app.add_subcommand("event-demand", "tourist demand for the configured date and hour");
  add_config(event_cmd);

  std::string scenario;
  double lambda = 1.0;
  auto* assign_cmd = app.add_subcommand("assign", "event scenario assignment");
  add_config(assign_cmd);
  assign_cmd->add_option("--scenario", scenario, "habit, selfish, altruism or mixed")
      ->required()
      ->check(CLI::IsMember({"habit", "selfish", "altruism", "mixed"}));
  auto* lambda_opt = assign_cmd->add_option("--lambda", lambda, "selfish share for mixed")->check(CLI::Range(0.0, 1.0));

  std::string mode = "marginal";
  std::optional<double> radius;
  std::optional<int> top_k;
  std::optional<double> fraction;
  auto* strategy_cmd = app.add_subcommand("strategy", "mode-change strategy on the selfish event assignment");
  add_config(strategy_cmd);
  strategy_cmd->add_option("--mode", mode)->check(CLI::IsMember({"marginal", "uniform"}));
  strategy_cmd->add_option("--radius-km", radius)->check(CLI::NonNegativeNumber);
  strategy_cmd->add_option("--top-k", top_k)->check(CLI::PositiveNumber);
  strategy_cmd->add_option("--fraction", fraction)->check(CLI::Range(0.0, 1.0));

  std::string run_dir;
  auto* metrics_cmd = app.add_subcommand("metrics", "print the metrics table of a run");
  auto* metrics_config = metrics_cmd->add_option("-c,--config", common.config, "scenario configuration (JSON)");
  metrics_cmd->add_option("--run", run_dir, "completed run directory")->excludes(metrics_config);
  metrics_cmd->add_option("--runs", run_root, "run store directory");
  metrics_cmd->add_option("-w,--workers", common.workers)->check(CLI::PositiveNumber);

  std::vector<double> lambdas;
  std::vector<int> k_sweep;
  std::vector<double> radius_sweep;
  auto* sweep_cmd = app.add_subcommand("sweep", "lambda and strategy sweeps through the run store");
  add_config(sweep_cmd, false);
  sweep_cmd->add_option("--runs", run_root, "run store directory");
  sweep_cmd->add_option("--lambdas", lambdas, "selfish shares")->delimiter(',')->check(CLI::Range(0.0, 1.0));
  sweep_cmd->add_option("--top-k", k_sweep, "strategy top-k values")->delimiter(',');
  sweep_cmd->add_option("--radius-km", radius_sweep, "strategy radii")->delimiter(',');
  sweep_cmd->add_flag("--force", force);

  std::string format = "csv";
  auto* export_cmd = app.add_subcommand("export", "re-render the tables of a run");
  export_cmd->add_option("--run", run_dir, "run directory")->required();
  export_cmd->add_option("-o,--out", common.out, "output directory")->required();
  export_cmd->add_option("--format", format)->check(CLI::IsMember({"csv", "json"}));

  int port = 8080;
  std::string host = "127.0.0.1";
  std::string data_dir;
  std::string ui_dir;
  int slots = 1;
  auto* serve_cmd = app.add_subcommand("serve", "HTTP scenario service");
  serve_cmd->add_option("--port", port)->check(CLI::Range(0, 65535));
  serve_cmd->add_option("--host", host);
  serve_cmd->add_option("--data", data_dir, "directory with scenario.json")->required();
  serve_cmd->add_option("--workers", slots, "concurrent pipeline jobs")->check(CLI::PositiveNumber);
  serve_cmd->add_option("--solver-workers", common.workers, "threads per solve")->check(CLI::PositiveNumber);
  serve_cmd->add_option("--runs", run_root, "run store directory");
  serve_cmd->add_option("--ui", ui_dir, "static UI bundle");

  std::string fixture_name;
  auto* fixture_cmd = app.add_subcommand("fixture", "write a synthetic dataset bundle");
  fixture_cmd->add_option("name", fixture_name, "f1, f2, f2-open or f3")->required();
  fixture_cmd->add_option("-o,--out", common.out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kInvalid;
  }

  try {
    const fs::path out = common.out;

    if (*validate_cmd) {
      const auto report = validate(load_config(common.config));
      for (const auto& v : report.violations) std::cout << v.str() << "\n";
      if (!report.ok()) {
        std::cout << report.violations.size() << " violation(s)\n";
        return kInvalid;
      }
      std::cout << "ok\n";
      return kOk;
    }

    if (*fixture_cmd) {
      const auto c = fixtures::write_bundle(fixtures::by_name(fixture_name), out);
      std::cout << (out / "scenario.json").string() << "\n";
      return kOk;
    }

    if (*export_cmd) {
      for (const auto& p : export_run(run_dir, out, format)) std::cout << p.string() << "\n";
      return kOk;
    }

    if (*serve_cmd) {
      ServiceOptions opts{data_dir, run_root, slots, common.workers, ui_dir};
      ScenarioService service(opts);
      httplib::Server server;
      service.mount(server);
      g_server = &server;
      std::signal(SIGINT, [](int) { g_server->stop(); });
      std::signal(SIGTERM, [](int) { g_server->stop(); });
      if (port == 0) {
        port = server.bind_to_any_port(host);
      } else if (!server.bind_to_port(host, port)) {
        std::cerr << "cannot bind " << host << ":" << port << "\n";
        return kIo;
      }
      std::cout << "listening on http://" << host << ":" << port << std::endl;
      server.listen_after_bind();
      return kOk;
    }

    if (*run_cmd || *sweep_cmd || (*metrics_cmd && run_dir.empty())) {
      if (common.config.empty()) {
        std::cerr << "--config or --run is required\n";
        return kInvalid;
      }
      auto config = load_config(common.config);
      if (*sweep_cmd) {
        if (!lambdas.empty()) config.lambdas = lambdas;
        if (!k_sweep.empty()) config.strategy.top_k_sweep = k_sweep;
        if (!radius_sweep.empty()) config.strategy.radius_sweep = radius_sweep;
        if (!k_sweep.empty() || !radius_sweep.empty()) config.strategy.enabled = true;
      }
      PipelineOptions opts;
      opts.run_root = run_root;
      opts.force = force;
      opts.workers = common.workers;
      const auto outcome = run_pipeline(config, opts);
      if (*metrics_cmd) {
        std::cout << read_text_file(outcome.run_dir / "metrics.csv");
      } else {
        std::cout << outcome.run_dir.string() << (outcome.reused ? " (cached)" : "") << "\n";
        if (*sweep_cmd) {
          for (const char* f : {"lambda_sweep.csv", "strategy_sweep.csv"}) {
            if (fs::exists(outcome.run_dir / f)) std::cout << read_text_file(outcome.run_dir / f);
          }
        }
      }
      return converged_code(outcome.converged);
    }

    if (*metrics_cmd) {
      std::cout << read_text_file(fs::path(run_dir) / "metrics.csv");
      return kOk;
    }

    // Single-stage commands share the prepared context.
    const auto config = load_config(common.config);
    const auto ctx = prepare_event(config);
    const auto solver = solver_of(config, common.workers);

    if (*baseline_cmd) {
      auto r = solve_ue(ctx.data.network, ctx.base_trips, solver);
      write_result(r, ctx.data.network, out, "baseline");
      report_result("baseline", r);
      return converged_code(r.converged);
    }

    if (!ctx.has_event && !*strategy_cmd) {
      std::cerr << "configuration has no venues/sessions/residences\n";
      return kInvalid;
    }

    if (*event_cmd) {
      write_demand(ctx.event_demand, out / "event_demand.csv");
      TableWriter transit({"origin", "dest", "mode", "persons"});
      for (const auto& t : ctx.generated.transit_persons) {
        transit.row({t.origin, t.dest, to_string(t.mode), format_number(t.persons)});
      }
      transit.write(out / "transit_persons.csv");
      std::cout << "spectators=" << format_number(ctx.generated.spectators)
                << " tourist_vehicles=" << format_number(ctx.delta_demand.total_vehicles())
                << " clamped_departures=" << ctx.generated.clamped_departures
                << " unmatched_locations=" << ctx.generated.unmatched_locations << "\n";
      return kOk;
    }

    const auto baseline = solve_ue(ctx.data.network, ctx.base_trips, solver);

    if (*assign_cmd) {
      if (scenario != "mixed" && lambda_opt->count() > 0) {
        std::cerr << "--lambda applies to --scenario mixed only\n";
        return kInvalid;
      }
      AssignmentResult r;
      std::string stem = scenario;
      if (scenario == "selfish") {
        r = solve_ue(ctx.event_network, ctx.event_trips, solver);
        r.scenario = Scenario::selfish;
      } else if (scenario == "altruism") {
        r = solve_so(ctx.event_network, ctx.event_trips, solver);
        r.scenario = Scenario::altruism;
      } else {
        r = solve_habit(ctx.event_network, baseline, ctx.delta_trips, baseline.link_times, common.workers);
        if (scenario == "mixed") {
          r = solve_mixed(ctx.event_network, r, ctx.event_trips, lambda, solver);
          stem = mixed_stem(lambda);
        }
      }
      write_result(baseline, ctx.data.network, out, "baseline");
      write_result(r, ctx.event_network, out, stem);
      const auto inc = commuter_increment(baseline, r, ctx.data.demand);
      report_result(stem, r);
      std::cout << "commuter_increment_pct=" << format_number(inc.percent) << "\n";
      return converged_code(baseline.converged && r.converged);
    }

    if (*strategy_cmd) {
      if (ctx.data.lines.empty()) {
        std::cerr << "strategy needs data.lines\n";
        return kInvalid;
      }
      auto before = solve_ue(ctx.event_network, ctx.event_trips, solver);
      before.scenario = Scenario::selfish;
      const auto& sc = config.strategy;
      const StrategyRequest req{parse_strategy_mode(mode), radius.value_or(sc.radius_km), top_k.value_or(sc.top_k),
                                fraction.value_or(sc.reduction_fraction), sc.persons_per_vehicle};
      const auto plan = evaluate_strategy(ctx, before, req, solver);
      write_reductions(plan, out / "strategy_reductions.csv");
      write_segment_deltas(plan.ridership, out / "strategy_segments.csv");
      write_json(out / "strategy_summary.json", savings_json(plan));
      const auto& s = *plan.savings;
      std::cout << "saving_pct=" << format_number(s.saving_fraction * 100.0)
                << " removed_pct=" << format_number(s.removed_fraction * 100.0)
                << " speed_before_kmh=" << format_number(s.speed_before_kmh)
                << " speed_after_kmh=" << format_number(s.speed_after_kmh) << "\n";
      return converged_code(before.converged && s.converged);
    }
  } catch (const ValidationError& e) {
    std::cerr << "validation failed:\n";
    for (const auto& v : e.violations()) std::cerr << "  " << v << "\n";
    return kInvalid;
  } catch (const StageError& e) {
    std::cerr << "stage " << e.stage() << " failed: " << e.what() << "\n";
    return e.cause() == "io" ? kIo : kInvalid;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kIo;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInvalid;
  }
  return kOk;
}
