#include "evtraffic/config.hpp"

#include <openssl/evp.h>

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>

#include "evtraffic/error.hpp"
#include "evtraffic/table.hpp"

namespace evtraffic {
namespace {

using nlohmann::json;

const std::set<std::string> kTopLevelKeys{"data", "hour", "date", "day_scale", "bpr", "mode_split",
                                          "departure_split", "solver", "scenarios", "lambdas", "strategy"};

std::filesystem::path resolve(const json& data, const char* key, const std::filesystem::path& base) {
  if (!data.contains(key) || data.at(key).is_null()) return {};
  std::filesystem::path p = data.at(key).get<std::string>();
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return (base / p).lexically_normal();
}

std::string relative_to(const std::filesystem::path& p, const std::filesystem::path& base) {
  if (p.empty() || base.empty()) return p.string();
  const auto rel = p.lexically_relative(base);
  if (rel.empty() || *rel.begin() == "..") return p.string();
  return rel.string();
}

template <typename T>
void read_opt(const json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

std::vector<std::pair<const char*, const std::filesystem::path*>> data_entries(const DataFiles& d) {
  return {{"nodes", &d.nodes},       {"links", &d.links},       {"zones", &d.zones},
          {"demand", &d.demand},     {"venues", &d.venues},     {"sessions", &d.sessions},
          {"residences", &d.residences}, {"lines", &d.lines},   {"overlay", &d.overlay}};
}

std::string file_digest(const std::filesystem::path& p) {
  if (p.empty()) return "";
  std::error_code ec;
  if (!std::filesystem::is_regular_file(p, ec)) return "missing:" + p.filename().string();
  return sha256_hex(read_text_file(p));
}

// Loader messages start with "path:line: " or "path: "; split that back out.
Violation locate(const std::filesystem::path& file, const std::string& message,
                 std::initializer_list<std::filesystem::path> also = {}) {
  std::vector<std::string> candidates{file.string()};
  for (const auto& p : also) candidates.push_back(p.string());
  for (const auto& f : candidates) {
    if (f.empty() || !message.starts_with(f + ":")) continue;
    std::string_view rest(message);
    rest.remove_prefix(f.size() + 1);
    std::size_t line = 0;
    const auto [ptr, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), line);
    if (ec == std::errc() && ptr != rest.data() && *ptr == ':') rest.remove_prefix(static_cast<std::size_t>(ptr - rest.data()) + 1);
    else line = 0;
    while (rest.starts_with(' ')) rest.remove_prefix(1);
    return {f, line, std::string(rest)};
  }
  return {file.string(), 0, message};
}

// Runs a loader, turning its validation errors into report entries.
template <typename Fn>
bool collect(ValidationReport& report, const std::filesystem::path& file, Fn&& fn,
             std::initializer_list<std::filesystem::path> also = {}) {
  try {
    fn();
    return true;
  } catch (const ValidationError& e) {
    for (const auto& v : e.violations()) report.violations.push_back(locate(file, v, also));
  } catch (const IoError& e) {
    report.violations.push_back({file.string(), 0, e.what()});
  }
  return false;
}

}  // namespace

bool ScenarioConfig::has_event_inputs() const {
  return !data.venues.empty() && !data.sessions.empty() && !data.residences.empty();
}

ScenarioConfig config_from_json(const json& doc, const std::filesystem::path& base_dir) {
  if (!doc.is_object()) throw ValidationError({"configuration must be a JSON object"});
  std::vector<std::string> problems;
  for (const auto& [key, value] : doc.items()) {
    if (!kTopLevelKeys.contains(key)) problems.push_back("unknown configuration key '" + key + "'");
  }
  if (!problems.empty()) throw ValidationError(std::move(problems));

  ScenarioConfig c;
  try {
    if (doc.contains("data")) {
      const auto& d = doc.at("data");
      c.data.nodes = resolve(d, "nodes", base_dir);
      c.data.links = resolve(d, "links", base_dir);
      c.data.zones = resolve(d, "zones", base_dir);
      c.data.demand = resolve(d, "demand", base_dir);
      c.data.venues = resolve(d, "venues", base_dir);
      c.data.sessions = resolve(d, "sessions", base_dir);
      c.data.residences = resolve(d, "residences", base_dir);
      c.data.lines = resolve(d, "lines", base_dir);
      c.data.overlay = resolve(d, "overlay", base_dir);
    }
    read_opt(doc, "hour", c.hour);
    read_opt(doc, "date", c.date);
    read_opt(doc, "day_scale", c.day_scale);
    if (doc.contains("bpr")) {
      const auto& b = doc.at("bpr");
      read_opt(b, "f_s", c.bpr.f_s);
      read_opt(b, "alpha", c.bpr.alpha);
      read_opt(b, "beta", c.bpr.beta);
    }
    if (doc.contains("mode_split")) {
      const auto& m = doc.at("mode_split");
      read_opt(m, "walk_km", c.mode_split.walk_km);
      read_opt(m, "bike_km", c.mode_split.bike_km);
      read_opt(m, "taxi_occupancy", c.mode_split.taxi_occupancy);
      read_opt(m, "bus_enabled", c.mode_split.bus_enabled);
      read_opt(m, "bus_time_ratio", c.mode_split.bus_time_ratio);
    }
    if (doc.contains("departure_split")) {
      c.departure_split.shares.clear();
      for (const auto& s : doc.at("departure_split")) {
        c.departure_split.shares.push_back({s.at("hours_ahead").get<int>(), s.at("fraction").get<double>()});
      }
    }
    if (doc.contains("solver")) {
      const auto& s = doc.at("solver");
      read_opt(s, "max_iterations", c.solver.max_iterations);
      read_opt(s, "relative_gap_tol", c.solver.relative_gap_tol);
      read_opt(s, "line_search_tol", c.solver.line_search_tol);
    }
    if (doc.contains("scenarios")) {
      for (const auto& s : doc.at("scenarios")) c.scenarios.push_back(parse_scenario(s.get<std::string>()));
    }
    read_opt(doc, "lambdas", c.lambdas);
    if (doc.contains("strategy")) {
      const auto& s = doc.at("strategy");
      read_opt(s, "enabled", c.strategy.enabled);
      if (s.contains("mode")) c.strategy.mode = parse_strategy_mode(s.at("mode").get<std::string>());
      read_opt(s, "radius_km", c.strategy.radius_km);
      read_opt(s, "top_k", c.strategy.top_k);
      read_opt(s, "reduction_fraction", c.strategy.reduction_fraction);
      read_opt(s, "persons_per_vehicle", c.strategy.persons_per_vehicle);
      read_opt(s, "top_k_sweep", c.strategy.top_k_sweep);
      read_opt(s, "radius_sweep", c.strategy.radius_sweep);
    }
  } catch (const json::exception& e) {
    throw ValidationError({std::string("malformed configuration: ") + e.what()});
  }
  return c;
}

json config_to_json(const ScenarioConfig& c, const std::filesystem::path& base_dir) {
  json data = json::object();
  for (const auto& [key, path] : data_entries(c.data)) {
    if (!path->empty()) data[key] = relative_to(*path, base_dir);
  }
  json split = json::array();
  for (const auto& s : c.departure_split.shares) split.push_back({{"hours_ahead", s.hours_ahead}, {"fraction", s.fraction}});
  json scenarios = json::array();
  for (auto s : c.scenarios) scenarios.push_back(to_string(s));
  return {
      {"data", data},
      {"hour", c.hour},
      {"date", c.date},
      {"day_scale", c.day_scale},
      {"bpr", {{"f_s", c.bpr.f_s}, {"alpha", c.bpr.alpha}, {"beta", c.bpr.beta}}},
      {"mode_split",
       {{"walk_km", c.mode_split.walk_km},
        {"bike_km", c.mode_split.bike_km},
        {"taxi_occupancy", c.mode_split.taxi_occupancy},
        {"bus_enabled", c.mode_split.bus_enabled},
        {"bus_time_ratio", c.mode_split.bus_time_ratio}}},
      {"departure_split", split},
      {"solver",
       {{"max_iterations", c.solver.max_iterations},
        {"relative_gap_tol", c.solver.relative_gap_tol},
        {"line_search_tol", c.solver.line_search_tol}}},
      {"scenarios", scenarios},
      {"lambdas", c.lambdas},
      {"strategy",
       {{"enabled", c.strategy.enabled},
        {"mode", to_string(c.strategy.mode)},
        {"radius_km", c.strategy.radius_km},
        {"top_k", c.strategy.top_k},
        {"reduction_fraction", c.strategy.reduction_fraction},
        {"persons_per_vehicle", c.strategy.persons_per_vehicle},
        {"top_k_sweep", c.strategy.top_k_sweep},
        {"radius_sweep", c.strategy.radius_sweep}}},
  };
}

ScenarioConfig load_config(const std::filesystem::path& path) {
  json doc;
  try {
    doc = json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw ValidationError({path.string() + ": " + e.what()});
  }
  return config_from_json(doc, path.parent_path());
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 0xF];
  }
  return out;
}

std::string config_hash(const ScenarioConfig& config) {
  auto doc = config_to_json(config);
  json data = json::object();
  for (const auto& [key, path] : data_entries(config.data)) {
    if (!path->empty()) data[key] = file_digest(*path);
  }
  doc["data"] = data;
  return sha256_hex(doc.dump());
}

std::string Violation::str() const {
  std::string out = file;
  if (line > 0) out += ":" + std::to_string(line);
  if (!out.empty()) out += ": ";
  return out + message;
}

ValidationReport validate(const ScenarioConfig& c) {
  ValidationReport report;
  auto param = [&](auto&& fn) { collect(report, "", fn); };
  param([&] { c.bpr.validate(); });
  param([&] { c.mode_split.validate(); });
  param([&] { c.departure_split.validate(); });
  param([&] { c.solver.validate(); });
  if (c.hour < 0 || c.hour > 23) report.violations.push_back({"", 0, "hour must be within 0-23"});
  if (!(c.day_scale > 0.0) || !std::isfinite(c.day_scale)) report.violations.push_back({"", 0, "day_scale must be > 0"});
  for (double l : c.lambdas) {
    if (!(l >= 0.0 && l <= 1.0)) report.violations.push_back({"", 0, "lambda " + format_number(l) + " outside [0,1]"});
  }
  if (!(c.strategy.radius_km >= 0.0)) report.violations.push_back({"", 0, "strategy.radius_km must be >= 0"});
  for (double r : c.strategy.radius_sweep) {
    if (!(r >= 0.0)) report.violations.push_back({"", 0, "strategy.radius_sweep entries must be >= 0"});
  }
  if (c.strategy.top_k < 1) report.violations.push_back({"", 0, "strategy.top_k must be >= 1"});
  for (int k : c.strategy.top_k_sweep) {
    if (k < 1) report.violations.push_back({"", 0, "strategy.top_k_sweep entries must be >= 1"});
  }
  if (!(c.strategy.reduction_fraction > 0.0 && c.strategy.reduction_fraction <= 1.0)) {
    report.violations.push_back({"", 0, "strategy.reduction_fraction must be in (0,1]"});
  }
  if (!(c.strategy.persons_per_vehicle > 0.0)) {
    report.violations.push_back({"", 0, "strategy.persons_per_vehicle must be > 0"});
  }

  bool files_ok = true;
  for (const auto& [key, path] : data_entries(c.data)) {
    const bool required = std::string_view(key) == "nodes" || std::string_view(key) == "links" ||
                          std::string_view(key) == "zones" || std::string_view(key) == "demand";
    if (path->empty()) {
      if (required) {
        report.violations.push_back({"", 0, std::string("data.") + key + " is required"});
        files_ok = false;
      }
      continue;
    }
    std::error_code ec;
    if (!std::filesystem::is_regular_file(*path, ec)) {
      report.violations.push_back({path->string(), 0, "file does not exist"});
      files_ok = false;
    }
  }
  const bool event_any = !c.data.venues.empty() || !c.data.sessions.empty() || !c.data.residences.empty();
  if (event_any && !c.has_event_inputs()) {
    report.violations.push_back({"", 0, "venues, sessions and residences must be given together"});
  }
  if (c.has_event_inputs() && c.data.lines.empty()) {
    report.violations.push_back({"", 0, "event inputs require data.lines for the tourist mode split"});
  }
  if (c.strategy.enabled && c.data.lines.empty()) {
    report.violations.push_back({"", 0, "strategy requires data.lines"});
  }
  if (!files_ok) return report;

  std::optional<RoadNetwork> network;
  collect(report, c.data.links, [&] { network = RoadNetwork::load(c.data.nodes, c.data.links, c.bpr); },
          {c.data.nodes});

  // Zones -> nodes, keeping row numbers for diagnostics.
  std::set<std::string> zone_ids;
  collect(report, c.data.zones, [&] {
    load_zones(c.data.zones);
    const auto t = Table::read(c.data.zones);
    for (const auto& row : t.rows()) {
      zone_ids.insert(t.cell(row, "zone_id"));
      if (network && !network->find_node(t.cell(row, "attach_node"))) {
        report.violations.push_back({c.data.zones.string(), row.line,
                                     "zone " + t.cell(row, "zone_id") + " attaches to unknown node " +
                                         t.cell(row, "attach_node")});
      }
    }
  });

  collect(report, c.data.demand, [&] {
    load_demand(c.data.demand, c.day_scale);
    const auto t = Table::read(c.data.demand);
    for (const auto& row : t.rows()) {
      for (const char* col : {"origin_zone", "dest_zone"}) {
        if (!zone_ids.contains(t.cell(row, col))) {
          report.violations.push_back({c.data.demand.string(), row.line, "unknown zone " + t.cell(row, col)});
        }
      }
    }
  });

  if (!c.data.overlay.empty()) {
    collect(report, c.data.overlay, [&] {
      CapacityOverlay::load(c.data.overlay);
      const auto t = Table::read(c.data.overlay);
      for (const auto& row : t.rows()) {
        if (network && !network->find_link(t.cell(row, "edge_id"))) {
          report.violations.push_back({c.data.overlay.string(), row.line, "unknown edge_id " + t.cell(row, "edge_id")});
        }
      }
    });
  }

  if (c.has_event_inputs()) {
    std::map<std::string, double> capacity;
    collect(report, c.data.venues, [&] {
      for (const auto& v : load_venues(c.data.venues)) capacity.emplace(v.venue_id, v.capacity);
    });
    collect(report, c.data.sessions, [&] {
      load_sessions(c.data.sessions);
      const auto t = Table::read(c.data.sessions);
      for (const auto& row : t.rows()) {
        const auto& venue = t.cell(row, "venue_id");
        const auto it = capacity.find(venue);
        if (it == capacity.end()) {
          report.violations.push_back({c.data.sessions.string(), row.line, "unknown venue_id " + venue});
        } else if (t.number(row, "expected_attendance") > it->second) {
          report.violations.push_back({c.data.sessions.string(), row.line,
                                       "expected_attendance exceeds capacity of venue " + venue});
        }
      }
    });
    collect(report, c.data.residences, [&] {
      if (load_residences(c.data.residences).empty()) throw ValidationError({"no residences"});
    });
  }
  if (!c.data.lines.empty()) {
    collect(report, c.data.lines, [&] { load_lines(c.data.lines); });
  }
  return report;
}

Dataset load_dataset(const ScenarioConfig& c) {
  const auto report = validate(c);
  if (!report.ok()) {
    std::vector<std::string> messages;
    for (const auto& v : report.violations) messages.push_back(v.str());
    throw ValidationError(std::move(messages));
  }
  Dataset d{RoadNetwork::load(c.data.nodes, c.data.links, c.bpr),
            load_zones(c.data.zones),
            load_demand(c.data.demand, c.day_scale, c.hour),
            {}, {}, {}, {}, {}};
  if (c.has_event_inputs()) {
    d.venues = load_venues(c.data.venues);
    d.sessions = load_sessions(c.data.sessions);
    d.residences = load_residences(c.data.residences);
  }
  if (!c.data.lines.empty()) d.lines = load_lines(c.data.lines);
  d.overlay = d.network.olympic_lane_overlay();
  if (!c.data.overlay.empty()) {
    for (const auto& [id, m] : CapacityOverlay::load(c.data.overlay).entries) d.overlay.entries[id] = m;
  }
  return d;
}

}  // namespace evtraffic
