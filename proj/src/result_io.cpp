#include "evtraffic/result_io.hpp"

#include "evtraffic/error.hpp"
#include "evtraffic/table.hpp"

namespace evtraffic {
namespace {

std::filesystem::path table_path(const std::filesystem::path& dir, const std::string& stem, const char* suffix) {
  return dir / (stem + suffix);
}

std::string join_edges(const PathFlow& p, const RoadNetwork& network) {
  std::string out;
  for (auto l : p.links) {
    if (!out.empty()) out += ';';
    out += network.link(l).edge_id;
  }
  return out;
}

}  // namespace

std::string link_table(const AssignmentResult& result, const RoadNetwork& network) {
  TableWriter w({"edge_id", "volume", "time_min", "voc"});
  for (LinkIndex i = 0; i < network.num_links(); ++i) {
    const auto& link = network.link(i);
    const double v = i < result.link_volumes.size() ? result.link_volumes[i] : 0.0;
    const double t = i < result.link_times.size() ? result.link_times[i] : bpr_time(link, 0.0, network.params());
    w.row({link.edge_id, format_number(v), format_number(t), format_number(v / link.capacity)});
  }
  return w.str();
}

std::string od_table(const AssignmentResult& result) {
  TableWriter w({"origin", "dest", "time_min", "flow"});
  for (const auto& [od, time] : result.od_times) {
    const auto it = result.od_flows.find(od);
    w.row({od.origin, od.dest, format_number(time), format_number(it == result.od_flows.end() ? 0.0 : it->second)});
  }
  return w.str();
}

std::string path_table(const AssignmentResult& result, const RoadNetwork& network) {
  TableWriter w({"origin", "dest", "flow", "edges"});
  for (const auto& p : result.path_flows) {
    w.row({p.od.origin, p.od.dest, format_number(p.flow), join_edges(p, network)});
  }
  return w.str();
}

void write_result(const AssignmentResult& result, const RoadNetwork& network, const std::filesystem::path& dir,
                  const std::string& stem) {
  write_text_file(table_path(dir, stem, "_links.csv"), link_table(result, network));
  write_text_file(table_path(dir, stem, "_ods.csv"), od_table(result));
  write_text_file(table_path(dir, stem, "_paths.csv"), path_table(result, network));
}

AssignmentResult load_result(const RoadNetwork& network, const std::filesystem::path& dir, const std::string& stem) {
  AssignmentResult r;
  r.link_volumes.assign(network.num_links(), 0.0);
  r.link_times = network.freeflow_costs();
  std::vector<std::string> problems;

  const auto links = Table::read(table_path(dir, stem, "_links.csv"));
  links.require_columns({"edge_id", "volume", "time_min"}, {"voc"});
  for (const auto& row : links.rows()) {
    const auto idx = network.find_link(links.cell(row, "edge_id"));
    if (!idx) {
      problems.push_back(links.where(row) + ": unknown edge_id " + links.cell(row, "edge_id"));
      continue;
    }
    r.link_volumes[*idx] = links.number(row, "volume");
    r.link_times[*idx] = links.number(row, "time_min");
  }

  const auto ods = Table::read(table_path(dir, stem, "_ods.csv"));
  ods.require_columns({"origin", "dest", "time_min", "flow"});
  for (const auto& row : ods.rows()) {
    const OdKey od{ods.cell(row, "origin"), ods.cell(row, "dest")};
    r.od_times[od] = ods.number(row, "time_min");
    r.od_flows[od] = ods.number(row, "flow");
  }

  const auto paths = Table::read(table_path(dir, stem, "_paths.csv"));
  paths.require_columns({"origin", "dest", "flow", "edges"});
  for (const auto& row : paths.rows()) {
    PathFlow p{{paths.cell(row, "origin"), paths.cell(row, "dest")}, {}, paths.number(row, "flow")};
    std::string_view edges = paths.cell(row, "edges");
    while (!edges.empty()) {
      const auto cut = edges.find(';');
      const auto id = std::string(edges.substr(0, cut));
      if (const auto idx = network.find_link(id)) {
        p.links.push_back(*idx);
      } else {
        problems.push_back(paths.where(row) + ": unknown edge_id " + id);
      }
      edges = cut == std::string_view::npos ? std::string_view{} : edges.substr(cut + 1);
    }
    r.path_flows.push_back(std::move(p));
  }
  if (!problems.empty()) throw ValidationError(std::move(problems));
  return r;
}

}  // namespace evtraffic
