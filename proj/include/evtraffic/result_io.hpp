#pragma once

#include <filesystem>
#include <string>

#include "evtraffic/assign.hpp"
#include "evtraffic/netgraph.hpp"

namespace evtraffic {

// `<stem>_links.csv`: edge_id,volume,time_min,voc
// `<stem>_ods.csv`:   origin,dest,time_min,flow
// `<stem>_paths.csv`: origin,dest,flow,edges (edge ids joined by ';')
void write_result(const AssignmentResult& result, const RoadNetwork& network,
                  const std::filesystem::path& dir, const std::string& stem);

// Reads the three tables back. Scenario metadata comes from the caller.
AssignmentResult load_result(const RoadNetwork& network, const std::filesystem::path& dir,
                             const std::string& stem);

std::string link_table(const AssignmentResult& result, const RoadNetwork& network);
std::string od_table(const AssignmentResult& result);
std::string path_table(const AssignmentResult& result, const RoadNetwork& network);

}  // namespace evtraffic
