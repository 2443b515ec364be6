#include <gtest/gtest.h>

#include <algorithm>

#include "evtraffic/error.hpp"
#include "evtraffic/fixtures.hpp"
#include "evtraffic/strategy.hpp"
#include "oracles.hpp"

using namespace evtraffic;

namespace {

const GeoPoint kBase{-22.9, -43.2};

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

EligibleOd eligible(const std::string& o, const std::string& d, double mc, double flow) {
  EligibleOd e;
  e.od = {o, d};
  e.origin_station = "s" + o;
  e.dest_station = "s" + d;
  e.marginal_path_cost = mc;
  e.vehicle_flow = flow;
  return e;
}

TransitLine line_abc(double capacity = kDefaultSegmentCapacity) {
  TransitLine l;
  l.line_id = "L";
  l.segment_capacity = capacity;
  for (int i = 0; i < 3; ++i) {
    const auto p = offset_km(kBase, 0, i);
    l.stations.push_back({std::string(1, static_cast<char>('A' + i)), p.lat, p.lon});
  }
  return l;
}

Reduction reduction(const std::string& from, const std::string& to, double vph, double tourist = 0) {
  Reduction r;
  r.od = {"Z" + from, "Z" + to};
  r.origin_station = from;
  r.dest_station = to;
  r.removed_vph = vph;
  r.tourist_share = tourist;
  return r;
}

std::vector<Trip> trips_of(const fixtures::Bundle& b) { return make_trips(b.network, b.zones, b.demand); }

}  // namespace

TEST(MarginalPathCost, HandValues) {
  const RoadNetwork one({{"O", 0, 0}, {"D", 0, 0.01}}, {{"a", "O", "D", 1000, 100, 10, false}});
  const std::vector<Trip> tiny{{{"ZO", "ZD"}, one.node_index("O"), one.node_index("D"), 0.1}};
  auto r = all_or_nothing(one, one.freeflow_costs(), tiny);
  EXPECT_NEAR(marginal_path_cost(one, r, {"ZO", "ZD"}), 11.5, 1e-9);

  const RoadNetwork two({{"O", 0, 0}, {"M", 0, 0.01}, {"D", 0, 0.02}},
                        {{"a", "O", "M", 1000, 100, 10, false}, {"b", "M", "D", 1000, 100, 10, false}});
  const std::vector<Trip> full{{{"ZO", "ZD"}, two.node_index("O"), two.node_index("D"), 100}};
  r = all_or_nothing(two, two.freeflow_costs(), full);
  EXPECT_LE(rel(marginal_path_cost(two, r, {"ZO", "ZD"}), 47.84), 1e-12);
  EXPECT_THROW(marginal_path_cost(two, r, {"ZD", "ZO"}), std::exception);
}

TEST(MarginalPathCost, AdditiveOverMinTimePath) {
  const auto b = fixtures::bottleneck();
  const auto r = solve_ue(b.network, trips_of(b));
  const auto mc = b.network.marginal_costs(r.link_volumes);
  for (const auto& [od, flow] : r.od_flows) {
    const auto& p = min_time_path(r, od);
    double sum = 0;
    for (auto l : p.links) sum += mc[l];
    EXPECT_EQ(marginal_path_cost(b.network, r, od), sum);
    for (const auto* other : r.paths_of(od)) {
      EXPECT_LE(path_time(p.links, r.link_times), path_time(other->links, r.link_times));
    }
  }
}

TEST(MarginalPathCost, MatchesOneVehicleRemoval) {
  for (const auto& b : {fixtures::diamond(), fixtures::braess(true), fixtures::bottleneck()}) {
    const auto r = solve_ue(b.network, trips_of(b));
    for (const auto& [od, flow] : r.od_flows) {
      const auto& p = min_time_path(r, od);
      const double fd = oracle::one_vehicle_removal(b.network, r.link_volumes, p.links);
      EXPECT_LE(rel(marginal_path_cost(b.network, r, od), fd), 0.02) << b.name << " " << od.origin << "->" << od.dest;
    }
  }
}

TEST(Eligibility, RadiusAndBoundary) {
  const auto b = fixtures::bottleneck();
  const auto r = solve_ue(b.network, trips_of(b));
  EXPECT_TRUE(eligible_ods(b.network, b.zones, b.lines, r, b.demand, 0.0).empty());

  // One zone centroid sits exactly on a station.
  auto lines = b.lines;
  const auto& w1 = *std::ranges::find_if(b.zones, [](const Zone& z) { return z.zone_id == "ZW1"; });
  const auto& e1 = *std::ranges::find_if(b.zones, [](const Zone& z) { return z.zone_id == "ZE1"; });
  lines[0].stations.push_back(Station{"atW1", w1.lat, w1.lon});
  lines[0].stations.push_back(Station{"atE1", e1.lat, e1.lon});
  const auto at_zero = eligible_ods(b.network, b.zones, lines, r, b.demand, 0.0);
  ASSERT_EQ(at_zero.size(), 1u);
  EXPECT_EQ(at_zero[0].od, (OdKey{"ZW1", "ZE1"}));

  // Closed ball: the radius equal to the farther centroid's distance includes it.
  const auto& w2 = *std::ranges::find_if(b.zones, [](const Zone& z) { return z.zone_id == "ZW2"; });
  const auto& e2 = *std::ranges::find_if(b.zones, [](const Zone& z) { return z.zone_id == "ZE2"; });
  double d_w2 = 0, d_e2 = 0;
  std::vector<GeoPoint> pts;
  for (const auto& s : all_stations(b.lines)) pts.push_back(s.point());
  nearest_index(w2.point(), pts, &d_w2);
  nearest_index(e2.point(), pts, &d_e2);
  const double radius = std::max(d_w2, d_e2);
  const auto at_r = eligible_ods(b.network, b.zones, b.lines, r, b.demand, radius);
  EXPECT_TRUE(std::ranges::any_of(at_r, [](const EligibleOd& e) { return e.od == OdKey{"ZW2", "ZE2"}; }));
  const auto below = eligible_ods(b.network, b.zones, b.lines, r, b.demand, std::nextafter(radius, 0.0));
  EXPECT_FALSE(std::ranges::any_of(below, [](const EligibleOd& e) { return e.od == OdKey{"ZW2", "ZE2"}; }));
}

TEST(Eligibility, OnlyOdsNearStations) {
  // Five ODs among four zones; stations sit next to A and B only.
  const std::vector<Node> nodes{{"A", kBase.lat, kBase.lon},
                                {"B", offset_km(kBase, 0, 3).lat, offset_km(kBase, 0, 3).lon},
                                {"C", offset_km(kBase, 5, 0).lat, offset_km(kBase, 5, 0).lon},
                                {"D", offset_km(kBase, 5, 3).lat, offset_km(kBase, 5, 3).lon}};
  const std::vector<Link> links{{"ab", "A", "B", 3000, 1000, 3, false}, {"ba", "B", "A", 3000, 1000, 3, false},
                                {"ac", "A", "C", 5000, 1000, 5, false}, {"cd", "C", "D", 3000, 1000, 3, false},
                                {"db", "D", "B", 5000, 1000, 5, false}};
  const RoadNetwork net(nodes, links);
  std::vector<Zone> zones;
  for (const auto& n : nodes) zones.push_back({"Z" + n.node_id, n.lat, n.lon, n.node_id});
  DemandMatrix demand(8);
  for (auto [o, d] : std::vector<std::pair<std::string, std::string>>{
           {"ZA", "ZB"}, {"ZB", "ZA"}, {"ZA", "ZC"}, {"ZC", "ZD"}, {"ZD", "ZB"}}) {
    OdRecord r;
    r.hour = 8;
    r.origin = o;
    r.dest = d;
    r.vehicle_flow = r.person_flow = r.commuter_persons = 100;
    demand.insert(r);
  }
  TransitLine line;
  line.line_id = "M";
  const auto sa = offset_km(kBase, 0.3, 0), sb = offset_km(kBase, -0.4, 3);
  line.stations = {{"SA", sa.lat, sa.lon}, {"SB", sb.lat, sb.lon}};
  const std::vector<TransitLine> lines{line};
  const auto r = solve_ue(net, make_trips(net, zones, demand));
  const auto e = eligible_ods(net, zones, lines, r, demand, 1.0);
  ASSERT_EQ(e.size(), 2u);
  EXPECT_EQ(e[0].od, (OdKey{"ZA", "ZB"}));
  EXPECT_EQ(e[0].origin_station, "SA");
  EXPECT_EQ(e[0].dest_station, "SB");
  EXPECT_EQ(e[1].od, (OdKey{"ZB", "ZA"}));
}

TEST(PlanMarginal, RankingClampingAndTies) {
  const std::vector<EligibleOd> two{eligible("a", "b", 50, 100), eligible("c", "d", 20, 100)};
  auto p = plan_marginal(two, 1, 0.6);
  ASSERT_EQ(p.reductions.size(), 1u);
  EXPECT_EQ(p.reductions[0].od, (OdKey{"a", "b"}));
  EXPECT_DOUBLE_EQ(p.reductions[0].removed_vph, 60.0);

  p = plan_marginal(two, 10, 0.6);
  EXPECT_EQ(p.reductions.size(), 2u);
  EXPECT_DOUBLE_EQ(p.total_removed(), 120.0);

  const std::vector<EligibleOd> tied{eligible("z", "y", 30, 10), eligible("b", "a", 30, 10), eligible("m", "n", 30, 10)};
  p = plan_marginal(tied, 2, 0.5);
  EXPECT_EQ(p.reductions[0].od, (OdKey{"b", "a"}));
  EXPECT_EQ(p.reductions[1].od, (OdKey{"m", "n"}));

  EXPECT_THROW(plan_marginal(two, 0, 0.6), ValidationError);
  EXPECT_THROW(plan_marginal(two, 1, 1.5), ValidationError);
}

TEST(PlanUniform, ProportionalShare) {
  const std::vector<EligibleOd> two{eligible("a", "b", 50, 100), eligible("c", "d", 20, 300)};
  auto p = plan_uniform(two, 40);
  EXPECT_DOUBLE_EQ(p.reductions[0].removed_vph, 10.0);
  EXPECT_DOUBLE_EQ(p.reductions[1].removed_vph, 30.0);
  EXPECT_EQ(p.mode, StrategyMode::uniform);

  p = plan_uniform(two, 400);
  EXPECT_DOUBLE_EQ(p.reductions[0].removed_vph, 100.0);
  EXPECT_DOUBLE_EQ(p.reductions[1].removed_vph, 300.0);

  EXPECT_DOUBLE_EQ(plan_uniform(two, 0).total_removed(), 0.0);
  EXPECT_THROW(plan_uniform(two, 401), ValidationError);
}

TEST(ApplyAndEvaluate, EmptyPlanSavesNothing) {
  const auto b = fixtures::bottleneck();
  const auto before = solve_ue(b.network, trips_of(b));
  StrategyPlan empty;
  const auto done = apply_and_evaluate(b.network, b.zones, b.demand, before, empty);
  ASSERT_TRUE(done.savings);
  EXPECT_NEAR(done.savings->saving_fraction, 0.0, 1e-9);
  EXPECT_EQ(done.savings->removed_vehicles, 0.0);
  EXPECT_NEAR(done.savings->time_after, done.savings->time_before, 1e-9 * done.savings->time_before);
}

TEST(ApplyAndEvaluate, MarginalBeatsUniformOnBottleneck) {
  const auto b = fixtures::bottleneck();
  const auto before = solve_ue(b.network, trips_of(b));
  const auto elig = eligible_ods(b.network, b.zones, b.lines, before, b.demand, 2.0);
  ASSERT_GE(elig.size(), 3u);
  double last = 0;
  for (int k = 1; k <= static_cast<int>(elig.size()); ++k) {
    const auto marginal = apply_and_evaluate(b.network, b.zones, b.demand, before, plan_marginal(elig, k, 0.6));
    const auto uniform = apply_and_evaluate(b.network, b.zones, b.demand, before,
                                            plan_uniform(elig, marginal.total_removed()));
    EXPECT_NEAR(uniform.savings->removed_vehicles, marginal.savings->removed_vehicles, 1e-9);
    if (k <= 3) EXPECT_GT(marginal.savings->saving_fraction, uniform.savings->saving_fraction) << k;
    EXPECT_GE(marginal.savings->saving_fraction, last) << k;
    last = marginal.savings->saving_fraction;
    EXPECT_TRUE(marginal.savings->converged);
  }
}

TEST(ReduceDemand, SubtractsAndRejectsExcess) {
  DemandMatrix d(8);
  OdRecord r;
  r.hour = 8;
  r.origin = "Za";
  r.dest = "Zb";
  r.vehicle_flow = r.person_flow = 100;
  d.insert(r);
  const std::vector<Reduction> ok{reduction("a", "b", 40)};
  EXPECT_DOUBLE_EQ(reduce_demand(d, ok).find({"Za", "Zb"})->vehicle_flow, 60.0);
  const std::vector<Reduction> too_much{reduction("a", "b", 140)};
  EXPECT_THROW(reduce_demand(d, too_much), ValidationError);
}

TEST(Ridership, SingleLineDirections) {
  const std::vector<TransitLine> lines{line_abc()};
  StrategyPlan plan;
  plan.reductions = {reduction("A", "C", 100)};
  auto deltas = ridership_deltas(plan, lines);
  ASSERT_EQ(deltas.size(), 2u);
  EXPECT_EQ(deltas[0].from_station, "A");
  EXPECT_EQ(deltas[0].to_station, "B");
  EXPECT_EQ(deltas[1].from_station, "B");
  EXPECT_EQ(deltas[1].to_station, "C");
  for (const auto& d : deltas) {
    EXPECT_DOUBLE_EQ(d.delta_persons, 100.0);
    EXPECT_EQ(d.direction, "forward");
    EXPECT_FALSE(d.over_capacity);
  }

  plan.reductions = {reduction("C", "A", 100)};
  deltas = ridership_deltas(plan, lines);
  ASSERT_EQ(deltas.size(), 2u);
  for (const auto& d : deltas) EXPECT_NE(d.direction, "forward");
}

TEST(Ridership, OverCapacityFlagAndTouristOccupancy) {
  const std::vector<TransitLine> lines{line_abc()};
  StrategyPlan plan;
  plan.reductions = {reduction("A", "B", 31000)};
  EXPECT_TRUE(ridership_deltas(plan, lines).at(0).over_capacity);
  plan.reductions = {reduction("A", "B", 30000)};
  EXPECT_FALSE(ridership_deltas(plan, lines).at(0).over_capacity);

  plan.reductions = {reduction("A", "B", 100, 0.5)};
  EXPECT_DOUBLE_EQ(ridership_deltas(plan, lines).at(0).delta_persons, 150.0);
}

TEST(Ridership, TransfersAndConservation) {
  TransitLine second;
  second.line_id = "M";
  const auto d = offset_km(kBase, 1, 2), e = offset_km(kBase, 2, 2);
  const auto c = line_abc().stations[2];
  second.stations = {c, {"D", d.lat, d.lon}, {"E", e.lat, e.lon}};
  const std::vector<TransitLine> lines{line_abc(), second};
  const auto route = transit_route(lines, "A", "E");
  ASSERT_EQ(route.size(), 4u);
  EXPECT_EQ(route[1].line_id, "L");
  EXPECT_EQ(route[2].line_id, "M");

  StrategyPlan plan;
  plan.reductions = {reduction("A", "E", 10), reduction("B", "D", 5), reduction("E", "A", 7)};
  double total = 0, expected = 0;
  for (const auto& s : ridership_deltas(plan, lines)) total += s.delta_persons;
  for (const auto& r : plan.reductions) expected += r.removed_vph * transit_route(lines, r.origin_station, r.dest_station).size();
  EXPECT_DOUBLE_EQ(total, expected);

  TransitLine island;
  island.line_id = "X";
  island.stations = {{"P", 0, 0}, {"Q", 0, 0.1}};
  const std::vector<TransitLine> split{line_abc(), island};
  EXPECT_THROW(transit_route(split, "A", "Q"), std::exception);
}

TEST(StrategyFiles, RoundTrip) {
  oracle::TempDir dir("strategy");
  const auto b = fixtures::bottleneck();
  write_lines(b.lines, dir / "lines.csv");
  EXPECT_EQ(load_lines(dir / "lines.csv"), b.lines);

  StrategyPlan plan;
  plan.reductions = {reduction("A", "C", 100.25, 0.125), reduction("C", "A", 1.0 / 3.0)};
  plan.reductions[0].marginal_path_cost = 47.84;
  write_reductions(plan, dir / "r.csv");
  EXPECT_EQ(load_reductions(dir / "r.csv"), plan.reductions);

  const auto deltas = ridership_deltas(plan, std::vector<TransitLine>{line_abc()});
  write_segment_deltas(deltas, dir / "s.csv");
  EXPECT_EQ(load_segment_deltas(dir / "s.csv"), deltas);
}
