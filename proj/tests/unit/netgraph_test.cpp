#include <gtest/gtest.h>

#include <random>

#include "evtraffic/error.hpp"
#include "evtraffic/fixtures.hpp"
#include "evtraffic/netgraph.hpp"
#include "evtraffic/table.hpp"
#include "oracles.hpp"

using namespace evtraffic;

namespace {

const Link kTen{"e", "A", "B", 1000, 100, 10.0, false};

RoadNetwork parallel() {
  return RoadNetwork({{"O", 0, 0}, {"D", 0, 0.01}},
                     {{"a", "O", "D", 1000, 1000, 5.0, false}, {"b", "O", "D", 1000, 1000, 7.0, false}});
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

}  // namespace

TEST(Bpr, HandValues) {
  const BprParams p;
  EXPECT_LE(rel(bpr_time(kTen, 0, p), 11.5), 1e-12);
  EXPECT_LE(rel(bpr_time(kTen, 100, p), 13.57), 1e-12);
  EXPECT_LE(rel(bpr_time(kTen, 200, p), 77.74), 1e-12);
}

TEST(Bpr, IntegralHandValues) {
  const BprParams p;
  EXPECT_EQ(bpr_integral(kTen, 0, p), 0.0);
  EXPECT_LE(rel(bpr_integral(kTen, 100, p), 1184.5), 1e-12);
  const double h = 1e-3;
  const double fd = (bpr_integral(kTen, 50 + h, p) - bpr_integral(kTen, 50 - h, p)) / (2 * h);
  EXPECT_LE(rel(fd, bpr_time(kTen, 50, p)), 1e-6);
}

TEST(Bpr, MarginalHandValues) {
  const BprParams p;
  EXPECT_LE(rel(marginal_edge_cost(kTen, 0, p), 11.5), 1e-12);
  EXPECT_LE(rel(marginal_edge_cost(kTen, 100, p), 23.92), 1e-12);
  const double h = 1e-3;
  auto total = [&](double v) { return v * bpr_time(kTen, v, p); };
  EXPECT_LE(rel((total(100 + h) - total(100 - h)) / (2 * h), 23.92), 1e-5);
}

TEST(Bpr, RejectsBadVolumes) {
  const BprParams p;
  EXPECT_THROW(bpr_time(kTen, -1, p), DomainError);
  EXPECT_THROW(bpr_time(kTen, NAN, p), DomainError);
  EXPECT_THROW(bpr_integral(kTen, INFINITY, p), DomainError);
  EXPECT_THROW(marginal_edge_cost(kTen, -0.5, p), DomainError);
}

TEST(Bpr, ParamsValidate) {
  EXPECT_NO_THROW(BprParams{}.validate());
  EXPECT_THROW((BprParams{0.9, 0.18, 5}.validate()), ValidationError);
  EXPECT_THROW((BprParams{1.15, -1, 5}.validate()), ValidationError);
  EXPECT_THROW((BprParams{1.15, 0.18, 0.5}.validate()), ValidationError);
}

TEST(BprProperty, MonotoneGradientAndIntegralConsistency) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> tf(0.5, 30), cap(50, 5000), frac(0.05, 3.0);
  const BprParams p;
  for (int i = 0; i < 500; ++i) {
    const Link l{"x", "A", "B", 1000, cap(rng), tf(rng), false};
    const double v1 = frac(rng) * l.capacity;
    const double v2 = v1 * (1.0 + frac(rng));
    EXPECT_LT(bpr_time(l, v1, p), bpr_time(l, v2, p));
    EXPECT_GE(marginal_edge_cost(l, v1, p), bpr_time(l, v1, p));
    const double h = 1e-4 * l.capacity;
    const double fd = (bpr_integral(l, v1 + h, p) - bpr_integral(l, v1 - h, p)) / (2 * h);
    EXPECT_LE(rel(fd, bpr_time(l, v1, p)), 1e-6);
    EXPECT_NEAR(marginal_edge_cost(l, v1, p), oracle::marginal(l.freeflow_time, l.capacity, v1), 1e-9 * v1);
  }
  for (double f : {0.1, 0.5, 1.0, 2.0}) {
    const double v = f * kTen.capacity;
    const double h = 1e-4;
    auto total = [&](double x) { return x * bpr_time(kTen, x, p); };
    EXPECT_LE(rel((total(v + h) - total(v - h)) / (2 * h), marginal_edge_cost(kTen, v, p)), 1e-5) << f;
  }
}

TEST(Overlay, EmptyIsIdentity) {
  const auto net = fixtures::diamond().network;
  EXPECT_EQ(apply_overlay(net, {}), net);
}

TEST(Overlay, ScalesListedLinksOnly) {
  const auto net = fixtures::diamond().network;
  const auto out = apply_overlay(net, CapacityOverlay{{{"a", 0.5}}});
  EXPECT_EQ(out.link(*out.find_link("a")).capacity, 500.0);
  EXPECT_EQ(out.link(*out.find_link("b")).capacity, net.link(*net.find_link("b")).capacity);
  EXPECT_EQ(net.link(*net.find_link("a")).capacity, 1000.0);
}

TEST(Overlay, UnknownEdgeNamed) {
  const auto net = fixtures::diamond().network;
  try {
    apply_overlay(net, CapacityOverlay{{{"a", 0.5}, {"eX", 0.5}}});
    FAIL();
  } catch (const ValidationError& e) {
    ASSERT_EQ(e.violations().size(), 1u);
    EXPECT_NE(e.violations()[0].find("eX"), std::string::npos);
  }
}

TEST(Overlay, DisjointOverlaysCompose) {
  const auto net = fixtures::bottleneck().network;
  const auto stepwise = apply_overlay(apply_overlay(net, {{{"bridge", 0.5}}}), {{{"w1", 0.7}}});
  const auto merged = apply_overlay(net, {{{"bridge", 0.5}, {"w1", 0.7}}});
  EXPECT_EQ(stepwise, merged);
}

TEST(Overlay, OlympicLaneDefaultMultiplier) {
  const auto net = fixtures::diamond().network;
  const auto o = net.olympic_lane_overlay();
  ASSERT_EQ(o.entries.size(), 1u);
  EXPECT_EQ(o.entries.at("c"), kDefaultOlympicLaneMultiplier);
}

TEST(ShortestPath, OriginEqualsDest) {
  const auto net = fixtures::diamond().network;
  const auto p = shortest_path(net, net.freeflow_costs(), "N1", "N1");
  EXPECT_TRUE(p.links.empty());
  EXPECT_EQ(p.cost, 0.0);
}

TEST(ShortestPath, ParallelLinks) {
  const auto net = parallel();
  const std::vector<double> costs{5.0, 7.0};
  const auto p = shortest_path(net, costs, "O", "D");
  ASSERT_EQ(p.links.size(), 1u);
  EXPECT_EQ(net.link(p.links[0]).edge_id, "a");
  EXPECT_EQ(p.cost, 5.0);
}

TEST(ShortestPath, TiesBreakByEdgeIdSequence) {
  const auto net = parallel();
  const std::vector<double> costs{7.0, 7.0};
  EXPECT_EQ(net.link(shortest_path(net, costs, "O", "D").links[0]).edge_id, "a");
  // Diamond with equal route costs: a;c precedes b;d.
  const auto d = fixtures::diamond().network;
  const std::vector<double> flat(d.num_links(), 1.0);
  const auto p = shortest_path(d, flat, "N1", "N4");
  EXPECT_EQ(d.link(p.links[0]).edge_id, "a");
  EXPECT_EQ(d.link(p.links[1]).edge_id, "c");
}

TEST(ShortestPath, UnreachableNamesPair) {
  const RoadNetwork net({{"A", 0, 0}, {"B", 0, 0.01}, {"C", 0, 0.02}}, {{"ab", "A", "B", 100, 100, 1, false}});
  try {
    shortest_path(net, net.freeflow_costs(), "A", "C");
    FAIL();
  } catch (const NoPathError& e) {
    ASSERT_EQ(e.pairs().size(), 1u);
    EXPECT_EQ(e.pairs()[0], (std::pair<std::string, std::string>{"A", "C"}));
  }
}

TEST(ShortestPath, RejectsNonPositiveCosts) {
  const auto net = parallel();
  EXPECT_THROW(shortest_path(net, std::vector<double>{0.0, 1.0}, "O", "D"), DomainError);
}

TEST(ShortestPath, DiamondMatchesEnumeration) {
  const auto net = fixtures::diamond().network;
  const auto costs = net.freeflow_costs();
  for (NodeIndex o = 0; o < net.num_nodes(); ++o) {
    for (NodeIndex d = 0; d < net.num_nodes(); ++d) {
      if (o == d) continue;
      const auto best = oracle::brute_shortest(net, costs, o, d);
      ASSERT_TRUE(best.found);
      const auto p = shortest_path(net, costs, net.node(o).node_id, net.node(d).node_id);
      EXPECT_NEAR(p.cost, best.cost, 1e-12);
      std::vector<std::string> ids;
      for (auto l : p.links) ids.push_back(net.link(l).edge_id);
      EXPECT_EQ(ids, best.edges);
    }
  }
}

TEST(ShortestPathProperty, RandomSmallNetworksMatchEnumeration) {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> size(3, 12), extra(0, 14);
  std::uniform_int_distribution<int> coarse(1, 6);
  for (int trial = 0; trial < 60; ++trial) {
    const int n = size(rng);
    const auto net = oracle::random_network(rng, n, extra(rng));
    // Integer-valued costs make exact ties common, exercising the tie rule.
    std::vector<double> costs(net.num_links());
    for (auto& c : costs) c = coarse(rng);
    for (NodeIndex o = 0; o < net.num_nodes(); ++o) {
      const ShortestPathTree tree(net, costs, o);
      for (NodeIndex d = 0; d < net.num_nodes(); ++d) {
        if (o == d) continue;
        const auto best = oracle::brute_shortest(net, costs, o, d);
        ASSERT_TRUE(best.found && tree.reachable(d));
        EXPECT_EQ(tree.distance(d), best.cost);
        std::vector<std::string> ids;
        for (auto l : tree.path_to(d)) ids.push_back(net.link(l).edge_id);
        EXPECT_EQ(ids, best.edges) << "trial " << trial;
      }
    }
  }
}

TEST(NetworkIo, RoundTrip) {
  oracle::TempDir dir("net");
  for (const auto& b : {fixtures::diamond(), fixtures::braess(), fixtures::bottleneck()}) {
    write_nodes(b.network, dir / "nodes.csv");
    write_links(b.network, dir / "links.csv");
    EXPECT_EQ(RoadNetwork::load(dir / "nodes.csv", dir / "links.csv"), b.network) << b.name;
  }
  const CapacityOverlay o{{{"a", 0.5}, {"c", 0.25}}};
  write_overlay(o, dir / "overlay.csv");
  EXPECT_EQ(CapacityOverlay::load(dir / "overlay.csv"), o);
}

TEST(NetworkIo, FreeflowSpeedColumn) {
  oracle::TempDir dir("net");
  write_text_file(dir / "nodes.csv", "node_id,lat,lon\nA,0,0\nB,0,0.1\n");
  write_text_file(dir / "links.csv", "edge_id,from,to,length_m,capacity_vph,freeflow_speed_kmh\nab,A,B,5000,900,60\n");
  const auto net = RoadNetwork::load(dir / "nodes.csv", dir / "links.csv");
  EXPECT_DOUBLE_EQ(net.link(0).freeflow_time, 5.0);
}

TEST(NetworkIo, ReportsEveryBadRow) {
  oracle::TempDir dir("net");
  write_text_file(dir / "nodes.csv", "node_id,lat,lon\nA,0,0\nB,0,0.1\n");
  write_text_file(dir / "links.csv",
                  "edge_id,from,to,length_m,capacity_vph,freeflow_time_min,freeflow_speed_kmh\n"
                  "ab,A,B,5000,900,,\n"
                  "bc,B,C,5000,0,4,\n"
                  "ba,B,A,5000,900,4,50\n");
  try {
    RoadNetwork::load(dir / "nodes.csv", dir / "links.csv");
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_GE(e.violations().size(), 3u);
  }
}

TEST(NetworkIo, OverlayMultiplierRange) {
  oracle::TempDir dir("net");
  write_text_file(dir / "o.csv", "edge_id,multiplier\na,0\nb,1.5\nc,1\n");
  try {
    CapacityOverlay::load(dir / "o.csv");
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.violations().size(), 2u);
  }
}
