#include "oracles.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unistd.h>

namespace oracle {

using evtraffic::LinkIndex;
using evtraffic::NodeIndex;
using evtraffic::RoadNetwork;

double bpr(double tf, double cap, double v, double fs, double alpha, double beta) {
  return fs * (1.0 + alpha * std::pow(v / cap, beta)) * tf;
}

double marginal(double tf, double cap, double v, double fs, double alpha, double beta) {
  // t(v) + v t'(v), with t'(v) = fs alpha beta v^(beta-1) / cap^beta tf
  return bpr(tf, cap, v, fs, alpha, beta) + fs * alpha * beta * std::pow(v / cap, beta) * tf;
}

double total_time(const RoadNetwork& net, const std::vector<double>& volumes) {
  const auto& p = net.params();
  double total = 0.0;
  for (std::size_t e = 0; e < volumes.size(); ++e) {
    const auto& l = net.link(static_cast<LinkIndex>(e));
    total += volumes[e] * bpr(l.freeflow_time, l.capacity, volumes[e], p.f_s, p.alpha, p.beta);
  }
  return total;
}

std::vector<std::vector<LinkIndex>> simple_paths(const RoadNetwork& net, NodeIndex from, NodeIndex to) {
  std::vector<std::vector<LinkIndex>> out;
  std::vector<LinkIndex> stack;
  std::vector<bool> visited(net.num_nodes(), false);
  std::function<void(NodeIndex)> dfs = [&](NodeIndex n) {
    if (n == to) {
      out.push_back(stack);
      return;
    }
    visited[n] = true;
    for (LinkIndex l = 0; l < net.num_links(); ++l) {
      if (net.tail(l) != n || visited[net.head(l)]) continue;
      stack.push_back(l);
      dfs(net.head(l));
      stack.pop_back();
    }
    visited[n] = false;
  };
  dfs(from);
  return out;
}

BestPath brute_shortest(const RoadNetwork& net, const std::vector<double>& costs, NodeIndex from, NodeIndex to) {
  BestPath best;
  for (const auto& path : simple_paths(net, from, to)) {
    double c = 0.0;
    std::vector<std::string> ids;
    for (auto l : path) {
      c += costs[l];
      ids.push_back(net.link(l).edge_id);
    }
    if (!best.found || c < best.cost || (c == best.cost && ids < best.edges)) {
      best = {true, c, ids};
    }
  }
  return best;
}

double bisect(const std::function<double(double)>& f, double lo, double hi, double tol) {
  double flo = f(lo);
  for (int i = 0; i < 200 && hi - lo > tol; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if ((fm < 0) == (flo < 0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

SimplexOptimum braess_grid(const RoadNetwork& net, double demand, double step, Objective objective) {
  const auto& p = net.params();
  auto link = [&](const char* id) { return net.link(*net.find_link(id)); };
  const auto oa = link("OA"), ob = link("OB"), ad = link("AD"), bd = link("BD");
  const bool has_cross = net.find_link("AB").has_value();
  const evtraffic::Link ab = has_cross ? link("AB") : evtraffic::Link{};
  auto term = [&](const evtraffic::Link& l, double v) {
    if (objective == Objective::total_time) return v * bpr(l.freeflow_time, l.capacity, v, p.f_s, p.alpha, p.beta);
    // Beckmann term: integral of the BPR time from 0 to v.
    return p.f_s * l.freeflow_time * (v + p.alpha * v * std::pow(v / l.capacity, p.beta) / (p.beta + 1.0));
  };
  const int n = static_cast<int>(std::lround(demand / step));
  // Every link volume is a multiple of step, so each term is tabulated once.
  auto table = [&](const evtraffic::Link& l) {
    std::vector<double> t(n + 1);
    for (int i = 0; i <= n; ++i) t[i] = term(l, i * step);
    return t;
  };
  const auto t_oa = table(oa), t_ob = table(ob), t_ad = table(ad), t_bd = table(bd);
  const auto t_ab = has_cross ? table(ab) : std::vector<double>(n + 1, 0.0);
  SimplexOptimum best;
  best.objective = INFINITY;
  for (int i = 0; i <= n; ++i) {
    const int max_j = has_cross ? n - i : 0;
    for (int j = 0; j <= max_j; ++j) {
      const int k = n - i - j;
      const double f = t_oa[i + j] + t_ad[i] + t_ob[k] + t_bd[j + k] + t_ab[j];
      if (f < best.objective) best = {i * step, j * step, k * step, f};
    }
  }
  return best;
}

double one_vehicle_removal(const RoadNetwork& net, const std::vector<double>& volumes,
                           const std::vector<LinkIndex>& path) {
  auto reduced = volumes;
  for (auto l : path) reduced[l] -= 1.0;
  return total_time(net, volumes) - total_time(net, reduced);
}

RoadNetwork random_network(std::mt19937_64& rng, int nodes, int extra_links) {
  std::uniform_real_distribution<double> tf(1.0, 20.0);
  std::uniform_real_distribution<double> cap(200.0, 2000.0);
  std::uniform_int_distribution<int> pick(0, nodes - 1);
  std::vector<evtraffic::Node> ns;
  for (int i = 0; i < nodes; ++i) ns.push_back({"n" + std::to_string(i), -22.9 + 0.01 * i, -43.2 + 0.005 * (i % 3)});
  std::vector<evtraffic::Link> ls;
  int next = 0;
  auto add = [&](int a, int b) {
    std::ostringstream id;
    id << "l" << (next < 10 ? "0" : "") << next++;
    ls.push_back({id.str(), ns[a].node_id, ns[b].node_id, 1000.0, cap(rng), tf(rng), false});
  };
  for (int i = 0; i < nodes; ++i) add(i, (i + 1) % nodes);
  for (int k = 0; k < extra_links; ++k) {
    const int a = pick(rng);
    int b = pick(rng);
    if (a == b) b = (b + 1) % nodes;
    add(a, b);
  }
  return RoadNetwork(ns, ls);
}

TempDir::TempDir(const std::string& tag) {
  static std::atomic<int> counter{0};
  path_ = std::filesystem::temp_directory_path() /
          ("evtraffic-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  std::filesystem::remove_all(path_);
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

std::vector<std::pair<std::string, std::string>> snapshot(const std::filesystem::path& dir) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::ifstream in(entry.path(), std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    out.emplace_back(std::filesystem::relative(entry.path(), dir).string(), ss.str());
  }
  std::ranges::sort(out);
  return out;
}

}  // namespace oracle
