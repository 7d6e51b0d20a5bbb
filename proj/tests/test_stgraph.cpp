#include <algorithm>
#include <random>
#include <set>

#include "doctest.h"
#include "gscan/stgraph.hpp"
#include "test_util.hpp"

using namespace gscan;

namespace {

std::vector<std::uint32_t> to_vec(std::span<const std::uint32_t> s) {
  return {s.begin(), s.end()};
}

// Random connected graph: a spanning tree plus extra edges, random centroids.
SpatialGraph random_graph(std::mt19937_64& rng, std::size_t n) {
  std::vector<std::string> ids;
  std::vector<Point> pts;
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  std::uniform_real_distribution<double> u(0.0, 10.0);
  for (std::size_t i = 0; i < n; ++i) {
    ids.push_back("u" + std::to_string(100 + i));
    pts.push_back({u(rng), u(rng)});
    if (i > 0) edges.emplace_back(i, rng() % i);
  }
  for (std::size_t e = 0; e < n / 2; ++e) edges.emplace_back(rng() % n, rng() % n);
  return SpatialGraph(ids, edges, pts);
}

}  // namespace

TEST_CASE("build_graph from files") {
  testutil::TempDir dir;
  const auto adj = dir.write("adj.csv", "area_id_1,area_id_2\na,b\nb,c\nb,a\n");
  const auto cen = dir.write("cen.csv", "area_id,x,y\na,0,0\nb,1,0\nc,2,0\n");
  const auto g = build_graph(adj, cen);
  REQUIRE(g.n_areas() == 3);
  CHECK(to_vec(g.neighbors(1)) == std::vector<std::uint32_t>{0, 2});
  // The repeated (b, a) edge leaves a single entry.
  CHECK(to_vec(g.neighbors(0)) == std::vector<std::uint32_t>{1});
  CHECK(g.adjacent(2, 1));
  CHECK_FALSE(g.adjacent(0, 2));
  CHECK(g.connected());

  const auto bad = dir.write("bad.csv", "a,zz\n");
  try {
    build_graph(bad, cen);
    FAIL("expected UnknownArea");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kUnknownArea);
  }
}

TEST_CASE("disconnected graph warns but builds") {
  testutil::TempDir dir;
  const auto adj = dir.write("adj.csv", "a,b\nc,d\n");
  std::vector<std::string> seen;
  set_warning_sink([&](const std::string& m) { seen.push_back(m); });
  const auto g = build_graph(adj, std::nullopt);
  set_warning_sink(nullptr);
  CHECK(g.n_components() == 2);
  CHECK(seen.size() == 1);
}

TEST_CASE("equidistant centroids rank by area index") {
  // Four corners of a square around area 0 at the centre.
  std::vector<Point> pts{{0, 0}, {1, 0}, {0, 1}, {-1, 0}, {0, -1}};
  const SpatialGraph g({"c", "e", "n", "w", "s"}, {}, pts);
  CHECK(to_vec(g.knn_rank(0)) == std::vector<std::uint32_t>{0, 1, 2, 3, 4});
  // From "e": c at 1, n and s at sqrt 2, w at 2.
  CHECK(to_vec(g.knn_rank(1)) == std::vector<std::uint32_t>{1, 0, 2, 4, 3});
}

TEST_CASE("knn_rank is a permutation starting at self") {
  std::mt19937_64 rng(3);
  for (int rep = 0; rep < 20; ++rep) {
    const auto g = random_graph(rng, 2 + rng() % 30);
    for (std::size_t i = 0; i < g.n_areas(); ++i) {
      auto r = to_vec(g.knn_rank(i));
      CHECK(r.front() == i);
      std::sort(r.begin(), r.end());
      for (std::size_t k = 0; k < r.size(); ++k) CHECK(r[k] == k);
      for (auto nb : g.neighbors(i)) {
        CHECK(nb != i);
        CHECK(g.adjacent(nb, i));
      }
    }
  }
}

TEST_CASE("grid_graph shape") {
  const auto g = grid_graph(3, 4);
  CHECK(g.n_areas() == 12);
  CHECK(g.area_ids().front() == "r0c0");
  CHECK(std::is_sorted(g.area_ids().begin(), g.area_ids().end()));
  CHECK(g.degree(0) == 2);
  CHECK(g.degree(5) == 4);
  CHECK(g.edges().size() == 3 * 3 + 2 * 4);
  const auto big = grid_graph(10, 10);
  CHECK(std::is_sorted(big.area_ids().begin(), big.area_ids().end()));
}

TEST_CASE("limiting_window examples") {
  const auto g = path_graph(4);
  const auto one = limiting_window(g, {2, 1}, 1, 0, 3);
  CHECK(one.cells() == std::vector<StCell>{{2, 1}});

  const auto all = limiting_window(g, {2, 1}, 4, 5, 3);
  CHECK(all.size() == 12);

  // Centre area 1 at x = 1: areas 0 and 2 are both at distance 1, so the tie
  // goes to area 0. Periods max(0, 0 - 1) .. min(2, 0 + 1).
  const auto w = limiting_window(g, {1, 0}, 2, 1, 3);
  CHECK(w.cells() == std::vector<StCell>{{0, 0}, {1, 0}, {0, 1}, {1, 1}});
  CHECK(w.contains({0, 1}));
  CHECK_FALSE(w.contains({2, 0}));
  CHECK_FALSE(w.contains({1, 2}));
}

TEST_CASE("limiting_window is monotone in K and T*") {
  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 20; ++rep) {
    const auto g = random_graph(rng, 3 + rng() % 15);
    const std::size_t n_periods = 1 + rng() % 6;
    const StCell c{rng() % g.n_areas(), rng() % n_periods};
    const std::size_t k1 = 1 + rng() % g.n_areas();
    const std::size_t k2 = k1 + rng() % (g.n_areas() - k1 + 1);
    const std::size_t t1 = rng() % 3;
    const std::size_t t2 = t1 + rng() % 3;
    const auto small = limiting_window(g, c, k1, t1, n_periods);
    const auto large = limiting_window(g, c, k2, t2, n_periods);
    for (const auto& cell : small.cells()) CHECK(large.contains(cell));
  }
}

TEST_CASE("frontier examples and properties") {
  const auto path = path_graph(3);
  const auto lw = limiting_window(path, {1, 0}, 3, 0, 1);
  const std::vector<StCell> win{{1, 0}};
  CHECK(frontier(win, lw, path) == std::vector<StCell>{{0, 0}, {2, 0}});

  const SpatialGraph isolated({"p", "q"}, {}, {{0, 0}, {5, 5}});
  const auto lw0 = limiting_window(isolated, {0, 0}, 2, 0, 3);
  const std::vector<StCell> single{{0, 0}};
  CHECK(frontier(single, lw0, isolated).empty());

  const auto lw1 = limiting_window(isolated, {0, 1}, 1, 1, 3);
  const std::vector<StCell> mid{{0, 1}};
  CHECK(frontier(mid, lw1, isolated) == std::vector<StCell>{{0, 0}, {0, 2}});

  std::mt19937_64 rng(9);
  for (int rep = 0; rep < 30; ++rep) {
    const auto g = random_graph(rng, 4 + rng() % 12);
    const std::size_t n_periods = 1 + rng() % 4;
    const StCell c{rng() % g.n_areas(), rng() % n_periods};
    const auto lim = limiting_window(g, c, 1 + rng() % g.n_areas(), rng() % 3, n_periods);
    // Grow a random connected window.
    std::vector<StCell> window{c};
    for (int step = 0; step < 5; ++step) {
      const auto fr = frontier(window, lim, g);
      if (fr.empty()) break;
      window.push_back(fr[rng() % fr.size()]);
    }
    const auto fr = frontier(window, lim, g);
    CHECK(std::is_sorted(fr.begin(), fr.end()));
    for (const auto& f : fr) {
      CHECK(lim.contains(f));
      CHECK(std::find(window.begin(), window.end(), f) == window.end());
    }
  }
}

TEST_CASE("aggregate_units merge rule") {
  const auto g = path_graph(3);
  const std::vector<std::string> same{"r", "r", "r"};
  const StDataset d(g.area_ids(), {"1"}, {5, 7, 20}, {4.0, 6.0, 22.0});

  const auto none = aggregate_units(g, d, 5, same);
  CHECK(none.unit_ids == g.area_ids());
  CHECK(none.dataset.observed()[1] == 7);

  // a (5) is smallest and joins b (7) -> 12 < 16, which then joins c.
  const auto agg = aggregate_units(g, d, 16, same);
  REQUIRE(agg.unit_ids.size() == 1);
  CHECK(agg.unit_ids[0] == "a0+a1+a2");
  CHECK(agg.dataset.total_observed() == 32);
  CHECK(agg.dataset.total_expected() == doctest::Approx(32.0));
  CHECK_FALSE(agg.below_threshold[0]);
  // Case-weighted centroid: (5*0 + 7*1 + 20*2) / 32.
  CHECK(agg.graph.centroid(0).x == doctest::Approx(47.0 / 32.0));

  const auto two = path_graph(2);
  const StDataset d2(two.area_ids(), {"1"}, {5, 40}, {5.0, 40.0});
  const std::vector<std::string> split{"x", "y"};
  const auto kept = aggregate_units(two, d2, 16, split);
  REQUIRE(kept.unit_ids.size() == 2);
  CHECK(kept.below_threshold[0]);
  CHECK_FALSE(kept.below_threshold[1]);
}

TEST_CASE("aggregate_units conserves totals and respects labels") {
  std::mt19937_64 rng(21);
  for (int rep = 0; rep < 20; ++rep) {
    const auto g = random_graph(rng, 5 + rng() % 25);
    const std::size_t n = g.n_areas();
    const std::size_t T = 1 + rng() % 3;
    std::vector<std::int64_t> obs(n * T);
    std::vector<double> exp(n * T);
    for (std::size_t i = 0; i < n * T; ++i) {
      obs[i] = static_cast<std::int64_t>(rng() % 9);
      exp[i] = 0.5 + static_cast<double>(rng() % 100) / 10.0;
    }
    std::vector<std::string> periods;
    for (std::size_t t = 0; t < T; ++t) periods.push_back(std::to_string(t));
    const StDataset d(g.area_ids(), periods, obs, exp);
    std::vector<std::string> labels(n);
    for (auto& l : labels) l = (rng() % 2) ? "east" : "west";
    const auto agg = aggregate_units(g, d, 16, labels);
    CHECK(agg.dataset.total_observed() == d.total_observed());
    CHECK(agg.dataset.total_expected() ==
          doctest::Approx(d.total_expected()).epsilon(1e-9));
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = 0; b < n; ++b) {
        if (agg.unit_of_area[a] == agg.unit_of_area[b]) CHECK(labels[a] == labels[b]);
      }
    }
    for (std::size_t u = 0; u < agg.unit_ids.size(); ++u) {
      std::int64_t tot = 0;
      for (std::size_t t = 0; t < T; ++t) tot += agg.dataset.observed({u, t});
      CHECK((tot >= 16 || agg.below_threshold[u]));
    }
  }
}
