#include <cmath>
#include <sstream>

#include "commands.hpp"
#include "gscan/csv.hpp"
#include "gscan/report.hpp"

namespace gscan::cli {

namespace {

std::string adjacency_csv(const SpatialGraph& g) {
  std::ostringstream s;
  s << "area_id_1,area_id_2\n";
  for (const auto& [a, b] : g.edges()) s << g.area_ids()[a] << ',' << g.area_ids()[b] << '\n';
  return s.str();
}

std::string centroids_csv(const SpatialGraph& g) {
  std::ostringstream s;
  s << "area_id,x,y\n";
  for (std::size_t i = 0; i < g.n_areas(); ++i) {
    s << g.area_ids()[i] << ',' << csv::format_double(g.centroid(i).x) << ','
      << csv::format_double(g.centroid(i).y) << '\n';
  }
  return s.str();
}

std::pair<std::size_t, std::size_t> parse_grid(const std::string& g) {
  const auto x = g.find('x');
  try {
    if (x != std::string::npos) {
      const auto r = std::stoul(g.substr(0, x));
      const auto c = std::stoul(g.substr(x + 1));
      if (r > 0 && c > 0) return {r, c};
    }
  } catch (const std::exception&) {
  }
  fail(ErrorCode::kInvalidInput, "--grid must look like 10x10");
}

}  // namespace

int run_simulate(SimulateOptions o) {
  set_workers(o.common.workers);
  const auto seed = resolve_seed(o.common);

  ScenarioSpec spec;
  spec.seed = seed;
  const auto underscore = o.scenario.find('_');
  spec.scenario = scenario_from_string(o.scenario.substr(0, underscore));
  spec.subscenario = underscore == std::string::npos
                         ? (spec.scenario == Scenario::kB ? Subscenario::kNone : Subscenario::k1H)
                         : subscenario_from_string(o.scenario.substr(underscore + 1));
  if (spec.scenario == Scenario::kB) spec.subscenario = Subscenario::kNone;
  if (!(o.risk_high > 0.0) || !(o.risk_low > 0.0)) {
    fail(ErrorCode::kInvalidInput, "cluster risks must be positive");
  }
  spec.beta_high = std::log(o.risk_high);
  spec.beta_low = std::log(o.risk_low);

  Manifest manifest("simulate", o.common);

  std::optional<StDataset> expected_source;
  if (!o.expected_from.empty()) {
    expected_source = load_data(o.expected_from, o.common);
    manifest.add_input("expected_from", o.expected_from);
  }

  SpatialGraph graph;
  if (!o.grid.empty()) {
    const auto [r, c] = parse_grid(o.grid);
    graph = grid_graph(r, c);
  } else if (!o.common.graph.empty()) {
    std::optional<fs::path> c;
    if (!o.common.centroids.empty()) c = fs::path(o.common.centroids);
    std::optional<std::vector<std::string>> order;
    if (expected_source) order = expected_source->area_ids();
    graph = build_graph(o.common.graph, c, order);
    manifest.add_input("graph", o.common.graph);
    if (c) manifest.add_input("centroids", *c);
  } else {
    fail(ErrorCode::kInvalidInput, "--grid or --graph is required");
  }

  const std::size_t T = expected_source ? expected_source->n_periods() : o.periods;
  if (T == 0) fail(ErrorCode::kInvalidInput, "--periods must be positive");
  const std::size_t cells = graph.n_areas() * T;
  std::vector<double> expected;
  if (expected_source) {
    expected.assign(expected_source->expected().begin(), expected_source->expected().end());
  } else if (o.expected_constant > 0.0) {
    expected.assign(cells, o.expected_constant);
  } else {
    expected = synth_expected(cells, o.targets, seed);
  }

  if (o.cluster_first < 1 || o.cluster_last < o.cluster_first) {
    fail(ErrorCode::kInvalidInput, "cluster periods must satisfy 1 <= first <= last");
  }
  GeometryOptions geo;
  geo.snake_length = o.snake_length;
  geo.block_size = o.block_size;
  geo.first_period = o.cluster_first - 1;
  geo.last_period = o.cluster_last - 1;
  if (geo.first_period >= T) fail(ErrorCode::kInvalidInput, "cluster periods outside the study period");
  spec.clusters = default_geometry(spec.subscenario, graph, T, seed, geo);

  const auto sims = batch(spec, graph, T, expected, o.n);

  const fs::path out = o.common.out;
  write_text(out / "adjacency.csv", adjacency_csv(graph));
  write_text(out / "centroids.csv", centroids_csv(graph));
  manifest.add_output("adjacency.csv");
  manifest.add_output("centroids.csv");
  for (std::size_t k = 0; k < sims.size(); ++k) {
    const auto dir = out / "sims" / std::to_string(k);
    fs::create_directories(dir);
    write_long_csv(sims[k].dataset, dir / "data.csv");
    write_truth_csv(sims[k], dir / "truth.csv");
  }
  manifest.add_output("sims/<k>/data.csv");
  manifest.add_output("sims/<k>/truth.csv");

  Json clusters = Json::array();
  for (const auto& c : spec.clusters) {
    clusters.push_back({{"direction", std::string(to_string(c.direction))}, {"n_cells", c.cells.size()}});
  }
  manifest.parameters() = {{"scenario", std::string(to_string(spec.scenario))},
                           {"subscenario", std::string(to_string(spec.subscenario))},
                           {"n", o.n},
                           {"periods", T},
                           {"n_areas", graph.n_areas()},
                           {"risk_high", o.risk_high},
                           {"risk_low", o.risk_low},
                           {"snake_length", o.snake_length},
                           {"block_size", o.block_size},
                           {"cluster_periods", {o.cluster_first, o.cluster_last}},
                           {"expected", expected_source         ? "file"
                                        : o.expected_constant > 0 ? "constant"
                                                                  : "synthetic"},
                           {"planted", std::move(clusters)}};
  if (!o.grid.empty()) manifest.parameters()["grid"] = o.grid;
  manifest.write(out);
  return kOk;
}

}  // namespace gscan::cli
