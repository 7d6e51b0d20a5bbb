#include <fstream>
#include <sstream>

#include "commands.hpp"
#include "gscan/cylinder.hpp"
#include "gscan/report.hpp"
#include "gscan/scan.hpp"

namespace gscan::cli {

namespace {

ClusterSet run_method(const StDataset& data, const SpatialGraph& graph, const DetectOptions& o,
                      std::uint64_t seed) {
  const bool high = o.directions != "low";
  const bool low = o.directions != "high";
  if (o.method == "cylinder") {
    CylinderParams p;
    p.max_spatial_fraction = o.max_spatial;
    p.max_temporal_fraction = o.max_temporal;
    p.n_replicates = o.replicates;
    p.alpha = o.alpha;
    p.seed = seed;
    p.scan_high = high;
    p.scan_low = low;
    return scan_cylindrical(data, graph, p);
  }
  ScanParams p;
  p.k = o.k;
  p.t_star = o.tstar;
  p.n_replicates = o.replicates;
  p.alpha = o.alpha;
  p.seed = seed;
  p.baseline = baseline_from_string(o.baseline);
  auto set = detect(data, graph, p);
  // The two one-tailed tests are independent, so dropping one direction
  // afterwards is the same as never running it.
  std::erase_if(set.clusters, [&](const Cluster& c) {
    return c.window.direction == Direction::kHigh ? !high : !low;
  });
  return set;
}

void write_outputs(const ClusterSet& set, const StDataset& data, const fs::path& dir,
                   const DetectOptions& o, Manifest& manifest) {
  write_text(dir / "clusters.json", cluster_report(set, data).dump(2) + "\n");
  std::ostringstream csv;
  write_cluster_csv(set, data, csv);
  write_text(dir / "clusters.csv", csv.str());
  manifest.add_output("clusters.json");
  manifest.add_output("clusters.csv");
  if (!o.common.geojson.empty()) {
    write_geojson(o.common.geojson, dir / "clusters.geojson", o.common.geojson_key, data,
                  [&](std::size_t area, Json& props) {
                    Json hits = Json::array();
                    for (std::size_t r = 0; r < set.clusters.size(); ++r) {
                      const auto& w = set.clusters[r].window;
                      Json periods = Json::array();
                      for (std::size_t t = 0; t < data.n_periods(); ++t) {
                        if (std::find(w.cells.begin(), w.cells.end(), StCell{area, t}) != w.cells.end()) {
                          periods.push_back(data.period_labels()[t]);
                        }
                      }
                      if (!periods.empty()) {
                        hits.push_back({{"rank", r + 1},
                                        {"direction", std::string(to_string(w.direction))},
                                        {"periods", std::move(periods)}});
                      }
                    }
                    props["gscan_clusters"] = std::move(hits);
                  });
    manifest.add_output("clusters.geojson");
  }
}

Json parameters(const DetectOptions& o) {
  Json p{{"method", o.method},
         {"replicates", o.replicates},
         {"alpha", o.alpha},
         {"directions", o.directions}};
  if (o.method == "cylinder") {
    p["max_spatial_fraction"] = o.max_spatial;
    p["max_temporal_fraction"] = o.max_temporal;
  } else {
    p["K"] = o.k;
    p["baseline"] = o.baseline;
    p["tstar"] = o.tstar;
  }
  return p;
}

}  // namespace

int run_detect(DetectOptions o) {
  if (o.method != "gscanstat" && o.method != "cylinder") {
    fail(ErrorCode::kInvalidInput, "--method must be gscanstat or cylinder");
  }
  if (o.directions != "both" && o.directions != "high" && o.directions != "low") {
    fail(ErrorCode::kInvalidInput, "--directions must be both, high or low");
  }
  set_workers(o.common.workers);
  const auto seed = resolve_seed(o.common);

  if (o.sims.empty()) {
    if (o.common.data.empty()) fail(ErrorCode::kInvalidInput, "--data or --sims is required");
    const auto data = load_data(o.common.data, o.common);
    const auto graph = load_graph(o.common, data);
    Manifest manifest("detect", o.common);
    manifest.parameters() = parameters(o);
    manifest.add_input("data", o.common.data);
    manifest.add_input("graph", o.common.graph);
    if (!o.common.centroids.empty()) manifest.add_input("centroids", o.common.centroids);
    const auto set = run_method(data, graph, o, seed);
    write_outputs(set, data, o.common.out, o, manifest);
    manifest.set("n_clusters", set.clusters.size());
    manifest.write(o.common.out);
    return kOk;
  }

  const fs::path root = o.sims;
  const auto dirs = sim_dirs(root);
  std::optional<SpatialGraph> graph;
  for (const auto& dir : dirs) {
    const auto k = std::stoull(dir.filename().string());
    const auto data = load_data(dir / "data.csv", o.common);
    if (!graph || graph->area_ids() != data.area_ids()) graph = load_graph(o.common, data, root);
    Manifest manifest("detect", o.common);
    manifest.parameters() = parameters(o);
    manifest.add_input("data", dir / "data.csv");
    const auto sim_seed = derive_seed(seed, k);
    manifest.set("sim_seed", sim_seed);
    const auto set = run_method(data, *graph, o, sim_seed);
    const auto out = dir / o.method;
    write_outputs(set, data, out, o, manifest);
    manifest.set("n_clusters", set.clusters.size());
    manifest.write(out);
  }
  return kOk;
}

}  // namespace gscan::cli
