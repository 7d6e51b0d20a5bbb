#include <exception>
#include <iostream>
#include <mutex>
#include <sstream>

#include "commands.hpp"
#include "gscan/report.hpp"
#include "gscan/riskmodel.hpp"

namespace gscan::cli {

namespace {

struct Job {
  fs::path data;
  fs::path clusters;  // empty = no cluster columns
  fs::path out;
  std::uint64_t seed = 0;
  Interaction kind = Interaction::kIV;
  std::string label;  // sim index or "" for a single dataset
};

struct Failure {
  std::string sim;
  std::string interaction;
  std::string error;
};

void run_job(const Job& job, const FitOptions& o, const SpatialGraph* shared_graph,
             const fs::path& graph_root) {
  const auto data = load_data(job.data, o.common);
  const auto graph = shared_graph ? *shared_graph : load_graph(o.common, data, graph_root);

  ModelSpec spec;
  spec.interaction = job.kind;
  spec.spatial = !o.no_spatial;
  spec.temporal = !o.no_temporal;
  spec.interaction_effect = !o.no_interaction;
  spec.seed = job.seed;
  if (!job.clusters.empty()) {
    for (auto& c : read_cluster_report(job.clusters, data)) spec.clusters.push_back(std::move(c.cells));
  }
  const RiskModel model(data, graph, spec);
  const auto fit = gscan::fit(model);

  FitSummary summary;
  summary.model = &model;
  summary.fit = &fit;
  summary.n_samples = o.samples;
  summary.latent = posterior_samples(fit.mode, o.samples, job.seed);
  const auto eta = eta_samples(model, summary.latent);
  summary.criteria = information_criteria(data, eta);

  const auto tag = interaction_label(job.kind);
  auto report = fit_report(summary);
  report["n_clusters"] = model.cluster_columns().size();
  write_text(job.out / ("fit_" + tag + ".json"), report.dump(2) + "\n");
  std::ostringstream csv;
  write_risk_csv(data, eta, csv);
  write_text(job.out / ("risk_" + tag + ".csv"), csv.str());

  if (!o.common.geojson.empty()) {
    const auto rs = risk_summary(eta);
    write_geojson(o.common.geojson, job.out / ("risk_" + tag + ".geojson"), o.common.geojson_key, data,
                  [&](std::size_t area, Json& props) {
                    Json by_period = Json::object();
                    for (std::size_t t = 0; t < data.n_periods(); ++t) {
                      by_period[data.period_labels()[t]] = rs.median[data.index({area, t})];
                    }
                    props["median_risk"] = std::move(by_period);
                  });
  }
}

Json parameters(const FitOptions& o, const std::vector<Interaction>& kinds) {
  Json types = Json::array();
  for (auto k : kinds) types.push_back(interaction_label(k));
  return {{"interactions", std::move(types)},
          {"samples", o.samples},
          {"spatial", !o.no_spatial},
          {"temporal", !o.no_temporal},
          {"interaction_effect", !o.no_interaction},
          {"clusters", o.clusters.empty() ? o.clusters_from : o.clusters}};
}

}  // namespace

int run_fit(FitOptions o) {
  if (o.samples < 100) fail(ErrorCode::kInvalidInput, "--samples must be at least 100");
  set_workers(o.common.workers);
  const auto seed = resolve_seed(o.common);
  std::vector<Interaction> kinds;
  for (const auto& s : o.interactions) kinds.push_back(parse_interaction(s));

  std::vector<Job> jobs;
  std::vector<fs::path> out_dirs;
  std::optional<SpatialGraph> graph;
  fs::path graph_root;
  if (o.sims.empty()) {
    if (o.common.data.empty()) fail(ErrorCode::kInvalidInput, "--data or --sims is required");
    if (!o.clusters_from.empty()) fail(ErrorCode::kInvalidInput, "--clusters-from needs --sims");
    graph = load_graph(o.common, load_data(o.common.data, o.common));
    for (auto k : kinds) jobs.push_back({o.common.data, o.clusters, o.common.out, seed, k, ""});
    out_dirs.push_back(o.common.out);
  } else {
    if (!o.clusters.empty()) fail(ErrorCode::kInvalidInput, "use --clusters-from with --sims");
    graph_root = o.sims;
    const auto name = !o.name.empty() ? o.name
                      : o.clusters_from.empty() ? std::string("nocluster")
                                                : "cluster_" + o.clusters_from;
    for (const auto& dir : sim_dirs(o.sims)) {
      const auto k = std::stoull(dir.filename().string());
      fs::path clusters;
      if (!o.clusters_from.empty()) {
        clusters = dir / o.clusters_from / "clusters.json";
        if (!fs::exists(clusters)) fail(ErrorCode::kIo, "missing " + clusters.string());
      }
      for (auto kind : kinds) {
        jobs.push_back({dir / "data.csv", clusters, dir / name, derive_seed(seed, k), kind,
                        dir.filename().string()});
      }
      out_dirs.push_back(dir / name);
    }
    if (!o.common.graph.empty()) graph = load_graph(o.common, load_data(jobs.front().data, o.common));
  }

  std::vector<Failure> failures;
  std::exception_ptr input_error;
  std::mutex mu;
  const auto n_jobs = static_cast<std::ptrdiff_t>(jobs.size());
  // Each model is fitted single-threaded; the jobs themselves run in parallel.
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t j = 0; j < n_jobs; ++j) {
    const auto& job = jobs[static_cast<std::size_t>(j)];
    try {
      run_job(job, o, graph ? &*graph : nullptr, graph_root);
    } catch (const Error& e) {
      std::lock_guard lock(mu);
      if (e.is_numerical()) {
        failures.push_back({job.label, interaction_label(job.kind), e.what()});
      } else if (!input_error) {
        input_error = std::current_exception();
      }
    } catch (...) {
      std::lock_guard lock(mu);
      if (!input_error) input_error = std::current_exception();
    }
  }
  if (input_error) std::rethrow_exception(input_error);

  for (const auto& dir : out_dirs) {
    Manifest manifest("fit", o.common);
    manifest.parameters() = parameters(o, kinds);
    if (o.sims.empty()) {
      manifest.add_input("data", o.common.data);
      if (!o.clusters.empty()) manifest.add_input("clusters", o.clusters);
    } else {
      manifest.add_input("data", dir.parent_path() / "data.csv");
      manifest.set("sim_seed", derive_seed(seed, std::stoull(dir.parent_path().filename().string())));
    }
    for (auto k : kinds) {
      manifest.add_output("fit_" + interaction_label(k) + ".json");
      manifest.add_output("risk_" + interaction_label(k) + ".csv");
    }
    manifest.write(dir);
  }

  if (failures.empty()) return kOk;
  std::sort(failures.begin(), failures.end(), [](const Failure& a, const Failure& b) {
    return std::tie(a.sim, a.interaction) < std::tie(b.sim, b.interaction);
  });
  Json diag = Json::array();
  for (const auto& f : failures) {
    diag.push_back({{"sim", f.sim}, {"interaction", f.interaction}, {"error", f.error}});
  }
  const fs::path where = o.sims.empty() ? fs::path(o.common.out) : fs::path(o.sims);
  write_text(where / "diagnostics.json", Json{{"failures", std::move(diag)}}.dump(2) + "\n");
  for (const auto& f : failures) {
    std::cerr << "fit failed" << (f.sim.empty() ? "" : " for sim " + f.sim) << " (type " << f.interaction
              << "): " << f.error << '\n';
  }
  return kNumerical;
}

}  // namespace gscan::cli
