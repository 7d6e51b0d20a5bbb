#include <cmath>
#include <fstream>
#include <sstream>

#include "commands.hpp"
#include "gscan/csv.hpp"
#include "gscan/metrics.hpp"
#include "gscan/report.hpp"

namespace gscan::cli {

namespace {

struct Sim {
  std::string name;
  fs::path dir;
  StDataset data;
  TruthTable truth;
};

std::string scenario_label(const EvaluateOptions& o) {
  if (!o.scenario.empty()) return o.scenario;
  const auto path = fs::path(o.sims) / "manifest.json";
  if (!fs::exists(path)) return "";
  std::ifstream in(path);
  try {
    const auto doc = Json::parse(in);
    const auto& p = doc.at("parameters");
    std::string s = p.at("scenario").get<std::string>();
    const auto sub = p.value("subscenario", std::string("none"));
    if (sub != "none") s += "_" + sub;
    return s;
  } catch (const Json::exception&) {
    return "";
  }
}

std::vector<std::string> risk_types(const fs::path& dir) {
  std::vector<std::string> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto name = e.path().filename().string();
    if (name.starts_with("risk_") && name.ends_with(".csv")) {
      out.push_back(name.substr(5, name.size() - 9));
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

int run_evaluate(EvaluateOptions o) {
  if (o.sims.empty()) fail(ErrorCode::kInvalidInput, "--sims is required");
  if (o.methods.empty() && o.models.empty()) {
    fail(ErrorCode::kInvalidInput, "name at least one --methods or --models directory");
  }
  set_workers(o.common.workers);
  Manifest manifest("evaluate", o.common);
  const auto scenario = scenario_label(o);

  std::vector<Sim> sims;
  for (const auto& dir : sim_dirs(o.sims)) {
    Sim s;
    s.name = dir.filename().string();
    s.dir = dir;
    s.data = load_data(dir / "data.csv", o.common);
    s.truth = load_truth(dir / "truth.csv", s.data);
    if (!sims.empty() && (s.data.area_ids() != sims.front().data.area_ids() ||
                          s.data.period_labels() != sims.front().data.period_labels())) {
      fail(ErrorCode::kInvalidInput, "simulation " + s.name + " has a different lattice");
    }
    sims.push_back(std::move(s));
  }

  const fs::path out = o.common.out;
  std::vector<DetectionRow> det_rows;
  std::ostringstream per_sim;
  per_sim << "sim,method,recall,precision,n_detected,n_spurious\n";
  for (const auto& method : o.methods) {
    std::vector<DetectionReport> reports;
    for (const auto& s : sims) {
      const auto dir = s.dir / method;
      if (!fs::is_directory(dir)) fail(ErrorCode::kIo, "missing method directory " + dir.string());
      const auto detected = read_cluster_report(dir / "clusters.json", s.data);
      const auto r = detection_metrics(detected, s.truth.clusters);
      auto opt = [](const std::optional<double>& v) { return v ? csv::format_double(*v) : std::string("NA"); };
      per_sim << s.name << ',' << method << ',' << opt(r.recall) << ',' << opt(r.precision) << ','
              << r.n_detected << ',' << r.n_spurious << '\n';
      reports.push_back(r);
    }
    det_rows.push_back({scenario, method, summarize(reports)});
  }

  std::vector<EstimationRow> est_rows;
  const std::size_t n = sims.front().data.n_areas(), T = sims.front().data.n_periods();
  const auto directions = truth_directions(sims.front().truth.clusters, n, T);
  for (const auto& model : o.models) {
    const auto first = sims.front().dir / model;
    if (!fs::is_directory(first)) fail(ErrorCode::kIo, "missing model directory " + first.string());
    const auto types = risk_types(first);
    if (types.empty()) fail(ErrorCode::kIo, "no risk_<type>.csv files in " + first.string());
    for (const auto& type : types) {
      std::vector<SimEstimate> est;
      for (const auto& s : sims) {
        const auto path = s.dir / model / ("risk_" + type + ".csv");
        if (!fs::exists(path)) fail(ErrorCode::kIo, "missing " + path.string());
        const auto table = read_risk_csv(path, s.data);
        SimEstimate e;
        auto logs = [](const std::vector<double>& v) {
          std::vector<double> r(v.size());
          std::transform(v.begin(), v.end(), r.begin(), [](double x) { return std::log(x); });
          return r;
        };
        e.estimate = logs(table.median);
        e.lower = logs(table.lo95);
        e.upper = logs(table.hi95);
        e.truth = s.truth.log_risk;
        est.push_back(std::move(e));
      }
      for (auto filter : {CellFilter::kAll, CellFilter::kInHigh, CellFilter::kInLow, CellFilter::kOutside}) {
        const auto r = estimation_metrics(est, n, T, filter, directions);
        if (r.n_cells > 0) est_rows.push_back({scenario, model + "/" + type, filter, r});
      }
    }
  }

  if (!det_rows.empty()) {
    std::ostringstream s;
    write_detection_table(s, det_rows);
    write_text(out / "detection.csv", s.str());
    write_text(out / "detection_by_sim.csv", per_sim.str());
    manifest.add_output("detection.csv");
    manifest.add_output("detection_by_sim.csv");
  }
  if (!est_rows.empty()) {
    std::ostringstream s;
    write_estimation_table(s, est_rows);
    write_text(out / "estimation.csv", s.str());
    manifest.add_output("estimation.csv");
  }
  manifest.parameters() = {{"sims", o.sims},
                           {"methods", o.methods},
                           {"models", o.models},
                           {"scenario", scenario},
                           {"n_sims", sims.size()}};
  manifest.write(out);
  return kOk;
}

}  // namespace gscan::cli
