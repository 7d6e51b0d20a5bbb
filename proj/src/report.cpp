#include "gscan/report.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include "gscan/csv.hpp"

namespace gscan {

namespace {

std::vector<StCell> sorted_cells(const Window& w) {
  auto cells = w.cells;
  std::sort(cells.begin(), cells.end());
  return cells;
}

std::map<std::string, std::size_t> period_lookup(const StDataset& d) {
  std::map<std::string, std::size_t> m;
  for (std::size_t t = 0; t < d.n_periods(); ++t) m[d.period_labels()[t]] = t;
  return m;
}

Json cell_json(const StDataset& d, StCell c) {
  return {{"area_id", d.area_ids()[c.area]}, {"period", d.period_labels()[c.period]}};
}

}  // namespace

Json cluster_report(const ClusterSet& set, const StDataset& data) {
  Json list = Json::array();
  for (std::size_t r = 0; r < set.clusters.size(); ++r) {
    const auto& c = set.clusters[r];
    Json cells = Json::array();
    for (const auto& cell : sorted_cells(c.window)) cells.push_back(cell_json(data, cell));
    list.push_back({{"rank", r + 1},
                    {"direction", std::string(to_string(c.window.direction))},
                    {"log_lrt", c.window.log_lrt},
                    {"p_value", c.p_value},
                    {"obs_in", c.window.obs_in},
                    {"exp_in", c.window.exp_in},
                    {"center", cell_json(data, c.window.center())},
                    {"cells", std::move(cells)}});
  }
  return {{"clusters", std::move(list)},
          {"n_replicates_high", set.null_high.size()},
          {"n_replicates_low", set.null_low.size()}};
}

void write_cluster_csv(const ClusterSet& set, const StDataset& data, std::ostream& out) {
  out << "cluster,direction,log_lrt,p_value,obs_in,exp_in,area_id,period\n";
  for (std::size_t r = 0; r < set.clusters.size(); ++r) {
    const auto& c = set.clusters[r];
    const std::string head = std::to_string(r + 1) + ',' + std::string(to_string(c.window.direction)) +
                             ',' + csv::format_double(c.window.log_lrt) + ',' +
                             csv::format_double(c.p_value) + ',' +
                             std::to_string(c.window.obs_in) + ',' +
                             csv::format_double(c.window.exp_in) + ',';
    for (const auto& cell : sorted_cells(c.window)) {
      out << head << data.area_ids()[cell.area] << ',' << data.period_labels()[cell.period] << '\n';
    }
  }
}

std::vector<PlantedCluster> read_cluster_report(const std::filesystem::path& path,
                                                const StDataset& layout) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open cluster report " + path.string());
  Json doc;
  try {
    doc = Json::parse(in);
  } catch (const Json::exception& e) {
    fail(ErrorCode::kInvalidInput, path.string() + ": " + e.what());
  }
  const auto periods = period_lookup(layout);
  std::vector<PlantedCluster> out;
  try {
    for (const auto& c : doc.at("clusters")) {
      PlantedCluster p;
      p.direction = direction_from_string(c.at("direction").get<std::string>());
      for (const auto& cell : c.at("cells")) {
        const auto id = cell.at("area_id").get<std::string>();
        const auto area = layout.area_index(id);
        if (!area) fail(ErrorCode::kUnknownArea, path.string() + ": unknown area '" + id + "'");
        const auto label = cell.at("period").get<std::string>();
        const auto t = periods.find(label);
        if (t == periods.end()) {
          fail(ErrorCode::kInvalidInput, path.string() + ": unknown period '" + label + "'");
        }
        p.cells.push_back({*area, t->second});
      }
      std::sort(p.cells.begin(), p.cells.end());
      out.push_back(std::move(p));
    }
  } catch (const Json::exception& e) {
    fail(ErrorCode::kInvalidInput, path.string() + ": malformed cluster report: " + e.what());
  }
  return out;
}

Json fit_report(const FitSummary& s) {
  const auto& fit = *s.fit;
  const auto& model = *s.model;
  const auto& h = fit.mode.hyper;
  const auto& c = s.criteria;
  const auto& lay = model.layout();

  Json fixed = Json::array();
  for (std::size_t j = 0; j <= lay.n_beta; ++j) {
    const auto k = static_cast<Eigen::Index>(j);
    std::vector<double> draws(static_cast<std::size_t>(s.latent.cols()));
    for (Eigen::Index l = 0; l < s.latent.cols(); ++l) draws[static_cast<std::size_t>(l)] = s.latent(k, l);
    Json row{{"name", j == 0 ? std::string("intercept") : "beta" + std::to_string(j)},
             {"mode", fit.mode.x(k)}};
    if (!draws.empty()) {
      row["lo95"] = quantile_type7(draws, 0.025);
      row["hi95"] = quantile_type7(draws, 0.975);
    }
    if (j > 0) row["cluster"] = model.cluster_columns()[j - 1] + 1;
    fixed.push_back(std::move(row));
  }

  Json restarts = Json::array();
  for (double v : fit.search.restart_values) restarts.push_back(v);
  return {
      {"hyper",
       {{"tau_xi", h.tau_xi}, {"lambda", h.lambda}, {"tau_gamma", h.tau_gamma}, {"tau_delta", h.tau_delta}}},
      {"criteria",
       {{"dic", c.dic},
        {"p_d", c.p_d},
        {"deviance_bar", c.deviance_bar},
        {"waic", c.waic},
        {"p_waic", c.p_waic},
        {"lppd", c.lppd},
        {"ls", c.ls},
        {"cpo_flagged_cells", c.flagged_cells.size()},
        {"n_samples", s.n_samples}}},
      {"convergence",
       {{"converged", fit.converged},
        {"newton_iterations", fit.mode.iterations},
        {"gradient_norm", fit.mode.gradient_norm},
        {"log_marginal", fit.search.log_marginal},
        {"hyper_evaluations", fit.search.evaluations},
        {"restart_log_marginals", std::move(restarts)},
        {"condition", fit.mode.condition},
        {"ill_conditioned", fit.ill_conditioned}}},
      {"interaction", static_cast<int>(model.spec().interaction)},
      {"fixed", std::move(fixed)}};
}

void write_risk_csv(const StDataset& data, const Eigen::MatrixXd& eta, std::ostream& out) {
  const auto summary = risk_summary(eta);
  const auto above = exceedance_prob(eta, 1.0, Tail::kAbove);
  const auto below = exceedance_prob(eta, 1.0, Tail::kBelow);
  out << "area_id,period,median_risk,lo95,hi95,p_exceed_above_1,p_exceed_below_1\n";
  for (std::size_t k = 0; k < data.n_cells(); ++k) {
    const auto c = data.cell(k);
    out << data.area_ids()[c.area] << ',' << data.period_labels()[c.period] << ','
        << csv::format_double(summary.median[k]) << ',' << csv::format_double(summary.lo95[k])
        << ',' << csv::format_double(summary.hi95[k]) << ',' << csv::format_double(above[k])
        << ',' << csv::format_double(below[k]) << '\n';
  }
}

RiskTable read_risk_csv(const std::filesystem::path& path, const StDataset& layout) {
  const auto table = csv::read(path);
  const auto c_area = table.column("area_id");
  const auto c_period = table.column("period");
  const auto c_med = table.column("median_risk");
  const auto c_lo = table.column("lo95");
  const auto c_hi = table.column("hi95");
  const auto periods = period_lookup(layout);
  RiskTable out;
  out.median.assign(layout.n_cells(), 0.0);
  out.lo95 = out.hi95 = out.median;
  std::vector<char> seen(layout.n_cells(), 0);
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::string ctx = path.string() + ":" + std::to_string(table.line_numbers[r]);
    const auto area = layout.area_index(row[c_area]);
    if (!area) fail(ErrorCode::kUnknownArea, ctx + ": unknown area '" + row[c_area] + "'");
    const auto t = periods.find(row[c_period]);
    if (t == periods.end()) fail(ErrorCode::kInvalidInput, ctx + ": unknown period '" + row[c_period] + "'");
    const auto k = layout.index({*area, t->second});
    if (seen[k]) fail(ErrorCode::kDuplicateCell, ctx + ": duplicate cell");
    seen[k] = 1;
    out.median[k] = csv::parse_double(row[c_med], ctx);
    out.lo95[k] = csv::parse_double(row[c_lo], ctx);
    out.hi95[k] = csv::parse_double(row[c_hi], ctx);
  }
  if (std::find(seen.begin(), seen.end(), 0) != seen.end()) {
    fail(ErrorCode::kMissingCell, path.string() + ": risk table does not cover every cell");
  }
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
  out << text;
  if (!out) fail(ErrorCode::kIo, "write failed for " + path.string());
}

}  // namespace gscan
