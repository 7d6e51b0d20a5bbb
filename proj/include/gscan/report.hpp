#pragma once

// Serialized outputs: cluster reports (JSON and flat CSV), risk-model fit
// reports and per-cell risk tables.

#include <filesystem>
#include <json.hpp>
#include <ostream>
#include <string>
#include <vector>

#include "gscan/riskmodel.hpp"
#include "gscan/scan.hpp"
#include "gscan/simulate.hpp"

namespace gscan {

using Json = nlohmann::json;

// {"clusters": [{rank, direction, log_lrt, p_value, obs_in, exp_in, center,
// cells: [{area_id, period}]}]}; cells in canonical order.
Json cluster_report(const ClusterSet& set, const StDataset& data);

// One row per (cluster, cell):
// cluster,direction,log_lrt,p_value,obs_in,exp_in,area_id,period
void write_cluster_csv(const ClusterSet& set, const StDataset& data, std::ostream& out);

// Reads the cells and directions of a cluster report back onto `layout`.
std::vector<PlantedCluster> read_cluster_report(const std::filesystem::path& path,
                                                const StDataset& layout);

struct FitSummary {
  const RiskModel* model = nullptr;
  const RiskFit* fit = nullptr;
  Criteria criteria;
  std::size_t n_samples = 0;
  Eigen::MatrixXd latent;  // posterior draws, used for the fixed-effect intervals
};

// {hyper, criteria, convergence, fixed}.
Json fit_report(const FitSummary& summary);

// area_id,period,median_risk,lo95,hi95,p_exceed_above_1,p_exceed_below_1
void write_risk_csv(const StDataset& data, const Eigen::MatrixXd& eta, std::ostream& out);

struct RiskTable {
  std::vector<double> median, lo95, hi95;  // relative-risk scale
};

RiskTable read_risk_csv(const std::filesystem::path& path, const StDataset& layout);

// Writes `text` to `path`, creating parent directories.
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace gscan
