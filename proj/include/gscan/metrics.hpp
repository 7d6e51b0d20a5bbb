#pragma once

// Detection accuracy of cluster reports against planted truth, and accuracy
// of posterior risk estimates across simulations.

#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "gscan/scan.hpp"
#include "gscan/simulate.hpp"

namespace gscan {

struct DetectionReport {
  std::optional<double> recall;     // absent when the truth has no cluster cells
  std::optional<double> precision;  // absent as well, or when nothing is flagged
  std::size_t n_detected = 0;
  std::size_t n_spurious = 0;       // detected clusters with no correct cell
};

// Cluster reports in the same shape as planted truth.
std::vector<PlantedCluster> as_labeled(std::span<const Cluster> clusters);

// A flagged cell is correct when it lies in some true cluster of the same
// direction.
DetectionReport detection_metrics(std::span<const PlantedCluster> detected,
                                  std::span<const PlantedCluster> truth);

struct DetectionSummary {
  std::optional<double> recall;     // mean over simulations where defined
  std::optional<double> precision;
  double mean_detected = 0.0;
  double mean_spurious = 0.0;
  std::size_t n_simulations = 0;
};

DetectionSummary summarize(std::span<const DetectionReport> reports);

// One simulation's posterior summaries on the log-risk scale, with the truth.
struct SimEstimate {
  std::vector<double> estimate;  // posterior median log-risk per cell
  std::vector<double> lower;     // 95% interval bounds
  std::vector<double> upper;
  std::vector<double> truth;
};

enum class CellFilter { kAll, kInHigh, kInLow, kOutside };

CellFilter cell_filter_from_string(std::string_view s);
std::string_view to_string(CellFilter f);

struct EstimationReport {
  double mab = 0.0;
  double mrmse = 0.0;
  double mean_length = 0.0;
  double coverage95 = 0.0;
  double is05 = 0.0;
  std::size_t n_cells = 0;  // cells that passed the filter
};

// 95% interval score of a single interval: width plus 40 times the miss.
double interval_score(double lower, double upper, double truth);

// Cells are period-major (t * n_areas + i). `truth_direction` gives, per cell,
// the planted direction if the cell lies in a true cluster.
EstimationReport estimation_metrics(std::span<const SimEstimate> sims, std::size_t n_areas,
                                    std::size_t n_periods, CellFilter filter,
                                    std::span<const std::optional<Direction>> truth_direction);

std::vector<std::optional<Direction>> truth_directions(std::span<const PlantedCluster> truth,
                                                       std::size_t n_areas,
                                                       std::size_t n_periods);

struct DetectionRow {
  std::string scenario;
  std::string method;
  DetectionSummary summary;
};

struct EstimationRow {
  std::string scenario;
  std::string model;
  CellFilter filter = CellFilter::kAll;
  EstimationReport report;
};

// Column layouts follow the detection and estimation comparison tables;
// undefined values print as NA.
void write_detection_table(std::ostream& out, std::span<const DetectionRow> rows);
void write_estimation_table(std::ostream& out, std::span<const EstimationRow> rows);

}  // namespace gscan
