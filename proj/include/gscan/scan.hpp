#pragma once

// GscanStat: Poisson log-likelihood-ratio scan with greedy growth of
// arbitrarily shaped space-time windows and Monte Carlo calibration.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "gscan/core.hpp"
#include "gscan/stdata.hpp"
#include "gscan/stgraph.hpp"

namespace gscan {

// log lambda for a window with `obs_in` observed and `exp_in` expected cases
// against totals (total_obs, total_exp). Absent when the inside rate is not
// strictly above (High) or below (Low) the outside rate. Throws
// WindowCoversAll when exp_in >= total_exp.
std::optional<double> log_lrt(double obs_in, double exp_in, double total_obs,
                              double total_exp, Direction direction);

// What the expected counts mean, and with it which null the replicates are
// drawn from.
//   kConditional: E is a relative profile. It is rescaled to the observed
//     total before scoring and replicates redistribute that total
//     multinomially in proportion to E.
//   kAbsolute: E is the expected count under no excess risk. Windows are
//     scored with raw E against the observed total, and replicates draw
//     each cell as Poisson(E).
enum class Baseline { kConditional, kAbsolute };

Baseline baseline_from_string(std::string_view s);
std::string_view to_string(Baseline b);

struct ScanParams {
  std::size_t k = 0;       // 0 = all areas
  std::size_t t_star = 0;
  std::size_t n_replicates = 999;
  double alpha = 0.05;
  std::uint64_t seed = 0;
  Baseline baseline = Baseline::kConditional;
};

struct Window {
  std::vector<StCell> cells;  // insertion order; cells[0] is the center
  Direction direction = Direction::kHigh;
  std::int64_t obs_in = 0;
  double exp_in = 0.0;
  double log_lrt = 0.0;

  StCell center() const { return cells.front(); }
};

struct Cluster {
  Window window;
  double p_value = 1.0;
};

struct ClusterSet {
  std::vector<Cluster> clusters;  // descending log_lrt, pairwise cell-disjoint
  std::vector<double> null_high;  // ascending
  std::vector<double> null_low;   // ascending
};

// Greedy growth from `center` inside its limiting window.
Window grow_window(const StDataset& data, const SpatialGraph& graph,
                   StCell center, const ScanParams& params);

// One window per lattice cell, in canonical cell order.
std::vector<Window> scan_all(const StDataset& data, const SpatialGraph& graph,
                             const ScanParams& params);

struct NullSamples {
  std::vector<double> high;
  std::vector<double> low;
};

// Largest High and Low log_lrt over all grown windows (0 when none).
std::pair<double, double> scan_max(const StDataset& data,
                                   const SpatialGraph& graph,
                                   const ScanParams& params);

// Conditional multinomial replicate r of the observed total, cell
// probabilities proportional to expected. Deterministic in (seed, r).
std::vector<std::int64_t> null_replicate(const StDataset& data,
                                         std::uint64_t seed, std::uint64_t r,
                                         std::uint64_t stream_tag);

// Replicate r with every cell drawn independently as Poisson(E).
std::vector<std::int64_t> poisson_replicate(const StDataset& data,
                                            std::uint64_t seed, std::uint64_t r,
                                            std::uint64_t stream_tag);

NullSamples monte_carlo_null(const StDataset& data, const SpatialGraph& graph,
                             const ScanParams& params);

// (1 + #{s >= value}) / (M + 1) for a sorted null sample of size M.
double p_value(double value, std::span<const double> sorted_null);

ClusterSet significant_clusters(std::vector<Window> windows,
                                const NullSamples& nulls,
                                const ScanParams& params);

// scan_all + monte_carlo_null + significant_clusters.
ClusterSet detect(const StDataset& data, const SpatialGraph& graph,
                  const ScanParams& params);

// Whether the cells of two windows intersect.
bool overlaps(const Window& a, const Window& b);

}  // namespace gscan
