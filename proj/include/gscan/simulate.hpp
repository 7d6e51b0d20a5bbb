#pragma once

// Simulation scenarios: planted arbitrary-shape clusters (A), smooth GMRF
// risk surfaces (B) and both together (C), with Poisson sampling and truth
// bookkeeping.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "gscan/stdata.hpp"
#include "gscan/stgraph.hpp"

namespace gscan {

enum class Scenario { kA, kB, kC };
enum class Subscenario { k1H, k1L, k1H1L, kNone };

Scenario scenario_from_string(std::string_view s);
Subscenario subscenario_from_string(std::string_view s);
std::string_view to_string(Scenario s);
std::string_view to_string(Subscenario s);

struct PlantedCluster {
  Direction direction = Direction::kHigh;
  std::vector<StCell> cells;  // canonical order
};

struct Band {
  double lo = 1.0;
  double hi = 1.0;
};

struct ScenarioSpec {
  Scenario scenario = Scenario::kA;
  Subscenario subscenario = Subscenario::k1H;
  std::vector<PlantedCluster> clusters;
  double beta_high = 0.9162907318741551;   // log 2.5
  double beta_low = -0.916290731874155;    // log 0.4
  Band spatial_band{0.85, 1.15};
  Band temporal_band{0.85, 1.15};
  Band interaction_band{0.95, 1.05};
  std::uint64_t seed = 0;
};

struct SimTruth {
  StDataset dataset;
  std::vector<double> log_risk;             // per cell
  std::vector<int> cluster_id;              // per cell, 0 = none, j = clusters[j-1]
  std::vector<PlantedCluster> clusters;
};

struct ExpectedTargets {
  double min = 0.1;
  double mean = 9.8;
  double median = 2.3;
  double max = 1003.0;
};

// Log-normal draws pushed through a monotone map so that the sample min,
// median and max hit the targets and the mean is matched by bisection.
std::vector<double> synth_expected(std::size_t n_cells, const ExpectedTargets& targets,
                                   std::uint64_t seed);

// y = a x + b with exp(y) spanning exactly [band.lo, band.hi]. Constant
// effects and degenerate bands give zeros.
std::vector<double> rescale_effect(std::span<const double> effect, Band band);

// Built-in geometries. A snake is a thin self-avoiding walk of `length`
// areas; a block is the `size` nearest areas of `center`. Both extend over
// periods [first_period, last_period].
std::vector<StCell> snake_cells(const SpatialGraph& graph, std::size_t length,
                                std::size_t first_period, std::size_t last_period,
                                std::uint64_t seed);
std::vector<StCell> block_cells(const SpatialGraph& graph, std::size_t center, std::size_t size,
                                std::size_t first_period, std::size_t last_period);

struct GeometryOptions {
  std::size_t snake_length = 25;
  std::size_t block_size = 9;
  std::size_t first_period = 0;
  std::size_t last_period = 2;  // clamped to T - 1
};

// Clusters for a subscenario: 1H a high snake, 1L a low snake, 1H1L a high
// snake plus a low block placed as far from it as possible.
std::vector<PlantedCluster> default_geometry(Subscenario sub, const SpatialGraph& graph,
                                             std::size_t n_periods, std::uint64_t seed,
                                             const GeometryOptions& options = {});

std::vector<std::string> period_labels(std::size_t n_periods);

SimTruth gen_scenario(const ScenarioSpec& spec, const SpatialGraph& graph,
                      std::size_t n_periods, std::span<const double> expected);

// Seed of dataset k in a batch.
std::uint64_t batch_seed(std::uint64_t master, std::size_t k);

std::vector<SimTruth> batch(const ScenarioSpec& spec, const SpatialGraph& graph,
                            std::size_t n_periods, std::span<const double> expected,
                            std::size_t n_datasets);

// Truth CSV: area_id,period,log_risk,cluster_id with cluster_id "H<j>" or
// "L<j>" (j 1-based) or empty.
void write_truth_csv(const SimTruth& truth, const std::filesystem::path& path);

struct TruthTable {
  std::vector<double> log_risk;
  std::vector<PlantedCluster> clusters;
};

TruthTable load_truth(const std::filesystem::path& path, const StDataset& layout);

}  // namespace gscan
