#pragma once

// Cylindrical space-time scan (circular spatial base x period interval), the
// SaTScan-style comparison method.

#include <cstdint>
#include <functional>
#include <vector>

#include "gscan/scan.hpp"

namespace gscan {

struct CylinderParams {
  double max_spatial_fraction = 0.5;   // of total expected ("population at risk")
  double max_temporal_fraction = 0.9;  // of the study period
  std::size_t n_replicates = 999;
  double alpha = 0.05;
  std::uint64_t seed = 0;
  bool scan_high = true;
  bool scan_low = true;
};

// A distinct spatial base: sorted area indices.
struct CylinderBase {
  std::vector<std::uint32_t> areas;
};

struct CylinderFamily {
  std::vector<CylinderBase> bases;
  std::size_t max_length = 1;  // longest admissible period interval
};

// Every base is a prefix of some centre's knn_rank whose summed expected mass
// stays within max_spatial_fraction of the total; identical area sets from
// different centres appear once.
CylinderFamily cylinder_family(const StDataset& data, const SpatialGraph& graph,
                               const CylinderParams& params);

// Calls `visit` for every base x interval cylinder, evaluated in both
// directions (absent statistics reported as 0 and skipped by the caller).
struct CylinderScore {
  std::size_t base = 0;
  std::size_t first_period = 0;
  std::size_t last_period = 0;
  double obs_in = 0.0;
  double exp_in = 0.0;  // standardized expected inside
  double high = 0.0;    // log_lrt, 0 when absent
  double low = 0.0;
};

void enumerate_cylinders(const StDataset& data, const CylinderFamily& family,
                         std::span<const std::int64_t> observed,
                         const std::function<void(const CylinderScore&)>& visit);

// Window view of one cylinder; cells in canonical order.
Window cylinder_window(const StDataset& data, const CylinderFamily& family,
                       const CylinderScore& score, Direction direction);

ClusterSet scan_cylindrical(const StDataset& data, const SpatialGraph& graph,
                            const CylinderParams& params);

}  // namespace gscan
