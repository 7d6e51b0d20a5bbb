#pragma once

// Reusable greedy-growth workspace shared by the observed scan and the Monte
// Carlo replicates. One instance per thread.

#include <cstdint>
#include <span>
#include <vector>

#include "gscan/stgraph.hpp"

namespace gscan::detail {

struct GrowResult {
  bool high = true;
  double obs_in = 0.0;
  double exp_in = 0.0;
  double log_lrt = 0.0;
};

class Grower {
 public:
  Grower(const SpatialGraph& graph, std::span<const double> expected,
         std::size_t n_periods, std::size_t k, std::size_t t_star);

  // Grows from the cell with linear index `center_index`. Members of the
  // resulting window are available through members() until the next call.
  GrowResult grow(std::span<const double> obs, double total_obs,
                  double total_exp, std::size_t center_index);

  const std::vector<std::uint32_t>& members() const { return members_; }

 private:
  static constexpr std::uint8_t kFree = 0;
  static constexpr std::uint8_t kFrontier = 1;
  static constexpr std::uint8_t kMember = 2;

  std::size_t local(std::size_t area, std::size_t period) const {
    return static_cast<std::size_t>(slot_of_area_[area]) * width_ + (period - t0_);
  }

  const SpatialGraph& graph_;
  std::span<const double> exp_;
  std::size_t n_;
  std::size_t n_periods_;
  std::size_t k_;
  std::size_t t_star_;
  std::size_t t0_ = 0;
  std::size_t width_ = 1;
  std::vector<int> slot_of_area_;
  std::vector<std::uint8_t> state_;
  std::vector<std::uint32_t> members_;
  std::vector<std::uint32_t> fr_cell_;
  std::vector<double> fr_obs_;
  std::vector<double> fr_exp_;
  std::vector<double> scores_;
};

}  // namespace gscan::detail
