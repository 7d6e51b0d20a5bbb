#pragma once

// Observed and expected case counts on an (area x period) lattice.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gscan/core.hpp"

namespace gscan {

// Immutable after construction. Cells are linearized period-major:
// index = period * n_areas + area.
class StDataset {
 public:
  StDataset() = default;

  // Validates dimensions, observed >= 0 and expected > 0.
  StDataset(std::vector<std::string> area_ids,
            std::vector<std::string> period_labels,
            std::vector<std::int64_t> observed, std::vector<double> expected);

  std::size_t n_areas() const { return area_ids_.size(); }
  std::size_t n_periods() const { return period_labels_.size(); }
  std::size_t n_cells() const { return observed_.size(); }

  std::size_t index(StCell c) const { return c.period * n_areas() + c.area; }
  StCell cell(std::size_t index) const {
    return {index % n_areas(), index / n_areas()};
  }
  bool contains(StCell c) const {
    return c.area < n_areas() && c.period < n_periods();
  }

  std::int64_t observed(StCell c) const { return observed_[index(c)]; }
  double expected(StCell c) const { return expected_[index(c)]; }
  std::span<const std::int64_t> observed() const { return observed_; }
  std::span<const double> expected() const { return expected_; }

  std::int64_t total_observed() const { return total_observed_; }
  double total_expected() const { return total_expected_; }

  const std::vector<std::string>& area_ids() const { return area_ids_; }
  const std::vector<std::string>& period_labels() const {
    return period_labels_;
  }
  std::optional<std::size_t> area_index(const std::string& id) const;

  // Same lattice and expected counts with different observed counts.
  StDataset with_observed(std::vector<std::int64_t> observed) const;

 private:
  std::vector<std::string> area_ids_;
  std::vector<std::string> period_labels_;
  std::vector<std::int64_t> observed_;
  std::vector<double> expected_;
  std::int64_t total_observed_ = 0;
  double total_expected_ = 0.0;
};

enum class CsvLayout { kLong, kWide };

// Long layout: header `area_id,period,observed,expected`, one row per cell.
// Wide layout: one row per area, header
// `area_id,observed.<p1>,...,observed.<pT>,expected.<p1>,...,expected.<pT>`.
//
// Areas are sorted lexicographically unless `order_path` lists one area_id
// per line. Periods are sorted numerically when every label is an integer,
// lexicographically otherwise.
StDataset load_dataset(const std::filesystem::path& counts_path,
                       CsvLayout layout = CsvLayout::kLong,
                       const std::optional<std::filesystem::path>& order_path =
                           std::nullopt);

void write_long_csv(const StDataset& data, std::ostream& out);
void write_long_csv(const StDataset& data, const std::filesystem::path& path);

// E = pop * (sum O / sum pop), cell-wise.
std::vector<double> expected_crude(std::span<const double> population,
                                   std::span<const std::int64_t> observed);

// Per-cell cases and population of one stratum (age/sex group).
struct Stratum {
  std::vector<double> cases;
  std::vector<double> population;
};

// E = sum_s r_s * pop_s with r_s the stratum's global rate.
std::vector<double> expected_stratified(std::span<const Stratum> strata);

}  // namespace gscan
