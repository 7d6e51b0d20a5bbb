#include "gscan/stdata.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <ostream>
#include <unordered_map>

#include "gscan/csv.hpp"

namespace gscan {

StDataset::StDataset(std::vector<std::string> area_ids,
                     std::vector<std::string> period_labels,
                     std::vector<std::int64_t> observed,
                     std::vector<double> expected)
    : area_ids_(std::move(area_ids)),
      period_labels_(std::move(period_labels)),
      observed_(std::move(observed)),
      expected_(std::move(expected)) {
  const std::size_t n = area_ids_.size() * period_labels_.size();
  if (area_ids_.empty() || period_labels_.empty()) {
    fail(ErrorCode::kInvalidInput, "dataset needs at least one area and period");
  }
  if (observed_.size() != n || expected_.size() != n) {
    fail(ErrorCode::kInvalidInput,
         "observed/expected size does not match n_areas x n_periods");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (observed_[i] < 0) {
      fail(ErrorCode::kInvalidInput,
           "negative observed count at area " + area_ids_[i % n_areas()]);
    }
    if (!(expected_[i] > 0.0) || !std::isfinite(expected_[i])) {
      fail(ErrorCode::kNonPositiveExpected,
           "expected count must be positive at area " +
               area_ids_[i % n_areas()] + ", period " +
               period_labels_[i / n_areas()]);
    }
  }
  total_observed_ = std::accumulate(observed_.begin(), observed_.end(),
                                    std::int64_t{0});
  total_expected_ = std::accumulate(expected_.begin(), expected_.end(), 0.0);
}

std::optional<std::size_t> StDataset::area_index(const std::string& id) const {
  const auto it = std::find(area_ids_.begin(), area_ids_.end(), id);
  if (it == area_ids_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - area_ids_.begin());
}

StDataset StDataset::with_observed(std::vector<std::int64_t> observed) const {
  return StDataset(area_ids_, period_labels_, std::move(observed), expected_);
}

namespace {

bool all_integers(const std::vector<std::string>& labels) {
  return std::all_of(labels.begin(), labels.end(), [](const std::string& s) {
    if (s.empty()) return false;
    std::size_t i = (s[0] == '-' || s[0] == '+') ? 1 : 0;
    if (i == s.size()) return false;
    for (; i < s.size(); ++i) {
      if (s[i] < '0' || s[i] > '9') return false;
    }
    return true;
  });
}

void sort_periods(std::vector<std::string>& labels) {
  if (all_integers(labels)) {
    std::sort(labels.begin(), labels.end(),
              [](const std::string& a, const std::string& b) {
                return std::stoll(a) < std::stoll(b);
              });
  } else {
    std::sort(labels.begin(), labels.end());
  }
}

std::vector<std::string> read_order(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path.string());
  std::vector<std::string> ids;
  std::string line;
  while (std::getline(in, line)) {
    auto f = csv::split_line(line);
    if (f.empty() || f[0].empty()) continue;
    ids.push_back(f[0]);
  }
  return ids;
}

struct CellRecord {
  std::int64_t observed;
  double expected;
};

StDataset assemble(
    const std::map<std::pair<std::string, std::string>, CellRecord>& cells,
    std::vector<std::string> areas, std::vector<std::string> periods,
    const std::optional<std::filesystem::path>& order_path) {
  if (order_path) {
    auto order = read_order(*order_path);
    std::vector<std::string> sorted_order = order;
    std::sort(sorted_order.begin(), sorted_order.end());
    if (std::adjacent_find(sorted_order.begin(), sorted_order.end()) !=
        sorted_order.end()) {
      fail(ErrorCode::kInvalidInput, "duplicate area in order file");
    }
    std::vector<std::string> sorted_areas = areas;
    std::sort(sorted_areas.begin(), sorted_areas.end());
    if (sorted_order != sorted_areas) {
      fail(ErrorCode::kInvalidInput,
           "order file does not list exactly the dataset's areas");
    }
    areas = std::move(order);
  } else {
    std::sort(areas.begin(), areas.end());
  }
  sort_periods(periods);

  const std::size_t n = areas.size();
  std::vector<std::int64_t> observed(n * periods.size());
  std::vector<double> expected(n * periods.size());
  for (std::size_t t = 0; t < periods.size(); ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto it = cells.find({areas[i], periods[t]});
      if (it == cells.end()) {
        fail(ErrorCode::kMissingCell,
             "no row for area " + areas[i] + ", period " + periods[t]);
      }
      observed[t * n + i] = it->second.observed;
      expected[t * n + i] = it->second.expected;
    }
  }
  return StDataset(std::move(areas), std::move(periods), std::move(observed),
                   std::move(expected));
}

void check_record(const CellRecord& rec, const std::string& where) {
  if (rec.observed < 0) {
    fail(ErrorCode::kInvalidInput, where + ": negative observed count");
  }
  if (!(rec.expected > 0.0)) {
    fail(ErrorCode::kNonPositiveExpected, where + ": expected must be > 0");
  }
}

}  // namespace

StDataset load_dataset(const std::filesystem::path& counts_path,
                       CsvLayout layout,
                       const std::optional<std::filesystem::path>& order_path) {
  const auto table = csv::read(counts_path);
  std::map<std::pair<std::string, std::string>, CellRecord> cells;
  std::vector<std::string> areas;
  std::vector<std::string> periods;
  std::unordered_map<std::string, bool> seen_area;
  std::unordered_map<std::string, bool> seen_period;

  auto note = [&](const std::string& a, const std::string& p) {
    if (!seen_area.count(a)) {
      seen_area[a] = true;
      areas.push_back(a);
    }
    if (!seen_period.count(p)) {
      seen_period[p] = true;
      periods.push_back(p);
    }
  };

  if (layout == CsvLayout::kLong) {
    const auto ca = table.column("area_id");
    const auto cp = table.column("period");
    const auto co = table.column("observed");
    const auto ce = table.column("expected");
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
      const auto& row = table.rows[r];
      const std::string where =
          counts_path.string() + ":" + std::to_string(table.line_numbers[r]);
      CellRecord rec{csv::parse_int(row[co], where),
                     csv::parse_double(row[ce], where)};
      check_record(rec, where);
      if (!cells.emplace(std::make_pair(row[ca], row[cp]), rec).second) {
        fail(ErrorCode::kDuplicateCell,
             where + ": repeated cell (" + row[ca] + ", " + row[cp] + ")");
      }
      note(row[ca], row[cp]);
    }
  } else {
    const auto ca = table.column("area_id");
    std::vector<std::pair<std::string, std::size_t>> obs_cols;
    std::map<std::string, std::size_t> exp_cols;
    for (std::size_t c = 0; c < table.header.size(); ++c) {
      const auto& h = table.header[c];
      if (h.rfind("observed.", 0) == 0) obs_cols.emplace_back(h.substr(9), c);
      if (h.rfind("expected.", 0) == 0) exp_cols[h.substr(9)] = c;
    }
    if (obs_cols.empty()) {
      fail(ErrorCode::kInvalidInput, "wide layout needs observed.<period> columns");
    }
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
      const auto& row = table.rows[r];
      const std::string where =
          counts_path.string() + ":" + std::to_string(table.line_numbers[r]);
      for (const auto& [period, c] : obs_cols) {
        const auto e = exp_cols.find(period);
        if (e == exp_cols.end()) {
          fail(ErrorCode::kMissingCell,
               "no expected." + period + " column for observed." + period);
        }
        CellRecord rec{csv::parse_int(row[c], where),
                       csv::parse_double(row[e->second], where)};
        check_record(rec, where);
        if (!cells.emplace(std::make_pair(row[ca], period), rec).second) {
          fail(ErrorCode::kDuplicateCell, where + ": repeated area " + row[ca]);
        }
        note(row[ca], period);
      }
    }
  }
  if (cells.empty()) fail(ErrorCode::kInvalidInput, "no data rows");
  return assemble(cells, std::move(areas), std::move(periods), order_path);
}

void write_long_csv(const StDataset& data, std::ostream& out) {
  out << "area_id,period,observed,expected\n";
  for (std::size_t t = 0; t < data.n_periods(); ++t) {
    for (std::size_t i = 0; i < data.n_areas(); ++i) {
      const StCell c{i, t};
      out << data.area_ids()[i] << ',' << data.period_labels()[t] << ','
          << data.observed(c) << ',' << csv::format_double(data.expected(c))
          << '\n';
    }
  }
}

void write_long_csv(const StDataset& data, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
  write_long_csv(data, out);
}

std::vector<double> expected_crude(std::span<const double> population,
                                   std::span<const std::int64_t> observed) {
  if (population.size() != observed.size()) {
    fail(ErrorCode::kInvalidInput, "population/observed size mismatch");
  }
  double total_pop = 0.0;
  for (double p : population) {
    if (!(p > 0.0)) fail(ErrorCode::kInvalidInput, "population must be > 0");
    total_pop += p;
  }
  if (!(total_pop > 0.0)) fail(ErrorCode::kDegenerateInput, "zero population");
  const double total_obs = static_cast<double>(
      std::accumulate(observed.begin(), observed.end(), std::int64_t{0}));
  const double rate = total_obs / total_pop;
  std::vector<double> out(population.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = population[i] * rate;
  return out;
}

std::vector<double> expected_stratified(std::span<const Stratum> strata) {
  if (strata.empty()) fail(ErrorCode::kInvalidInput, "no strata");
  const std::size_t n = strata.front().population.size();
  std::vector<double> out(n, 0.0);
  for (const auto& s : strata) {
    if (s.population.size() != n || s.cases.size() != n) {
      fail(ErrorCode::kInvalidInput, "stratum size mismatch");
    }
    const double pop = std::accumulate(s.population.begin(), s.population.end(), 0.0);
    if (!(pop > 0.0)) {
      fail(ErrorCode::kDegenerateInput, "stratum with zero global population");
    }
    const double rate = std::accumulate(s.cases.begin(), s.cases.end(), 0.0) / pop;
    for (std::size_t i = 0; i < n; ++i) out[i] += rate * s.population[i];
  }
  return out;
}

}  // namespace gscan
