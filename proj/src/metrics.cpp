#include "gscan/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "gscan/csv.hpp"

namespace gscan {

std::vector<PlantedCluster> as_labeled(std::span<const Cluster> clusters) {
  std::vector<PlantedCluster> out;
  for (const auto& c : clusters) {
    PlantedCluster p{c.window.direction, c.window.cells};
    std::sort(p.cells.begin(), p.cells.end());
    out.push_back(std::move(p));
  }
  return out;
}

DetectionReport detection_metrics(std::span<const PlantedCluster> detected,
                                  std::span<const PlantedCluster> truth) {
  std::map<StCell, Direction> truth_cells;
  for (const auto& t : truth) {
    for (const auto& c : t.cells) truth_cells[c] = t.direction;
  }
  DetectionReport rep;
  rep.n_detected = detected.size();
  std::size_t flagged = 0, correct = 0;
  for (const auto& d : detected) {
    std::size_t hits = 0;
    for (const auto& c : d.cells) {
      const auto it = truth_cells.find(c);
      if (it != truth_cells.end() && it->second == d.direction) ++hits;
    }
    flagged += d.cells.size();
    correct += hits;
    if (hits == 0) ++rep.n_spurious;
  }
  if (!truth_cells.empty()) {
    rep.recall = static_cast<double>(correct) / static_cast<double>(truth_cells.size());
    if (flagged > 0) rep.precision = static_cast<double>(correct) / static_cast<double>(flagged);
  }
  return rep;
}

DetectionSummary summarize(std::span<const DetectionReport> reports) {
  DetectionSummary s;
  s.n_simulations = reports.size();
  double rsum = 0.0, psum = 0.0;
  std::size_t rn = 0, pn = 0;
  for (const auto& r : reports) {
    if (r.recall) {
      rsum += *r.recall;
      ++rn;
    }
    if (r.precision) {
      psum += *r.precision;
      ++pn;
    }
    s.mean_detected += static_cast<double>(r.n_detected);
    s.mean_spurious += static_cast<double>(r.n_spurious);
  }
  if (rn > 0) s.recall = rsum / static_cast<double>(rn);
  if (pn > 0) s.precision = psum / static_cast<double>(pn);
  if (!reports.empty()) {
    s.mean_detected /= static_cast<double>(reports.size());
    s.mean_spurious /= static_cast<double>(reports.size());
  }
  return s;
}

CellFilter cell_filter_from_string(std::string_view s) {
  if (s == "all") return CellFilter::kAll;
  if (s == "in-high") return CellFilter::kInHigh;
  if (s == "in-low") return CellFilter::kInLow;
  if (s == "outside") return CellFilter::kOutside;
  fail(ErrorCode::kInvalidInput, "cell filter must be all, in-high, in-low or outside");
}

std::string_view to_string(CellFilter f) {
  switch (f) {
    case CellFilter::kAll: return "all";
    case CellFilter::kInHigh: return "in-high";
    case CellFilter::kInLow: return "in-low";
    case CellFilter::kOutside: return "outside";
  }
  return "?";
}

double interval_score(double lower, double upper, double truth) {
  constexpr double kPenalty = 2.0 / 0.05;
  double s = upper - lower;
  if (truth < lower) s += kPenalty * (lower - truth);
  if (truth > upper) s += kPenalty * (truth - upper);
  return s;
}

namespace {

bool passes(CellFilter f, const std::optional<Direction>& d) {
  switch (f) {
    case CellFilter::kAll: return true;
    case CellFilter::kInHigh: return d && *d == Direction::kHigh;
    case CellFilter::kInLow: return d && *d == Direction::kLow;
    case CellFilter::kOutside: return !d;
  }
  return false;
}

double median_of(std::vector<double>& v) {
  const auto n = v.size();
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(n / 2), v.end());
  const double hi = v[n / 2];
  if (n % 2) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(n / 2));
  return 0.5 * (lo + hi);
}

}  // namespace

EstimationReport estimation_metrics(std::span<const SimEstimate> sims, std::size_t n_areas,
                                    std::size_t n_periods, CellFilter filter,
                                    std::span<const std::optional<Direction>> truth_direction) {
  const std::size_t cells = n_areas * n_periods;
  if (sims.empty()) fail(ErrorCode::kInvalidInput, "estimation metrics need at least one simulation");
  if (truth_direction.size() != cells) fail(ErrorCode::kInvalidInput, "one truth label per cell");
  for (const auto& s : sims) {
    if (s.estimate.size() != cells || s.lower.size() != cells || s.upper.size() != cells ||
        s.truth.size() != cells) {
      fail(ErrorCode::kInvalidInput, "simulation estimates must cover every cell");
    }
  }
  const double L = static_cast<double>(sims.size());

  EstimationReport rep;
  double mab = 0.0, mrmse = 0.0, is = 0.0, length = 0.0, covered = 0.0;
  std::size_t areas_used = 0;
  std::vector<double> scores(sims.size());
  for (std::size_t i = 0; i < n_areas; ++i) {
    double a_mab = 0.0, a_rmse = 0.0, a_is = 0.0;
    std::size_t periods_used = 0;
    for (std::size_t t = 0; t < n_periods; ++t) {
      const std::size_t k = t * n_areas + i;
      if (!passes(filter, truth_direction[k])) continue;
      ++periods_used;
      double bias = 0.0, sq = 0.0;
      for (std::size_t l = 0; l < sims.size(); ++l) {
        const auto& s = sims[l];
        const double err = s.estimate[k] - s.truth[k];
        bias += err;
        sq += err * err;
        scores[l] = interval_score(s.lower[k], s.upper[k], s.truth[k]);
        length += s.upper[k] - s.lower[k];
        covered += (s.truth[k] >= s.lower[k] && s.truth[k] <= s.upper[k]) ? 1.0 : 0.0;
      }
      a_mab += std::fabs(bias / L);
      a_rmse += std::sqrt(sq / L);
      a_is += median_of(scores);
    }
    if (periods_used == 0) continue;
    ++areas_used;
    rep.n_cells += periods_used;
    mab += a_mab / static_cast<double>(periods_used);
    mrmse += a_rmse / static_cast<double>(periods_used);
    is += a_is / static_cast<double>(periods_used);
  }
  if (areas_used == 0) return rep;
  const double na = static_cast<double>(areas_used);
  const double draws = static_cast<double>(rep.n_cells) * L;
  rep.mab = mab / na;
  rep.mrmse = mrmse / na;
  rep.is05 = is / na;
  rep.mean_length = length / draws;
  rep.coverage95 = covered / draws;
  return rep;
}

std::vector<std::optional<Direction>> truth_directions(std::span<const PlantedCluster> truth,
                                                       std::size_t n_areas,
                                                       std::size_t n_periods) {
  std::vector<std::optional<Direction>> out(n_areas * n_periods);
  for (const auto& t : truth) {
    for (const auto& c : t.cells) {
      if (c.area >= n_areas || c.period >= n_periods) {
        fail(ErrorCode::kInvalidInput, "truth cell outside the lattice");
      }
      out[c.period * n_areas + c.area] = t.direction;
    }
  }
  return out;
}

namespace {

std::string opt(const std::optional<double>& v) { return v ? csv::format_double(*v) : "NA"; }

}  // namespace

void write_detection_table(std::ostream& out, std::span<const DetectionRow> rows) {
  out << "scenario,method,recall,precision,n_detected,n_spurious,n_simulations\n";
  for (const auto& r : rows) {
    out << r.scenario << ',' << r.method << ',' << opt(r.summary.recall) << ','
        << opt(r.summary.precision) << ',' << csv::format_double(r.summary.mean_detected) << ','
        << csv::format_double(r.summary.mean_spurious) << ',' << r.summary.n_simulations << '\n';
  }
}

void write_estimation_table(std::ostream& out, std::span<const EstimationRow> rows) {
  out << "scenario,model,cells,mab,mrmse,is05,coverage95,mean_length,n_cells\n";
  for (const auto& r : rows) {
    const auto& e = r.report;
    out << r.scenario << ',' << r.model << ',' << to_string(r.filter) << ','
        << csv::format_double(e.mab) << ',' << csv::format_double(e.mrmse) << ','
        << csv::format_double(e.is05) << ',' << csv::format_double(e.coverage95) << ','
        << csv::format_double(e.mean_length) << ',' << e.n_cells << '\n';
  }
}

}  // namespace gscan
