#include "gscan/cylinder.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace gscan {

CylinderFamily cylinder_family(const StDataset& data, const SpatialGraph& graph,
                               const CylinderParams& params) {
  if (graph.n_areas() != data.n_areas()) {
    fail(ErrorCode::kInvalidInput, "graph and dataset disagree on area count");
  }
  if (!(params.max_spatial_fraction > 0.0 && params.max_spatial_fraction <= 1.0) ||
      !(params.max_temporal_fraction > 0.0 && params.max_temporal_fraction <= 1.0)) {
    fail(ErrorCode::kInvalidInput, "cylinder size fractions must lie in (0, 1]");
  }
  const std::size_t n = data.n_areas();
  std::vector<double> area_mass(n, 0.0);
  for (std::size_t t = 0; t < data.n_periods(); ++t) {
    for (std::size_t i = 0; i < n; ++i) area_mass[i] += data.expected({i, t});
  }
  // Relative slack so that a cap of exactly 100% admits the whole map.
  const double cap = params.max_spatial_fraction * data.total_expected() * (1.0 + 1e-12);

  CylinderFamily fam;
  std::set<std::vector<std::uint32_t>> seen;
  for (std::size_t c = 0; c < n; ++c) {
    const auto rank = graph.knn_rank(c);
    std::vector<std::uint32_t> base;
    double mass = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      mass += area_mass[rank[k]];
      if (mass > cap) break;
      base.insert(std::upper_bound(base.begin(), base.end(), rank[k]), rank[k]);
      if (seen.insert(base).second) fam.bases.push_back({base});
    }
  }
  const auto len = static_cast<std::size_t>(
      std::floor(params.max_temporal_fraction * static_cast<double>(data.n_periods()) + 1e-9));
  fam.max_length = std::clamp<std::size_t>(len, 1, data.n_periods());
  return fam;
}

void enumerate_cylinders(const StDataset& data, const CylinderFamily& family,
                         std::span<const std::int64_t> observed,
                         const std::function<void(const CylinderScore&)>& visit) {
  const std::size_t T = data.n_periods();
  const std::size_t n = data.n_areas();
  double total_obs = 0.0;
  for (auto o : observed) total_obs += static_cast<double>(o);
  // Standardize expected so that it sums to the observed total.
  const double scale = total_obs / data.total_expected();
  std::vector<double> po(T + 1), pe(T + 1);
  for (std::size_t b = 0; b < family.bases.size(); ++b) {
    const auto& areas = family.bases[b].areas;
    po[0] = pe[0] = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      double o = 0.0, e = 0.0;
      for (auto a : areas) {
        o += static_cast<double>(observed[t * n + a]);
        e += data.expected({a, t});
      }
      po[t + 1] = po[t] + o;
      pe[t + 1] = pe[t] + e * scale;
    }
    for (std::size_t t1 = 0; t1 < T; ++t1) {
      for (std::size_t t2 = t1; t2 < T && t2 - t1 + 1 <= family.max_length; ++t2) {
        CylinderScore s;
        s.base = b;
        s.first_period = t1;
        s.last_period = t2;
        s.obs_in = po[t2 + 1] - po[t1];
        s.exp_in = pe[t2 + 1] - pe[t1];
        if (!(s.exp_in < total_obs)) continue;
        if (const auto v = log_lrt(s.obs_in, s.exp_in, total_obs, total_obs, Direction::kHigh)) {
          s.high = *v;
        }
        if (const auto v = log_lrt(s.obs_in, s.exp_in, total_obs, total_obs, Direction::kLow)) {
          s.low = *v;
        }
        visit(s);
      }
    }
  }
}

Window cylinder_window(const StDataset& data, const CylinderFamily& family,
                       const CylinderScore& score, Direction direction) {
  Window w;
  w.direction = direction;
  w.log_lrt = direction == Direction::kHigh ? score.high : score.low;
  for (std::size_t t = score.first_period; t <= score.last_period; ++t) {
    for (auto a : family.bases[score.base].areas) {
      w.cells.push_back({a, t});
      w.obs_in += data.observed({a, t});
      w.exp_in += data.expected({a, t});
    }
  }
  return w;
}

ClusterSet scan_cylindrical(const StDataset& data, const SpatialGraph& graph,
                            const CylinderParams& params) {
  if (params.n_replicates < 1) fail(ErrorCode::kInvalidInput, "need >= 1 replicate");
  const auto family = cylinder_family(data, graph, params);

  struct Candidate {
    CylinderScore score;
    Direction direction;
    double value;
  };
  std::vector<Candidate> observed;
  enumerate_cylinders(data, family, data.observed(), [&](const CylinderScore& s) {
    if (params.scan_high && s.high > 0.0) observed.push_back({s, Direction::kHigh, s.high});
    if (params.scan_low && s.low > 0.0) observed.push_back({s, Direction::kLow, s.low});
  });

  const std::size_t m = params.n_replicates;
  ClusterSet set;
  set.null_high.assign(m, 0.0);
  set.null_low.assign(m, 0.0);
  const auto n_rep = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t r = 0; r < n_rep; ++r) {
    const auto rep = null_replicate(data, params.seed, static_cast<std::uint64_t>(r),
                                    stream::kCylinderNull);
    double hi = 0.0, lo = 0.0;
    enumerate_cylinders(data, family, rep, [&](const CylinderScore& s) {
      hi = std::max(hi, s.high);
      lo = std::max(lo, s.low);
    });
    set.null_high[static_cast<std::size_t>(r)] = hi;
    set.null_low[static_cast<std::size_t>(r)] = lo;
  }
  std::sort(set.null_high.begin(), set.null_high.end());
  std::sort(set.null_low.begin(), set.null_low.end());

  std::vector<std::pair<Candidate, double>> significant;
  for (const auto& c : observed) {
    const double p = p_value(c.value, c.direction == Direction::kHigh ? set.null_high
                                                                     : set.null_low);
    if (p <= params.alpha) significant.emplace_back(c, p);
  }
  std::stable_sort(significant.begin(), significant.end(), [](const auto& a, const auto& b) {
    return a.first.value > b.first.value;
  });
  std::vector<bool> taken(data.n_cells(), false);
  for (const auto& [c, p] : significant) {
    auto w = cylinder_window(data, family, c.score, c.direction);
    const bool clash = std::any_of(w.cells.begin(), w.cells.end(),
                                   [&](const StCell& s) { return taken[data.index(s)]; });
    if (clash) continue;
    for (const auto& s : w.cells) taken[data.index(s)] = true;
    set.clusters.push_back({std::move(w), p});
  }
  return set;
}

}  // namespace gscan
