#include "gscan/scan.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <set>

#include "gscan/kernels.hpp"
#include "scan_engine.hpp"

namespace gscan {

std::optional<double> log_lrt(double obs_in, double exp_in, double total_obs,
                              double total_exp, Direction direction) {
  if (exp_in >= total_exp) {
    fail(ErrorCode::kWindowCoversAll,
         "window expected count must be below the total");
  }
  double out = 0.0;
  const double zero = 0.0;
  kernels::llr_batch_scalar({&zero, &zero, 1, obs_in, exp_in, total_obs,
                             total_exp, direction == Direction::kHigh},
                            &out);
  if (std::isinf(out)) return std::nullopt;
  return out;
}

Baseline baseline_from_string(std::string_view s) {
  if (s == "conditional") return Baseline::kConditional;
  if (s == "absolute") return Baseline::kAbsolute;
  fail(ErrorCode::kInvalidInput, "baseline must be conditional or absolute");
}

std::string_view to_string(Baseline b) {
  return b == Baseline::kConditional ? "conditional" : "absolute";
}

namespace detail {

Grower::Grower(const SpatialGraph& graph, std::span<const double> expected,
               std::size_t n_periods, std::size_t k, std::size_t t_star)
    : graph_(graph),
      exp_(expected),
      n_(graph.n_areas()),
      n_periods_(n_periods),
      k_(k == 0 ? graph.n_areas() : std::min(k, graph.n_areas())),
      t_star_(t_star),
      slot_of_area_(graph.n_areas(), -1),
      state_(k_ * std::min(n_periods, 2 * t_star + 1), 0) {}

GrowResult Grower::grow(std::span<const double> obs, double total_obs,
                        double total_exp, std::size_t center_index) {
  const std::size_t c_area = center_index % n_;
  const std::size_t c_period = center_index / n_;
  t0_ = c_period > t_star_ ? c_period - t_star_ : 0;
  const std::size_t t1 = std::min(n_periods_ - 1, c_period + t_star_);
  width_ = t1 - t0_ + 1;
  const auto rank = graph_.knn_rank(c_area);
  for (std::size_t s = 0; s < k_; ++s) slot_of_area_[rank[s]] = static_cast<int>(s);

  GrowResult res;
  res.high = !(obs[center_index] < exp_[center_index]);
  members_.clear();
  members_.push_back(static_cast<std::uint32_t>(center_index));
  state_[local(c_area, c_period)] = kMember;
  double o_in = obs[center_index];
  double e_in = exp_[center_index];

  double current = 0.0;
  {
    const double zero = 0.0;
    double v = 0.0;
    kernels::llr_batch({&zero, &zero, 1, o_in, e_in, total_obs, total_exp, res.high}, &v);
    if (std::isfinite(v)) current = v;
  }

  fr_cell_.clear();
  fr_obs_.clear();
  fr_exp_.clear();
  auto push_frontier = [&](std::size_t area, std::size_t period) {
    const int slot = slot_of_area_[area];
    if (slot < 0 || period < t0_ || period > t1) return;
    auto& st = state_[static_cast<std::size_t>(slot) * width_ + (period - t0_)];
    if (st != kFree) return;
    st = kFrontier;
    const std::size_t idx = period * n_ + area;
    fr_cell_.push_back(static_cast<std::uint32_t>(idx));
    fr_obs_.push_back(obs[idx]);
    fr_exp_.push_back(exp_[idx]);
  };
  auto expand = [&](std::size_t idx) {
    const std::size_t a = idx % n_;
    const std::size_t t = idx / n_;
    for (auto nb : graph_.neighbors(a)) push_frontier(nb, t);
    if (t > 0) push_frontier(a, t - 1);
    push_frontier(a, t + 1);
  };
  expand(center_index);

  while (!fr_cell_.empty()) {
    scores_.resize(fr_cell_.size());
    kernels::llr_batch({fr_obs_.data(), fr_exp_.data(), fr_cell_.size(), o_in,
                        e_in, total_obs, total_exp, res.high},
                       scores_.data());
    std::size_t best = fr_cell_.size();
    for (std::size_t j = 0; j < fr_cell_.size(); ++j) {
      if (!(scores_[j] > -std::numeric_limits<double>::infinity())) continue;
      if (best == fr_cell_.size() || scores_[j] > scores_[best] ||
          (scores_[j] == scores_[best] && fr_cell_[j] < fr_cell_[best])) {
        best = j;
      }
    }
    if (best == fr_cell_.size() || !(scores_[best] > current)) break;
    current = scores_[best];
    const std::size_t idx = fr_cell_[best];
    o_in += fr_obs_[best];
    e_in += fr_exp_[best];
    members_.push_back(static_cast<std::uint32_t>(idx));
    state_[local(idx % n_, idx / n_)] = kMember;
    fr_cell_[best] = fr_cell_.back();
    fr_obs_[best] = fr_obs_.back();
    fr_exp_[best] = fr_exp_.back();
    fr_cell_.pop_back();
    fr_obs_.pop_back();
    fr_exp_.pop_back();
    expand(idx);
  }

  res.obs_in = o_in;
  res.exp_in = e_in;
  res.log_lrt = 0.0;
  if (e_in < total_exp) {
    const auto v = log_lrt(o_in, e_in, total_obs, total_exp,
                           res.high ? Direction::kHigh : Direction::kLow);
    if (v) res.log_lrt = *v;
  }

  for (auto idx : members_) state_[local(idx % n_, idx / n_)] = kFree;
  for (auto idx : fr_cell_) state_[local(idx % n_, idx / n_)] = kFree;
  for (std::size_t s = 0; s < k_; ++s) slot_of_area_[rank[s]] = -1;
  return res;
}

}  // namespace detail

namespace {

std::vector<double> as_double(std::span<const std::int64_t> v) {
  return {v.begin(), v.end()};
}

void check_params(const StDataset& data, const SpatialGraph& graph,
                  const ScanParams& params) {
  if (graph.n_areas() != data.n_areas()) {
    fail(ErrorCode::kInvalidInput, "graph and dataset disagree on area count");
  }
  if (params.k > graph.n_areas()) {
    fail(ErrorCode::kInvalidInput, "K exceeds the number of areas");
  }
}

// Expected counts rescaled to sum to the observed total, i.e. the expectation
// under the conditional null that the Monte Carlo replicates sample from.
std::vector<double> null_expected(const StDataset& data, const ScanParams& params) {
  const auto e = data.expected();
  std::vector<double> out(e.begin(), e.end());
  const auto total = static_cast<double>(data.total_observed());
  if (params.baseline == Baseline::kConditional && total > 0.0 && total != data.total_expected()) {
    const double scale = total / data.total_expected();
    for (auto& v : out) v *= scale;
  }
  return out;
}

// Reports carry the raw expected count of the window.
Window to_window(const detail::Grower& g, const detail::GrowResult& r,
                 const StDataset& data) {
  const std::size_t n_areas = data.n_areas();
  Window w;
  w.direction = r.high ? Direction::kHigh : Direction::kLow;
  w.obs_in = static_cast<std::int64_t>(std::llround(r.obs_in));
  w.log_lrt = r.log_lrt;
  for (auto idx : g.members()) {
    w.cells.push_back({idx % n_areas, idx / n_areas});
    w.exp_in += data.expected()[idx];
  }
  return w;
}

}  // namespace

Window grow_window(const StDataset& data, const SpatialGraph& graph,
                   StCell center, const ScanParams& params) {
  check_params(data, graph, params);
  if (!data.contains(center)) fail(ErrorCode::kInvalidInput, "center outside lattice");
  const auto obs = as_double(data.observed());
  const double total = static_cast<double>(data.total_observed());
  const auto expected = null_expected(data, params);
  detail::Grower g(graph, expected, data.n_periods(), params.k, params.t_star);
  const auto r = g.grow(obs, total, total, data.index(center));
  return to_window(g, r, data);
}

std::vector<Window> scan_all(const StDataset& data, const SpatialGraph& graph,
                             const ScanParams& params) {
  check_params(data, graph, params);
  const auto obs = as_double(data.observed());
  const double total = static_cast<double>(data.total_observed());
  const auto expected = null_expected(data, params);
  std::vector<Window> out(data.n_cells());
  const auto n_cells = static_cast<std::ptrdiff_t>(data.n_cells());
#pragma omp parallel
  {
    detail::Grower g(graph, expected, data.n_periods(), params.k, params.t_star);
#pragma omp for schedule(dynamic, 8)
    for (std::ptrdiff_t i = 0; i < n_cells; ++i) {
      const auto r = g.grow(obs, total, total, static_cast<std::size_t>(i));
      out[static_cast<std::size_t>(i)] = to_window(g, r, data);
    }
  }
  return out;
}

std::pair<double, double> scan_max(const StDataset& data,
                                   const SpatialGraph& graph,
                                   const ScanParams& params) {
  check_params(data, graph, params);
  const auto obs = as_double(data.observed());
  const double total = static_cast<double>(data.total_observed());
  const auto expected = null_expected(data, params);
  detail::Grower g(graph, expected, data.n_periods(), params.k, params.t_star);
  double hi = 0.0;
  double lo = 0.0;
  for (std::size_t i = 0; i < data.n_cells(); ++i) {
    const auto r = g.grow(obs, total, total, i);
    (r.high ? hi : lo) = std::max(r.high ? hi : lo, r.log_lrt);
  }
  return {hi, lo};
}

std::vector<std::int64_t> poisson_replicate(const StDataset& data,
                                            std::uint64_t seed, std::uint64_t r,
                                            std::uint64_t stream_tag) {
  std::mt19937_64 rng(derive_seed(derive_seed(seed, stream_tag), r));
  const auto e = data.expected();
  std::vector<std::int64_t> out(e.size());
  for (std::size_t i = 0; i < e.size(); ++i) {
    out[i] = std::poisson_distribution<std::int64_t>(e[i])(rng);
  }
  return out;
}

std::vector<std::int64_t> null_replicate(const StDataset& data,
                                         std::uint64_t seed, std::uint64_t r,
                                         std::uint64_t stream_tag) {
  std::mt19937_64 rng(derive_seed(derive_seed(seed, stream_tag), r));
  const auto e = data.expected();
  std::vector<std::int64_t> out(e.size(), 0);
  std::int64_t remaining = data.total_observed();
  double mass = data.total_expected();
  for (std::size_t i = 0; i < e.size() && remaining > 0; ++i) {
    if (i + 1 == e.size()) {
      out[i] = remaining;
      break;
    }
    const double p = std::clamp(e[i] / mass, 0.0, 1.0);
    std::binomial_distribution<std::int64_t> bin(remaining, p);
    out[i] = bin(rng);
    remaining -= out[i];
    mass -= e[i];
  }
  return out;
}

NullSamples monte_carlo_null(const StDataset& data, const SpatialGraph& graph,
                             const ScanParams& params) {
  check_params(data, graph, params);
  if (params.n_replicates < 1) fail(ErrorCode::kInvalidInput, "need >= 1 replicate");
  const std::size_t m = params.n_replicates;
  NullSamples ns;
  ns.high.assign(m, 0.0);
  ns.low.assign(m, 0.0);
  const auto expected = null_expected(data, params);
  const auto n_rep = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel
  {
    detail::Grower g(graph, expected, data.n_periods(), params.k, params.t_star);
    std::vector<double> obs(data.n_cells());
#pragma omp for schedule(dynamic, 1)
    for (std::ptrdiff_t r = 0; r < n_rep; ++r) {
      const auto rep =
          params.baseline == Baseline::kAbsolute
              ? poisson_replicate(data, params.seed, static_cast<std::uint64_t>(r), stream::kNull)
              : null_replicate(data, params.seed, static_cast<std::uint64_t>(r), stream::kNull);
      std::copy(rep.begin(), rep.end(), obs.begin());
      // Poisson replicates carry their own total; multinomial ones keep O.
      const double total = std::accumulate(obs.begin(), obs.end(), 0.0);
      double hi = 0.0;
      double lo = 0.0;
      for (std::size_t i = 0; i < obs.size(); ++i) {
        const auto res = g.grow(obs, total, total, i);
        if (res.high) {
          hi = std::max(hi, res.log_lrt);
        } else {
          lo = std::max(lo, res.log_lrt);
        }
      }
      ns.high[static_cast<std::size_t>(r)] = hi;
      ns.low[static_cast<std::size_t>(r)] = lo;
    }
  }
  std::sort(ns.high.begin(), ns.high.end());
  std::sort(ns.low.begin(), ns.low.end());
  return ns;
}

double p_value(double value, std::span<const double> sorted_null) {
  if (sorted_null.empty()) fail(ErrorCode::kInvalidInput, "empty null sample");
  const auto first_ge =
      std::lower_bound(sorted_null.begin(), sorted_null.end(), value);
  const auto exceed = static_cast<double>(sorted_null.end() - first_ge);
  return (1.0 + exceed) / (static_cast<double>(sorted_null.size()) + 1.0);
}

bool overlaps(const Window& a, const Window& b) {
  std::vector<StCell> x = a.cells;
  std::vector<StCell> y = b.cells;
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < x.size() && j < y.size()) {
    if (x[i] == y[j]) return true;
    if (x[i] < y[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  return false;
}

ClusterSet significant_clusters(std::vector<Window> windows,
                                const NullSamples& nulls,
                                const ScanParams& params) {
  ClusterSet set;
  set.null_high = nulls.high;
  set.null_low = nulls.low;
  std::vector<Cluster> candidates;
  for (auto& w : windows) {
    if (w.cells.empty()) continue;
    const auto& null = w.direction == Direction::kHigh ? nulls.high : nulls.low;
    const double p = p_value(w.log_lrt, null);
    if (p <= params.alpha) candidates.push_back({std::move(w), p});
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Cluster& a, const Cluster& b) {
                     if (a.window.log_lrt != b.window.log_lrt) {
                       return a.window.log_lrt > b.window.log_lrt;
                     }
                     return a.window.center() < b.window.center();
                   });
  std::set<StCell> taken;
  for (auto& c : candidates) {
    const bool clash = std::any_of(c.window.cells.begin(), c.window.cells.end(),
                                   [&](const StCell& s) { return taken.count(s) > 0; });
    if (clash) continue;
    taken.insert(c.window.cells.begin(), c.window.cells.end());
    set.clusters.push_back(std::move(c));
  }
  return set;
}

ClusterSet detect(const StDataset& data, const SpatialGraph& graph,
                  const ScanParams& params) {
  auto windows = scan_all(data, graph, params);
  const auto nulls = monte_carlo_null(data, graph, params);
  return significant_clusters(std::move(windows), nulls, params);
}

}  // namespace gscan
