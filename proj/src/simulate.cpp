#include "gscan/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <queue>
#include <random>

#include "gscan/csv.hpp"
#include "gscan/gmrf.hpp"

namespace gscan {

Scenario scenario_from_string(std::string_view s) {
  if (s == "A") return Scenario::kA;
  if (s == "B") return Scenario::kB;
  if (s == "C") return Scenario::kC;
  fail(ErrorCode::kInvalidInput, "scenario must be A, B or C, got '" + std::string(s) + "'");
}

Subscenario subscenario_from_string(std::string_view s) {
  if (s == "1H") return Subscenario::k1H;
  if (s == "1L") return Subscenario::k1L;
  if (s == "1H1L") return Subscenario::k1H1L;
  if (s == "none" || s.empty()) return Subscenario::kNone;
  fail(ErrorCode::kInvalidInput, "subscenario must be 1H, 1L, 1H1L or none");
}

std::string_view to_string(Scenario s) {
  switch (s) {
    case Scenario::kA: return "A";
    case Scenario::kB: return "B";
    case Scenario::kC: return "C";
  }
  return "?";
}

std::string_view to_string(Subscenario s) {
  switch (s) {
    case Subscenario::k1H: return "1H";
    case Subscenario::k1L: return "1L";
    case Subscenario::k1H1L: return "1H1L";
    case Subscenario::kNone: return "none";
  }
  return "?";
}

std::vector<double> synth_expected(std::size_t n_cells, const ExpectedTargets& tg,
                                   std::uint64_t seed) {
  if (!(tg.min > 0.0) || !(tg.min <= tg.median && tg.median <= tg.max) ||
      !(tg.min <= tg.mean && tg.mean <= tg.max)) {
    fail(ErrorCode::kDegenerateInput, "expected-count targets need 0 < min <= median, mean <= max");
  }
  if (tg.min == tg.max) return std::vector<double>(n_cells, tg.min);
  if (n_cells < 3) fail(ErrorCode::kDegenerateInput, "need at least 3 cells for a spread of expected counts");

  std::mt19937_64 rng(derive_seed(seed, stream::kExpected));
  std::normal_distribution<double> norm;
  std::vector<double> z(n_cells);
  for (auto& v : z) v = norm(rng);
  std::vector<double> sorted = z;
  std::sort(sorted.begin(), sorted.end());
  const double zmin = sorted.front(), zmax = sorted.back();
  const double zmed = n_cells % 2 ? sorted[n_cells / 2]
                                  : 0.5 * (sorted[n_cells / 2 - 1] + sorted[n_cells / 2]);
  const double lmin = std::log(tg.min), lmed = std::log(tg.median), lmax = std::log(tg.max);

  // Piecewise map anchored at min / median / max; the upper branch is bent by
  // u^p, which moves the mean monotonically without touching the anchors.
  auto apply = [&](double p, std::vector<double>* out) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n_cells; ++i) {
      double l;
      if (z[i] <= zmed) {
        const double u = zmed > zmin ? (z[i] - zmin) / (zmed - zmin) : 1.0;
        l = lmin + u * (lmed - lmin);
      } else {
        const double u = (z[i] - zmed) / (zmax - zmed);
        l = lmed + std::pow(u, p) * (lmax - lmed);
      }
      const double y = std::clamp(std::exp(l), tg.min, tg.max);
      sum += y;
      if (out) (*out)[i] = y;
    }
    return sum / static_cast<double>(n_cells);
  };

  double lo = std::log(0.01), hi = std::log(100.0);
  const double mean_lo = apply(std::exp(hi), nullptr);  // most concentrated
  const double mean_hi = apply(std::exp(lo), nullptr);
  if (tg.mean < mean_lo || tg.mean > mean_hi) {
    fail(ErrorCode::kDegenerateInput, "target mean is out of reach for the given min/median/max");
  }
  for (int it = 0; it < 200 && hi - lo > 1e-14; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (apply(std::exp(mid), nullptr) > tg.mean) lo = mid; else hi = mid;
  }
  std::vector<double> out(n_cells);
  apply(std::exp(0.5 * (lo + hi)), &out);
  // Exact anchors despite exp/log round trips.
  out[static_cast<std::size_t>(std::min_element(z.begin(), z.end()) - z.begin())] = tg.min;
  out[static_cast<std::size_t>(std::max_element(z.begin(), z.end()) - z.begin())] = tg.max;
  return out;
}

std::vector<double> rescale_effect(std::span<const double> effect, Band band) {
  std::vector<double> out(effect.size(), 0.0);
  if (effect.empty()) return out;
  if (!(band.lo > 0.0) || band.hi < band.lo) {
    fail(ErrorCode::kInvalidInput, "effect band needs 0 < lo <= hi");
  }
  const auto [mn, mx] = std::minmax_element(effect.begin(), effect.end());
  if (band.hi == band.lo || *mx == *mn) return out;
  const double a = (std::log(band.hi) - std::log(band.lo)) / (*mx - *mn);
  const double b = std::log(band.lo) - a * *mn;
  for (std::size_t i = 0; i < effect.size(); ++i) out[i] = a * effect[i] + b;
  // Pin the extremes so exp() lands on the band edges to the last bit of log.
  out[static_cast<std::size_t>(mn - effect.begin())] = std::log(band.lo);
  out[static_cast<std::size_t>(mx - effect.begin())] = std::log(band.hi);
  return out;
}

namespace {

std::vector<StCell> extrude(const std::vector<std::size_t>& areas, std::size_t first,
                            std::size_t last) {
  std::vector<StCell> cells;
  for (std::size_t t = first; t <= last; ++t) {
    for (auto a : areas) cells.push_back({a, t});
  }
  std::sort(cells.begin(), cells.end());
  return cells;
}

}  // namespace

std::vector<StCell> snake_cells(const SpatialGraph& graph, std::size_t length,
                                std::size_t first_period, std::size_t last_period,
                                std::uint64_t seed) {
  const std::size_t n = graph.n_areas();
  if (length == 0 || length > n) fail(ErrorCode::kInvalidInput, "snake length must be in [1, n]");
  if (first_period > last_period) fail(ErrorCode::kInvalidInput, "empty period range");
  std::mt19937_64 rng(seed);
  for (int attempt = 0; attempt < 200; ++attempt) {
    std::vector<char> in(n, 0);
    std::vector<std::size_t> path{static_cast<std::size_t>(rng() % n)};
    in[path[0]] = 1;
    while (path.size() < length) {
      // Prefer steps that touch the body the least, which keeps the snake thin.
      std::vector<std::size_t> best;
      std::size_t best_touch = n + 1;
      for (auto b : graph.neighbors(path.back())) {
        if (in[b]) continue;
        std::size_t touch = 0;
        for (auto c : graph.neighbors(b)) touch += in[c] ? 1 : 0;
        if (touch < best_touch) {
          best_touch = touch;
          best.clear();
        }
        if (touch == best_touch) best.push_back(b);
      }
      if (best.empty()) break;
      const auto next = best[rng() % best.size()];
      in[next] = 1;
      path.push_back(next);
    }
    if (path.size() == length) return extrude(path, first_period, last_period);
  }
  fail(ErrorCode::kDegenerateInput, "could not lay a snake of the requested length");
}

std::vector<StCell> block_cells(const SpatialGraph& graph, std::size_t center, std::size_t size,
                                std::size_t first_period, std::size_t last_period) {
  if (center >= graph.n_areas() || size == 0 || size > graph.n_areas()) {
    fail(ErrorCode::kInvalidInput, "block centre or size out of range");
  }
  if (first_period > last_period) fail(ErrorCode::kInvalidInput, "empty period range");
  const auto rank = graph.knn_rank(center);
  return extrude(std::vector<std::size_t>(rank.begin(), rank.begin() + static_cast<std::ptrdiff_t>(size)),
                 first_period, last_period);
}

std::vector<PlantedCluster> default_geometry(Subscenario sub, const SpatialGraph& graph,
                                             std::size_t n_periods, std::uint64_t seed,
                                             const GeometryOptions& opt) {
  if (sub == Subscenario::kNone) return {};
  const std::size_t last = std::min(opt.last_period, n_periods - 1);
  const auto gseed = derive_seed(seed, stream::kGeometry);
  const auto length = std::min(opt.snake_length, graph.n_areas());
  auto snake = snake_cells(graph, length, opt.first_period, last, gseed);
  if (sub == Subscenario::k1H) return {{Direction::kHigh, std::move(snake)}};
  if (sub == Subscenario::k1L) return {{Direction::kLow, std::move(snake)}};

  // 1H1L: the low block sits at the area with the largest hop distance from
  // the snake, filled with its nearest non-snake areas.
  const std::size_t n = graph.n_areas();
  std::vector<char> in_snake(n, 0);
  for (const auto& c : snake) in_snake[c.area] = 1;
  std::vector<std::size_t> hops(n, n + 1);
  std::queue<std::size_t> q;
  for (std::size_t a = 0; a < n; ++a) {
    if (in_snake[a]) {
      hops[a] = 0;
      q.push(a);
    }
  }
  while (!q.empty()) {
    const auto a = q.front();
    q.pop();
    for (auto b : graph.neighbors(a)) {
      if (hops[b] > hops[a] + 1) {
        hops[b] = hops[a] + 1;
        q.push(b);
      }
    }
  }
  std::size_t center = n;
  for (std::size_t a = 0; a < n; ++a) {
    if (in_snake[a]) continue;
    if (center == n || hops[a] > hops[center]) center = a;
  }
  if (center == n) fail(ErrorCode::kDegenerateInput, "no room for a low-risk block next to the snake");
  std::vector<std::size_t> block;
  for (auto a : graph.knn_rank(center)) {
    if (block.size() == opt.block_size) break;
    if (!in_snake[a]) block.push_back(a);
  }
  return {{Direction::kHigh, std::move(snake)},
          {Direction::kLow, extrude(block, opt.first_period, last)}};
}

std::vector<std::string> period_labels(std::size_t n_periods) {
  std::vector<std::string> p;
  for (std::size_t t = 1; t <= n_periods; ++t) p.push_back(std::to_string(t));
  return p;
}

namespace {

std::vector<std::size_t> component_labels(const SpatialGraph& g) {
  std::vector<std::size_t> c(g.n_areas());
  for (std::size_t a = 0; a < g.n_areas(); ++a) c[a] = g.component(a);
  return c;
}

Eigen::MatrixXd component_sums(const std::vector<std::size_t>& comp, std::size_t n_comp) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_comp),
                                            static_cast<Eigen::Index>(comp.size()));
  for (std::size_t i = 0; i < comp.size(); ++i) a(static_cast<Eigen::Index>(comp[i]), static_cast<Eigen::Index>(i)) = 1.0;
  return a;
}

std::vector<double> to_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

SimTruth gen_scenario(const ScenarioSpec& spec, const SpatialGraph& graph,
                      std::size_t n_periods, std::span<const double> expected) {
  const std::size_t n = graph.n_areas();
  const std::size_t cells = n * n_periods;
  if (n_periods == 0 || expected.size() != cells) {
    fail(ErrorCode::kInvalidInput, "expected counts must cover every area x period cell");
  }

  SimTruth truth;
  if (spec.scenario != Scenario::kB) {
    truth.clusters = spec.clusters.empty()
                         ? default_geometry(spec.subscenario, graph, n_periods, spec.seed)
                         : spec.clusters;
    if (truth.clusters.empty()) {
      fail(ErrorCode::kInvalidInput, "scenarios A and C need at least one planted cluster");
    }
  }
  truth.log_risk.assign(cells, 0.0);
  truth.cluster_id.assign(cells, 0);

  if (spec.scenario != Scenario::kA) {
    if (n < 2 || n_periods < 2) {
      fail(ErrorCode::kDegenerateInput, "smooth risk surfaces need at least 2 areas and 2 periods");
    }
    const auto comp = component_labels(graph);
    const auto icar = icar_precision(graph);
    const auto rw1 = rw1_precision(n_periods);
    const auto eig_s = positive_eigensystem(icar.r);
    const auto eig_t = positive_eigensystem(rw1.r);

    const ConstrainedSampler xi_s(eig_s, 1.0, component_sums(comp, graph.n_components()));
    const ConstrainedSampler gamma_s(eig_t, 1.0, Eigen::MatrixXd::Ones(1, static_cast<Eigen::Index>(n_periods)));
    const ConstrainedSampler delta_s(kronecker_eigensystem(eig_t, eig_s, n_periods, n), 1.0,
                                     interaction_constraints(Interaction::kIV, n, n_periods, comp));
    const auto xi = rescale_effect(to_vector(xi_s.draw(derive_seed(spec.seed, stream::kSpatial))),
                                   spec.spatial_band);
    const auto gamma = rescale_effect(
        to_vector(gamma_s.draw(derive_seed(spec.seed, stream::kTemporal))), spec.temporal_band);
    const auto delta = rescale_effect(
        to_vector(delta_s.draw(derive_seed(spec.seed, stream::kInteraction))),
        spec.interaction_band);
    for (std::size_t t = 0; t < n_periods; ++t) {
      for (std::size_t i = 0; i < n; ++i) {
        truth.log_risk[t * n + i] = xi[i] + gamma[t] + delta[t * n + i];
      }
    }
  }

  for (std::size_t j = 0; j < truth.clusters.size(); ++j) {
    const auto& cl = truth.clusters[j];
    const double beta = cl.direction == Direction::kHigh ? spec.beta_high : spec.beta_low;
    for (const auto& c : cl.cells) {
      if (c.area >= n || c.period >= n_periods) {
        fail(ErrorCode::kInvalidInput, "planted cluster cell outside the lattice");
      }
      auto& id = truth.cluster_id[c.period * n + c.area];
      if (id != 0) fail(ErrorCode::kInvalidInput, "planted clusters overlap");
      id = static_cast<int>(j + 1);
      truth.log_risk[c.period * n + c.area] += beta;
    }
  }

  std::mt19937_64 rng(derive_seed(spec.seed, stream::kPoisson));
  std::vector<std::int64_t> observed(cells);
  for (std::size_t k = 0; k < cells; ++k) {
    std::poisson_distribution<std::int64_t> pois(expected[k] * std::exp(truth.log_risk[k]));
    observed[k] = pois(rng);
  }
  truth.dataset = StDataset(graph.area_ids(), period_labels(n_periods), std::move(observed),
                            std::vector<double>(expected.begin(), expected.end()));
  return truth;
}

std::uint64_t batch_seed(std::uint64_t master, std::size_t k) {
  return derive_seed(derive_seed(master, stream::kBatch), k);
}

std::vector<SimTruth> batch(const ScenarioSpec& spec, const SpatialGraph& graph,
                            std::size_t n_periods, std::span<const double> expected,
                            std::size_t n_datasets) {
  if (n_datasets < 1) fail(ErrorCode::kInvalidInput, "batch needs at least one dataset");
  // One geometry for the whole batch; only the random effects and counts vary.
  ScenarioSpec base = spec;
  if (base.scenario != Scenario::kB && base.clusters.empty()) {
    base.clusters = default_geometry(base.subscenario, graph, n_periods, base.seed);
  }
  std::vector<SimTruth> out(n_datasets);
  const auto m = static_cast<std::ptrdiff_t>(n_datasets);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t k = 0; k < m; ++k) {
    ScenarioSpec s = base;
    s.seed = batch_seed(spec.seed, static_cast<std::size_t>(k));
    out[static_cast<std::size_t>(k)] = gen_scenario(s, graph, n_periods, expected);
  }
  return out;
}

void write_truth_csv(const SimTruth& truth, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
  const auto& d = truth.dataset;
  out << "area_id,period,log_risk,cluster_id\n";
  for (std::size_t t = 0; t < d.n_periods(); ++t) {
    for (std::size_t i = 0; i < d.n_areas(); ++i) {
      const auto k = d.index({i, t});
      out << d.area_ids()[i] << ',' << d.period_labels()[t] << ','
          << csv::format_double(truth.log_risk[k]) << ',';
      if (const int id = truth.cluster_id[k]; id > 0) {
        const auto& cl = truth.clusters[static_cast<std::size_t>(id - 1)];
        out << (cl.direction == Direction::kHigh ? 'H' : 'L') << id;
      }
      out << '\n';
    }
  }
  if (!out) fail(ErrorCode::kIo, "write failed for " + path.string());
}

TruthTable load_truth(const std::filesystem::path& path, const StDataset& layout) {
  const auto table = csv::read(path);
  const auto c_area = table.column("area_id");
  const auto c_period = table.column("period");
  const auto c_risk = table.column("log_risk");
  const auto c_id = table.column("cluster_id");
  std::map<std::string, std::size_t> period_index;
  for (std::size_t t = 0; t < layout.n_periods(); ++t) period_index[layout.period_labels()[t]] = t;

  TruthTable truth;
  truth.log_risk.assign(layout.n_cells(), 0.0);
  std::vector<char> seen(layout.n_cells(), 0);
  std::map<int, PlantedCluster> clusters;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::string ctx = path.string() + ":" + std::to_string(table.line_numbers[r]);
    const auto area = layout.area_index(row[c_area]);
    if (!area) fail(ErrorCode::kUnknownArea, ctx + ": unknown area '" + row[c_area] + "'");
    const auto pit = period_index.find(row[c_period]);
    if (pit == period_index.end()) {
      fail(ErrorCode::kInvalidInput, ctx + ": unknown period '" + row[c_period] + "'");
    }
    const StCell cell{*area, pit->second};
    const auto k = layout.index(cell);
    if (seen[k]) fail(ErrorCode::kDuplicateCell, ctx + ": duplicate cell");
    seen[k] = 1;
    truth.log_risk[k] = csv::parse_double(row[c_risk], ctx);
    const auto& id = row[c_id];
    if (id.empty()) continue;
    if (id.size() < 2 || (id[0] != 'H' && id[0] != 'L')) {
      fail(ErrorCode::kInvalidInput, ctx + ": cluster_id must look like H1 or L2");
    }
    auto& cl = clusters[static_cast<int>(csv::parse_int(id.substr(1), ctx))];
    cl.direction = id[0] == 'H' ? Direction::kHigh : Direction::kLow;
    cl.cells.push_back(cell);
  }
  if (std::find(seen.begin(), seen.end(), 0) != seen.end()) {
    fail(ErrorCode::kMissingCell, path.string() + ": truth does not cover every cell");
  }
  for (auto& [id, cl] : clusters) {
    std::sort(cl.cells.begin(), cl.cells.end());
    truth.clusters.push_back(std::move(cl));
  }
  return truth;
}

}  // namespace gscan
