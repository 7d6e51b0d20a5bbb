#include "gscan/stgraph.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <unordered_map>

#include "gscan/csv.hpp"

namespace gscan {

SpatialGraph::SpatialGraph(
    std::vector<std::string> area_ids,
    const std::vector<std::pair<std::size_t, std::size_t>>& edges,
    std::vector<Point> centroids)
    : area_ids_(std::move(area_ids)), centroids_(std::move(centroids)) {
  const std::size_t n = area_ids_.size();
  if (n == 0) fail(ErrorCode::kInvalidInput, "graph needs at least one area");
  if (centroids_.empty()) centroids_.assign(n, Point{});
  if (centroids_.size() != n) {
    fail(ErrorCode::kInvalidInput, "one centroid per area required");
  }

  std::vector<std::vector<std::uint32_t>> lists(n);
  for (auto [a, b] : edges) {
    if (a >= n || b >= n) fail(ErrorCode::kUnknownArea, "edge index out of range");
    if (a == b) continue;
    lists[a].push_back(static_cast<std::uint32_t>(b));
    lists[b].push_back(static_cast<std::uint32_t>(a));
  }
  adj_offset_.assign(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) {
    auto& l = lists[i];
    std::sort(l.begin(), l.end());
    l.erase(std::unique(l.begin(), l.end()), l.end());
    adj_offset_[i + 1] = adj_offset_[i] + l.size();
  }
  adj_.reserve(adj_offset_[n]);
  for (const auto& l : lists) adj_.insert(adj_.end(), l.begin(), l.end());

  // Neighbour ranking by squared distance; the sort key makes ties resolve by
  // index without relying on sort stability.
  knn_.resize(n * n);
  std::vector<std::pair<double, std::uint32_t>> keyed(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Point c = centroids_[i];
    for (std::size_t j = 0; j < n; ++j) {
      const double dx = centroids_[j].x - c.x;
      const double dy = centroids_[j].y - c.y;
      keyed[j] = {j == i ? -1.0 : dx * dx + dy * dy,
                  static_cast<std::uint32_t>(j)};
    }
    std::sort(keyed.begin(), keyed.end());
    for (std::size_t r = 0; r < n; ++r) knn_[i * n + r] = keyed[r].second;
  }

  component_.assign(n, n);
  std::vector<std::size_t> stack;
  for (std::size_t s = 0; s < n; ++s) {
    if (component_[s] != n) continue;
    component_[s] = n_components_;
    stack.push_back(s);
    while (!stack.empty()) {
      const auto v = stack.back();
      stack.pop_back();
      for (auto w : neighbors(v)) {
        if (component_[w] == n) {
          component_[w] = n_components_;
          stack.push_back(w);
        }
      }
    }
    ++n_components_;
  }
}

bool SpatialGraph::adjacent(std::size_t a, std::size_t b) const {
  const auto nb = neighbors(a);
  return std::binary_search(nb.begin(), nb.end(), static_cast<std::uint32_t>(b));
}

std::optional<std::size_t> SpatialGraph::area_index(const std::string& id) const {
  const auto it = std::find(area_ids_.begin(), area_ids_.end(), id);
  if (it == area_ids_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - area_ids_.begin());
}

std::vector<std::pair<std::size_t, std::size_t>> SpatialGraph::edges() const {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t a = 0; a < n_areas(); ++a) {
    for (auto b : neighbors(a)) {
      if (a < b) out.emplace_back(a, b);
    }
  }
  return out;
}

namespace {

// Reads a headerless-or-headed CSV; the first row is dropped when its first
// field equals `header_first`.
csv::Table read_optional_header(const std::filesystem::path& path,
                                const std::string& header_first) {
  auto table = csv::read(path, false);
  if (!table.rows.empty() && table.rows.front().front() == header_first) {
    table.rows.erase(table.rows.begin());
    table.line_numbers.erase(table.line_numbers.begin());
  }
  return table;
}

}  // namespace

SpatialGraph build_graph(
    const std::filesystem::path& adjacency_path,
    const std::optional<std::filesystem::path>& centroids_path,
    const std::optional<std::vector<std::string>>& area_order) {
  const auto adj = read_optional_header(adjacency_path, "area_id_1");

  std::map<std::string, Point> centroid_of;
  if (centroids_path) {
    const auto tab = read_optional_header(*centroids_path, "area_id");
    for (std::size_t r = 0; r < tab.rows.size(); ++r) {
      const auto& row = tab.rows[r];
      const std::string where =
          centroids_path->string() + ":" + std::to_string(tab.line_numbers[r]);
      if (row.size() < 3) fail(ErrorCode::kInvalidInput, where + ": need area_id,x,y");
      centroid_of[row[0]] = {csv::parse_double(row[1], where),
                             csv::parse_double(row[2], where)};
    }
  }

  std::vector<std::string> ids;
  if (area_order) {
    ids = *area_order;
  } else if (centroids_path) {
    for (const auto& [id, _] : centroid_of) ids.push_back(id);
  } else {
    std::map<std::string, bool> seen;
    for (const auto& row : adj.rows) {
      for (std::size_t k = 0; k < std::min<std::size_t>(2, row.size()); ++k) {
        seen[row[k]] = true;
      }
    }
    for (const auto& [id, _] : seen) ids.push_back(id);
  }
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < ids.size(); ++i) index[ids[i]] = i;
  auto lookup = [&](const std::string& id, const std::string& where) {
    const auto it = index.find(id);
    if (it == index.end()) fail(ErrorCode::kUnknownArea, where + ": unknown area '" + id + "'");
    return it->second;
  };

  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t r = 0; r < adj.rows.size(); ++r) {
    const auto& row = adj.rows[r];
    const std::string where =
        adjacency_path.string() + ":" + std::to_string(adj.line_numbers[r]);
    if (row.size() < 2) fail(ErrorCode::kInvalidInput, where + ": need two area ids");
    edges.emplace_back(lookup(row[0], where), lookup(row[1], where));
  }

  std::vector<Point> centroids;
  if (centroids_path) {
    for (const auto& [id, _] : centroid_of) lookup(id, centroids_path->string());
    centroids.resize(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const auto it = centroid_of.find(ids[i]);
      if (it == centroid_of.end()) {
        fail(ErrorCode::kInvalidInput, "no centroid for area '" + ids[i] + "'");
      }
      centroids[i] = it->second;
    }
  }

  SpatialGraph g(std::move(ids), edges, std::move(centroids));
  if (!g.connected()) {
    warn("spatial graph has " + std::to_string(g.n_components()) +
         " connected components");
  }
  return g;
}

SpatialGraph grid_graph(std::size_t rows, std::size_t cols) {
  const int width_r = static_cast<int>(std::to_string(rows > 0 ? rows - 1 : 0).size());
  const int width_c = static_cast<int>(std::to_string(cols > 0 ? cols - 1 : 0).size());
  std::vector<std::string> ids;
  std::vector<Point> centroids;
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  char buf[64];
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      std::snprintf(buf, sizeof(buf), "r%0*zuc%0*zu", width_r, r, width_c, c);
      ids.emplace_back(buf);
      centroids.push_back({static_cast<double>(c), static_cast<double>(r)});
      const std::size_t i = r * cols + c;
      if (c + 1 < cols) edges.emplace_back(i, i + 1);
      if (r + 1 < rows) edges.emplace_back(i, i + cols);
    }
  }
  return SpatialGraph(std::move(ids), edges, std::move(centroids));
}

SpatialGraph path_graph(std::size_t n) {
  std::vector<std::string> ids;
  std::vector<Point> centroids;
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  const int width = static_cast<int>(std::to_string(n > 0 ? n - 1 : 0).size());
  char buf[32];
  for (std::size_t i = 0; i < n; ++i) {
    std::snprintf(buf, sizeof(buf), "a%0*zu", width, i);
    ids.emplace_back(buf);
    centroids.push_back({static_cast<double>(i), 0.0});
    if (i + 1 < n) edges.emplace_back(i, i + 1);
  }
  return SpatialGraph(std::move(ids), edges, std::move(centroids));
}

bool LimitingWindow::contains(StCell c) const {
  if (c.period < first_period || c.period > last_period) return false;
  return std::find(areas.begin(), areas.end(), c.area) != areas.end();
}

std::vector<StCell> LimitingWindow::cells() const {
  std::vector<std::uint32_t> sorted = areas;
  std::sort(sorted.begin(), sorted.end());
  std::vector<StCell> out;
  out.reserve(size());
  for (std::size_t t = first_period; t <= last_period; ++t) {
    for (auto a : sorted) out.push_back({a, t});
  }
  return out;
}

LimitingWindow limiting_window(const SpatialGraph& graph, StCell center,
                               std::size_t k, std::size_t t_star,
                               std::size_t n_periods) {
  if (k < 1 || k > graph.n_areas()) {
    fail(ErrorCode::kInvalidInput, "K must lie in [1, n_areas]");
  }
  if (center.area >= graph.n_areas() || center.period >= n_periods) {
    fail(ErrorCode::kInvalidInput, "window center outside the lattice");
  }
  LimitingWindow w;
  w.center = center;
  const auto rank = graph.knn_rank(center.area);
  w.areas.assign(rank.begin(), rank.begin() + static_cast<std::ptrdiff_t>(k));
  w.first_period = center.period > t_star ? center.period - t_star : 0;
  w.last_period = std::min(n_periods - 1, center.period + t_star);
  return w;
}

std::vector<StCell> frontier(std::span<const StCell> window,
                             const LimitingWindow& limiting,
                             const SpatialGraph& graph) {
  std::vector<StCell> members(window.begin(), window.end());
  std::sort(members.begin(), members.end());
  auto in_window = [&](StCell c) {
    return std::binary_search(members.begin(), members.end(), c);
  };
  std::vector<StCell> out;
  auto consider = [&](StCell c) {
    if (limiting.contains(c) && !in_window(c)) out.push_back(c);
  };
  for (const auto& m : members) {
    for (auto nb : graph.neighbors(m.area)) consider({nb, m.period});
    if (m.period > 0) consider({m.area, m.period - 1});
    consider({m.area, m.period + 1});
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

Aggregation aggregate_units(const SpatialGraph& graph, const StDataset& data,
                            std::int64_t threshold,
                            std::span<const std::string> region_labels) {
  const std::size_t n = graph.n_areas();
  if (data.n_areas() != n) {
    fail(ErrorCode::kInvalidInput, "graph and dataset disagree on area count");
  }
  if (region_labels.size() != n) {
    fail(ErrorCode::kInvalidInput, "one region label per area required");
  }
  if (threshold < 1) fail(ErrorCode::kInvalidInput, "threshold must be >= 1");

  // Unit u is identified by its smallest member index; `owner` maps each area
  // to the representative of its current unit.
  std::vector<std::size_t> owner(n);
  std::iota(owner.begin(), owner.end(), 0);
  std::vector<std::int64_t> total(n, 0);
  for (std::size_t t = 0; t < data.n_periods(); ++t) {
    for (std::size_t i = 0; i < n; ++i) total[i] += data.observed({i, t});
  }
  std::vector<std::vector<std::size_t>> members(n);
  for (std::size_t i = 0; i < n; ++i) members[i] = {i};
  std::vector<bool> alive(n, true);
  std::vector<bool> stuck(n, false);

  auto unit_neighbors = [&](std::size_t u) {
    std::vector<std::size_t> out;
    for (auto m : members[u]) {
      for (auto nb : graph.neighbors(m)) {
        const auto v = owner[nb];
        if (v != u && region_labels[v] == region_labels[u]) out.push_back(v);
      }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  };

  while (true) {
    std::size_t pick = n;
    for (std::size_t u = 0; u < n; ++u) {
      if (!alive[u] || stuck[u] || total[u] >= threshold) continue;
      if (pick == n || total[u] < total[pick]) pick = u;
    }
    if (pick == n) break;
    const auto nbs = unit_neighbors(pick);
    if (nbs.empty()) {
      stuck[pick] = true;
      continue;
    }
    std::size_t partner = nbs.front();
    for (auto v : nbs) {
      if (total[v] < total[partner]) partner = v;
    }
    const std::size_t keep = std::min(pick, partner);
    const std::size_t drop = std::max(pick, partner);
    for (auto m : members[drop]) owner[m] = keep;
    members[keep].insert(members[keep].end(), members[drop].begin(),
                         members[drop].end());
    std::sort(members[keep].begin(), members[keep].end());
    members[drop].clear();
    total[keep] += total[drop];
    alive[drop] = false;
    // Merging can give a previously isolated unit a same-label neighbour.
    std::fill(stuck.begin(), stuck.end(), false);
  }

  Aggregation agg;
  std::vector<std::size_t> unit_index(n, n);
  std::size_t n_units = 0;
  for (std::size_t u = 0; u < n; ++u) {
    if (alive[u]) unit_index[u] = n_units++;
  }
  agg.unit_of_area.resize(n);
  for (std::size_t i = 0; i < n; ++i) agg.unit_of_area[i] = unit_index[owner[i]];

  std::vector<Point> centroids(n_units);
  agg.unit_ids.resize(n_units);
  agg.below_threshold.assign(n_units, false);
  for (std::size_t u = 0; u < n; ++u) {
    if (!alive[u]) continue;
    const auto k = unit_index[u];
    std::string id;
    double wsum = 0.0;
    Point c{};
    for (auto m : members[u]) {
      if (!id.empty()) id += '+';
      id += graph.area_ids()[m];
      double w = 0.0;
      for (std::size_t t = 0; t < data.n_periods(); ++t) {
        w += static_cast<double>(data.observed({m, t}));
      }
      c.x += w * graph.centroid(m).x;
      c.y += w * graph.centroid(m).y;
      wsum += w;
    }
    if (wsum > 0.0) {
      c.x /= wsum;
      c.y /= wsum;
    } else {
      for (auto m : members[u]) {
        c.x += graph.centroid(m).x / static_cast<double>(members[u].size());
        c.y += graph.centroid(m).y / static_cast<double>(members[u].size());
      }
    }
    centroids[k] = c;
    agg.unit_ids[k] = id;
    agg.below_threshold[k] = total[u] < threshold;
  }

  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (auto [a, b] : graph.edges()) {
    const auto ua = agg.unit_of_area[a];
    const auto ub = agg.unit_of_area[b];
    if (ua != ub) edges.emplace_back(ua, ub);
  }

  const std::size_t T = data.n_periods();
  std::vector<std::int64_t> obs(n_units * T, 0);
  std::vector<double> exp(n_units * T, 0.0);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto u = agg.unit_of_area[i];
      obs[t * n_units + u] += data.observed({i, t});
      exp[t * n_units + u] += data.expected({i, t});
    }
  }
  agg.graph = SpatialGraph(agg.unit_ids, edges, std::move(centroids));
  agg.dataset = StDataset(agg.unit_ids, data.period_labels(), std::move(obs),
                          std::move(exp));
  return agg;
}

void write_mapping_report(const Aggregation& agg,
                          std::span<const std::string> old_ids,
                          const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
  out << "old_area_id,new_unit_id,below_threshold\n";
  for (std::size_t i = 0; i < old_ids.size(); ++i) {
    const auto u = agg.unit_of_area[i];
    out << old_ids[i] << ',' << agg.unit_ids[u] << ','
        << (agg.below_threshold[u] ? 1 : 0) << '\n';
  }
}

std::vector<std::string> load_region_labels(const std::filesystem::path& path,
                                            const SpatialGraph& graph) {
  const auto tab = read_optional_header(path, "area_id");
  std::vector<std::string> labels(graph.n_areas());
  std::vector<bool> seen(graph.n_areas(), false);
  for (std::size_t r = 0; r < tab.rows.size(); ++r) {
    const auto& row = tab.rows[r];
    const std::string where = path.string() + ":" + std::to_string(tab.line_numbers[r]);
    if (row.size() < 2) fail(ErrorCode::kInvalidInput, where + ": need area_id,label");
    const auto idx = graph.area_index(row[0]);
    if (!idx) fail(ErrorCode::kUnknownArea, where + ": unknown area '" + row[0] + "'");
    labels[*idx] = row[1];
    seen[*idx] = true;
  }
  for (std::size_t i = 0; i < seen.size(); ++i) {
    if (!seen[i]) {
      fail(ErrorCode::kInvalidInput, "no region label for area '" + graph.area_ids()[i] + "'");
    }
  }
  return labels;
}

}  // namespace gscan
