#pragma once

// Spatial adjacency, centroid-distance neighbour ranking, limiting windows
// and the case-threshold unit merger.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gscan/core.hpp"
#include "gscan/stdata.hpp"

namespace gscan {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

// Undirected graph over areas. Immutable after construction.
class SpatialGraph {
 public:
  SpatialGraph() = default;

  // Edges are symmetrized; duplicates and self-loops are dropped.
  SpatialGraph(std::vector<std::string> area_ids,
               const std::vector<std::pair<std::size_t, std::size_t>>& edges,
               std::vector<Point> centroids);

  std::size_t n_areas() const { return area_ids_.size(); }
  std::span<const std::uint32_t> neighbors(std::size_t area) const {
    return {adj_.data() + adj_offset_[area],
            adj_offset_[area + 1] - adj_offset_[area]};
  }
  std::size_t degree(std::size_t area) const {
    return adj_offset_[area + 1] - adj_offset_[area];
  }
  bool adjacent(std::size_t a, std::size_t b) const;

  const Point& centroid(std::size_t area) const { return centroids_[area]; }

  // All areas by ascending centroid distance from `area` (itself first);
  // ties broken by ascending area index.
  std::span<const std::uint32_t> knn_rank(std::size_t area) const {
    return {knn_.data() + area * n_areas(), n_areas()};
  }

  const std::vector<std::string>& area_ids() const { return area_ids_; }
  std::optional<std::size_t> area_index(const std::string& id) const;

  std::size_t n_components() const { return n_components_; }
  std::size_t component(std::size_t area) const { return component_[area]; }
  bool connected() const { return n_components_ == 1; }

  // Each undirected edge once, as (lower index, higher index).
  std::vector<std::pair<std::size_t, std::size_t>> edges() const;

 private:
  std::vector<std::string> area_ids_;
  std::vector<std::size_t> adj_offset_;
  std::vector<std::uint32_t> adj_;
  std::vector<Point> centroids_;
  std::vector<std::uint32_t> knn_;
  std::vector<std::size_t> component_;
  std::size_t n_components_ = 0;
};

// Adjacency file: CSV `area_id_1,area_id_2`. Centroid file: CSV
// `area_id,x,y` with planar coordinates. Without a centroid file every area
// sits at the origin and neighbour ranking falls back to area index.
//
// When `area_order` is given (normally the dataset's area ids) the graph uses
// that order; otherwise areas are sorted lexicographically.
SpatialGraph build_graph(
    const std::filesystem::path& adjacency_path,
    const std::optional<std::filesystem::path>& centroids_path,
    const std::optional<std::vector<std::string>>& area_order = std::nullopt);

// Rook-adjacent rows x cols grid with unit spacing. Area ids are "r<row>c<col>"
// zero-padded so that lexicographic order equals row-major order.
SpatialGraph grid_graph(std::size_t rows, std::size_t cols);

// A path a0 - a1 - ... with centroids on a line.
SpatialGraph path_graph(std::size_t n);

// The cylinder of the K nearest areas around `center` crossed with the
// period band [t - T*, t + T*] clipped to the study period.
struct LimitingWindow {
  StCell center;
  std::vector<std::uint32_t> areas;  // knn_rank prefix, nearest first
  std::size_t first_period = 0;
  std::size_t last_period = 0;

  bool contains(StCell c) const;
  std::size_t size() const {
    return areas.size() * (last_period - first_period + 1);
  }
  // Allowed cells in canonical order.
  std::vector<StCell> cells() const;
};

LimitingWindow limiting_window(const SpatialGraph& graph, StCell center,
                               std::size_t k, std::size_t t_star,
                               std::size_t n_periods);

// Cells of `limiting` outside `window` that are spatially adjacent to a
// member at the same period or the same area at an adjacent period.
// Result in canonical order.
std::vector<StCell> frontier(std::span<const StCell> window,
                             const LimitingWindow& limiting,
                             const SpatialGraph& graph);

struct Aggregation {
  SpatialGraph graph;
  StDataset dataset;
  std::vector<std::size_t> unit_of_area;  // old area -> new unit
  std::vector<std::string> unit_ids;
  // Units left below the threshold because no same-label neighbour remains.
  std::vector<bool> below_threshold;
};

// Greedy merge: repeatedly take the smallest unit (total observed over all
// periods) below `threshold` and join it with its adjacent same-label unit of
// smallest total. Ties go to the lower index.
Aggregation aggregate_units(const SpatialGraph& graph, const StDataset& data,
                            std::int64_t threshold,
                            std::span<const std::string> region_labels);

// Mapping report: CSV `old_area_id,new_unit_id,below_threshold`.
void write_mapping_report(const Aggregation& agg,
                          std::span<const std::string> old_ids,
                          const std::filesystem::path& path);

// Region labels file: CSV `area_id,label`, returned in graph area order.
std::vector<std::string> load_region_labels(const std::filesystem::path& path,
                                            const SpatialGraph& graph);

}  // namespace gscan
