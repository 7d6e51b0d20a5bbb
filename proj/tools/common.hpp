#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <string>
#include <vector>

#include "gscan/gmrf.hpp"
#include "gscan/stdata.hpp"
#include "gscan/stgraph.hpp"

namespace gscan::cli {

namespace fs = std::filesystem;
using Json = nlohmann::json;

// Exit statuses.
inline constexpr int kOk = 0;
inline constexpr int kBadInput = 2;
inline constexpr int kNumerical = 3;

struct CommonOptions {
  std::string data;
  std::string layout = "long";
  std::string order;
  std::string graph;
  std::string centroids;
  std::string out = ".";
  std::string geojson;
  std::string geojson_key = "area_id";
  std::uint64_t seed = 0;
  bool seed_given = false;
  int workers = 0;  // 0 = all cores
};

void set_workers(int workers);

// The explicit seed, or a fresh one from the system entropy source.
std::uint64_t resolve_seed(CommonOptions& opts);

StDataset load_data(const fs::path& path, const CommonOptions& opts);

// Graph in the dataset's area order. Missing --graph falls back to
// adjacency.csv / centroids.csv next to the simulation root, when given.
SpatialGraph load_graph(const CommonOptions& opts, const StDataset& data,
                        const fs::path& fallback_dir = {});

// Numbered simulation directories under root/sims (or root itself), ordered
// by number.
std::vector<fs::path> sim_dirs(const fs::path& root);
fs::path sims_root(const fs::path& root);

Interaction parse_interaction(const std::string& s);
std::string interaction_label(Interaction kind);

std::string sha256_file(const fs::path& path);

// Run manifest. Keys are stored sorted, so the JSON layout is stable.
class Manifest {
 public:
  Manifest(std::string command, const CommonOptions& opts);

  Json& parameters() { return doc_["parameters"]; }
  void add_input(const std::string& role, const fs::path& path);
  void add_output(const fs::path& path);
  void set(const std::string& key, Json value) { doc_[key] = std::move(value); }
  void write(const fs::path& dir);

 private:
  Json doc_;
  std::chrono::steady_clock::time_point start_;
};

// Copies a GeoJSON FeatureCollection, calling `decorate` with the properties
// object of every feature whose `key` property names a known area.
void write_geojson(const fs::path& in, const fs::path& out, const std::string& key,
                   const StDataset& data,
                   const std::function<void(std::size_t area, Json& properties)>& decorate);

}  // namespace gscan::cli
