#include "common.hpp"

#include <omp.h>
#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <fstream>
#include <gsl/gsl_version.h>
#include <random>

#include "gscan/core.hpp"
#include "gscan/report.hpp"

#ifndef GSCAN_VERSION
#define GSCAN_VERSION "dev"
#endif

namespace gscan::cli {

void set_workers(int workers) {
  if (workers < 0) fail(ErrorCode::kInvalidInput, "--workers must be >= 0");
  omp_set_num_threads(workers > 0 ? workers : omp_get_num_procs());
}

std::uint64_t resolve_seed(CommonOptions& opts) {
  if (!opts.seed_given) {
    std::random_device rd;
    opts.seed = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
  }
  return opts.seed;
}

StDataset load_data(const fs::path& path, const CommonOptions& opts) {
  CsvLayout layout;
  if (opts.layout == "long") {
    layout = CsvLayout::kLong;
  } else if (opts.layout == "wide") {
    layout = CsvLayout::kWide;
  } else {
    fail(ErrorCode::kInvalidInput, "--layout must be long or wide");
  }
  std::optional<fs::path> order;
  if (!opts.order.empty()) order = opts.order;
  return load_dataset(path, layout, order);
}

SpatialGraph load_graph(const CommonOptions& opts, const StDataset& data,
                        const fs::path& fallback_dir) {
  fs::path adjacency = opts.graph;
  fs::path centroids = opts.centroids;
  if (adjacency.empty() && !fallback_dir.empty()) {
    adjacency = fallback_dir / "adjacency.csv";
    if (centroids.empty() && fs::exists(fallback_dir / "centroids.csv")) {
      centroids = fallback_dir / "centroids.csv";
    }
  }
  if (adjacency.empty()) fail(ErrorCode::kInvalidInput, "--graph is required");
  std::optional<fs::path> c;
  if (!centroids.empty()) c = centroids;
  return build_graph(adjacency, c, data.area_ids());
}

fs::path sims_root(const fs::path& root) {
  return fs::is_directory(root / "sims") ? root / "sims" : root;
}

std::vector<fs::path> sim_dirs(const fs::path& root) {
  const auto base = sims_root(root);
  if (!fs::is_directory(base)) fail(ErrorCode::kIo, "no simulation directory at " + root.string());
  std::vector<std::pair<long long, fs::path>> found;
  for (const auto& e : fs::directory_iterator(base)) {
    if (!e.is_directory()) continue;
    const auto name = e.path().filename().string();
    if (name.empty() || !std::all_of(name.begin(), name.end(), ::isdigit)) continue;
    found.emplace_back(std::stoll(name), e.path());
  }
  std::sort(found.begin(), found.end());
  std::vector<fs::path> out;
  for (auto& [k, p] : found) out.push_back(std::move(p));
  if (out.empty()) fail(ErrorCode::kIo, "no numbered simulation directories under " + base.string());
  return out;
}

Interaction parse_interaction(const std::string& s) {
  if (s == "1" || s == "I") return Interaction::kI;
  if (s == "2" || s == "II") return Interaction::kII;
  if (s == "3" || s == "III") return Interaction::kIII;
  if (s == "4" || s == "IV") return Interaction::kIV;
  fail(ErrorCode::kInvalidInput, "interaction type must be 1-4 (or I-IV), got '" + s + "'");
}

std::string interaction_label(Interaction kind) {
  static const std::array<const char*, 4> names{"I", "II", "III", "IV"};
  return names[static_cast<std::size_t>(kind) - 1];
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot read " + path.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr);
  std::array<char, 1 << 16> buf;
  while (in) {
    in.read(buf.data(), buf.size());
    EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> md;
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), md.data(), &len);
  static constexpr char hex[] = "0123456789abcdef";
  std::string s;
  for (unsigned int i = 0; i < len; ++i) {
    s += hex[md[i] >> 4];
    s += hex[md[i] & 15];
  }
  return s;
}

Manifest::Manifest(std::string command, const CommonOptions& opts)
    : start_(std::chrono::steady_clock::now()) {
  doc_["command"] = std::move(command);
  doc_["seed"] = opts.seed;
  doc_["seed_generated"] = !opts.seed_given;
  doc_["workers"] = opts.workers;
  doc_["parameters"] = Json::object();
  doc_["inputs"] = Json::object();
  doc_["outputs"] = Json::array();
  doc_["versions"] = {{"gscan", GSCAN_VERSION},
                      {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                                    std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                    std::to_string(EIGEN_MINOR_VERSION)},
                      {"gsl", GSL_VERSION},
                      {"compiler", __VERSION__}};
}

void Manifest::add_input(const std::string& role, const fs::path& path) {
  doc_["inputs"][role] = {{"path", path.string()}, {"sha256", sha256_file(path)}};
}

void Manifest::add_output(const fs::path& path) { doc_["outputs"].push_back(path.string()); }

void Manifest::write(const fs::path& dir) {
  const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start_;
  doc_["wall_time_seconds"] = elapsed.count();
  write_text(dir / "manifest.json", doc_.dump(2) + "\n");
}

void write_geojson(const fs::path& in, const fs::path& out, const std::string& key,
                   const StDataset& data,
                   const std::function<void(std::size_t, Json&)>& decorate) {
  std::ifstream f(in);
  if (!f) fail(ErrorCode::kIo, "cannot open GeoJSON " + in.string());
  Json doc;
  try {
    doc = Json::parse(f);
    for (auto& feature : doc.at("features")) {
      auto& props = feature["properties"];
      if (!props.is_object() || !props.contains(key)) continue;
      const auto& v = props[key];
      const std::string id = v.is_string() ? v.get<std::string>() : v.dump();
      if (const auto area = data.area_index(id)) decorate(*area, props);
    }
  } catch (const Json::exception& e) {
    fail(ErrorCode::kInvalidInput, in.string() + ": " + e.what());
  }
  write_text(out, doc.dump() + "\n");
}

}  // namespace gscan::cli
