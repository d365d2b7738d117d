#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "cubemesh/engine.hpp"
#include "cubemesh/io.hpp"

namespace cubemesh::harness {

struct RunConfig {
  EngineConfig engine;
  double depth_scale = io::kDefaultDepthScale;
  std::uint64_t seed = 1;
  std::filesystem::path out = "out";
  bool write_obj = true;
  bool write_ply = true;
  bool color_by_age = true;

  /// Throws std::invalid_argument on l <= 0, tau < l, epsilon <= 0.
  void validate() const;
  nlohmann::json to_json() const;
};

/// depth/*.pgm (sorted by name), trajectory.txt, intrinsics.txt.
struct Dataset {
  std::filesystem::path root;
  Intrinsics intrinsics;
  std::vector<io::TimedPose> trajectory;
  std::vector<std::filesystem::path> depth_files;
  std::vector<std::string> warnings;

  std::size_t size() const { return depth_files.size(); }
  DepthFrame frame(std::size_t i, double depth_scale) const;
};

/// Loads and cross-checks a dataset; frame/pose count mismatch and image
/// size mismatch are reported before any frame is processed.
Dataset load_dataset(const std::filesystem::path& dir);

struct RunResult {
  std::vector<StatsRow> stats;
  CompactMesh mesh;
  std::int32_t last_frame = -1;
};

/// Fuses and meshes every frame with a fresh engine.
RunResult reconstruct(const RunConfig& config, const Dataset& dataset);

/// reconstruct, then writes mesh.obj / mesh.ply, stats.csv and
/// manifest.json under config.out.
RunResult run_reconstruct(const RunConfig& config, const std::filesystem::path& dataset_dir);

struct CompareRow {
  std::int32_t frame = 0;
  std::uint64_t compact_vertices = 0;
  std::uint64_t compact_triangles = 0;
  std::uint64_t loose_vertices = 0;
  std::uint64_t loose_triangles = 0;
};

struct CompareResult {
  std::vector<CompareRow> rows;
  double final_ratio = 1.0;  // compact / loose vertices after the last frame
};

CompareResult compare(const RunConfig& config, const Dataset& dataset);
/// compare, then writes compare.csv and manifest.json under config.out.
CompareResult run_compare(const RunConfig& config, const std::filesystem::path& dataset_dir);

/// Writes mesh files for an already computed mesh according to config.
void export_mesh(const RunConfig& config, const CompactMesh& mesh);

/// SHA-1 of "blob <size>\0<bytes>", lowercase hex, as git computes it.
std::string git_blob_hash(const std::string& bytes);

}  // namespace cubemesh::harness
