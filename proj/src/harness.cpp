#include "cubemesh/harness.hpp"

#include <algorithm>
#include <fstream>

#include <fmt/format.h>
#include <openssl/evp.h>

namespace cubemesh::harness {
namespace fs = std::filesystem;

void RunConfig::validate() const {
  if (!(engine.cube_size > 0.0)) throw std::invalid_argument("--cube-size must be positive");
  if (engine.effective_truncation() < engine.cube_size) {
    throw std::invalid_argument("--trunc must be at least --cube-size");
  }
  if (!(engine.epsilon > 0.0)) throw std::invalid_argument("--epsilon must be positive");
  if (!(engine.max_range > 0.0)) throw std::invalid_argument("--max-range must be positive");
  if (engine.workers < 0) throw std::invalid_argument("--workers must be non-negative");
  if (!(depth_scale > 0.0)) throw std::invalid_argument("--depth-scale must be positive");
}

nlohmann::json RunConfig::to_json() const {
  return {
      {"cube_size", engine.cube_size},
      {"truncation", engine.effective_truncation()},
      {"epsilon", engine.epsilon},
      {"strategy", std::string(to_string(engine.strategy))},
      {"refine", engine.refine},
      {"baseline", engine.baseline},
      {"max_range", engine.max_range},
      {"max_weight", engine.max_weight},
      {"frustum_only", engine.frustum_only},
      {"workers", engine.workers},
      {"seed", seed},
      {"depth_scale", depth_scale},
      {"out", out.string()},
  };
}

DepthFrame Dataset::frame(std::size_t i, double depth_scale) const {
  DepthFrame f = io::read_depth(depth_files.at(i), depth_scale);
  if (f.width != intrinsics.width || f.height != intrinsics.height) {
    throw InputError(fmt::format("{}: image is {}x{}, intrinsics say {}x{}", depth_files[i].string(), f.width,
                                 f.height, intrinsics.width, intrinsics.height));
  }
  f.frame_index = static_cast<std::int32_t>(i);
  return f;
}

Dataset load_dataset(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw InputError("dataset directory not found: " + dir.string());
  Dataset d;
  d.root = dir;
  d.intrinsics = io::read_intrinsics(dir / "intrinsics.txt");
  d.trajectory = io::read_trajectory(dir / "trajectory.txt", &d.warnings);
  const fs::path depth_dir = dir / "depth";
  if (fs::is_directory(depth_dir)) {
    for (const auto& entry : fs::directory_iterator(depth_dir)) {
      if (entry.is_regular_file() && entry.path().extension() == ".pgm") d.depth_files.push_back(entry.path());
    }
  }
  std::sort(d.depth_files.begin(), d.depth_files.end());
  if (d.depth_files.size() != d.trajectory.size()) {
    throw InputError(fmt::format("{}: {} depth frames but {} poses", dir.string(), d.depth_files.size(),
                                 d.trajectory.size()));
  }
  return d;
}

RunResult reconstruct(const RunConfig& config, const Dataset& dataset) {
  config.validate();
  Engine engine(config.engine);
  RunResult result;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const DepthFrame frame = dataset.frame(i, config.depth_scale);
    result.stats.push_back(engine.process(frame, dataset.trajectory[i].pose, dataset.intrinsics).stats);
  }
  result.last_frame = engine.current_frame();
  result.mesh = engine.compact();
  return result;
}

void export_mesh(const RunConfig& config, const CompactMesh& mesh) {
  fs::create_directories(config.out);
  if (config.write_obj) io::write_obj(config.out / "mesh.obj", mesh);
  if (config.write_ply) io::write_ply(config.out / "mesh.ply", mesh, config.color_by_age);
}

std::string git_blob_hash(const std::string& bytes) {
  const std::string header = "blob " + std::to_string(bytes.size()) + '\0';
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  const bool ok = ctx && EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) &&
                  EVP_DigestUpdate(ctx, header.data(), header.size()) &&
                  EVP_DigestUpdate(ctx, bytes.data(), bytes.size()) && EVP_DigestFinal_ex(ctx, digest, &length);
  EVP_MD_CTX_free(ctx);
  if (!ok) throw std::runtime_error("SHA-1 digest failed");
  std::string hex;
  for (unsigned int i = 0; i < length; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

namespace {

void write_manifest(const RunConfig& config, const Dataset& dataset, const std::string& command,
                    const std::vector<fs::path>& outputs) {
  nlohmann::json inputs = nlohmann::json::object();
  auto hash_input = [&](const fs::path& p) {
    inputs[fs::relative(p, dataset.root).generic_string()] = git_blob_hash(io::read_file(p));
  };
  hash_input(dataset.root / "intrinsics.txt");
  hash_input(dataset.root / "trajectory.txt");
  for (const fs::path& p : dataset.depth_files) hash_input(p);

  nlohmann::json out = nlohmann::json::object();
  for (const fs::path& p : outputs) out[p.filename().string()] = git_blob_hash(io::read_file(p));

  const nlohmann::json manifest = {
      {"command", command},
      {"dataset", dataset.root.string()},
      {"frames", dataset.size()},
      {"config", config.to_json()},
      {"inputs", inputs},
      {"outputs", out},
      {"cube_bytes", {{"layout", SpatialStore::kCubeBytes}, {"compact_layout", SpatialStore::kCompactCubeBytes}}},
      {"warnings", dataset.warnings},
  };
  std::ofstream f(config.out / "manifest.json");
  f << manifest.dump(2) << '\n';
  if (!f) throw std::runtime_error("cannot write " + (config.out / "manifest.json").string());
}

}  // namespace

RunResult run_reconstruct(const RunConfig& config, const fs::path& dataset_dir) {
  config.validate();
  const Dataset dataset = load_dataset(dataset_dir);
  RunResult result = reconstruct(config, dataset);
  export_mesh(config, result.mesh);
  io::write_stats(config.out / "stats.csv", result.stats);

  std::vector<fs::path> outputs{config.out / "stats.csv"};
  if (config.write_obj) outputs.push_back(config.out / "mesh.obj");
  if (config.write_ply) outputs.push_back(config.out / "mesh.ply");
  write_manifest(config, dataset, "reconstruct", outputs);
  return result;
}

CompareResult compare(const RunConfig& config, const Dataset& dataset) {
  config.validate();
  EngineConfig engine_config = config.engine;
  engine_config.baseline = true;
  Engine engine(engine_config);
  CompareResult result;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const DepthFrame frame = dataset.frame(i, config.depth_scale);
    const StatsRow stats = engine.process(frame, dataset.trajectory[i].pose, dataset.intrinsics).stats;
    CompareRow row;
    row.frame = stats.frame;
    row.compact_vertices = stats.vertices_live;
    row.compact_triangles = stats.triangles_live;
    row.loose_vertices = engine.loose_vertex_count();
    row.loose_triangles = row.loose_vertices / 3;
    result.rows.push_back(row);
  }
  if (!result.rows.empty() && result.rows.back().loose_vertices > 0) {
    result.final_ratio =
        static_cast<double>(result.rows.back().compact_vertices) / static_cast<double>(result.rows.back().loose_vertices);
  }
  return result;
}

CompareResult run_compare(const RunConfig& config, const fs::path& dataset_dir) {
  config.validate();
  const Dataset dataset = load_dataset(dataset_dir);
  CompareResult result = compare(config, dataset);
  fs::create_directories(config.out);
  const fs::path csv = config.out / "compare.csv";
  std::ofstream f(csv);
  f << "frame,compact_vertices,compact_triangles,loose_vertices,loose_triangles\n";
  for (const CompareRow& r : result.rows) {
    f << r.frame << ',' << r.compact_vertices << ',' << r.compact_triangles << ',' << r.loose_vertices << ','
      << r.loose_triangles << '\n';
  }
  f.close();
  if (!f) throw std::runtime_error("cannot write " + csv.string());
  write_manifest(config, dataset, "compare", {csv});
  return result;
}

}  // namespace cubemesh::harness
