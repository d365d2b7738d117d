#include "cubemesh/engine.hpp"

#include <algorithm>
#include <chrono>

#include <Eigen/Geometry>

namespace cubemesh {
namespace {

double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

}  // namespace

Engine::Engine(const EngineConfig& config) : config_(config) {
  if (!(config_.cube_size > 0.0)) throw std::invalid_argument("cube size must be positive");
  if (config_.effective_truncation() < config_.cube_size) {
    throw std::invalid_argument("truncation band must be at least one cube");
  }
  if (!(config_.epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
  executor_ = std::make_unique<Executor>(config_.strategy == Strategy::Serial ? 1 : config_.workers);
  StoreConfig store_config;
  store_config.cube_size = config_.cube_size;
  store_config.table_size = config_.table_size;
  store_config.max_blocks = config_.max_blocks;
  store_config.max_vertices = config_.max_vertices;
  store_config.max_triangles = config_.max_triangles;
  store_ = std::make_unique<SpatialStore>(store_config);
  mesher_ = std::make_unique<Mesher>(*store_, *executor_);
}

FusionParams Engine::fusion_params() const {
  return {config_.effective_truncation(), config_.max_weight, config_.max_range};
}

MeshParams Engine::mesh_params() const {
  MeshParams p;
  p.strategy = config_.strategy;
  p.refine = {config_.epsilon, config_.refine};
  p.loose_baseline = config_.baseline;
  return p;
}

namespace {

bool in_frustum(const Block& block, const Pose& world_to_camera, const Intrinsics& K, double extent) {
  const Eigen::Vector3d origin = Eigen::Vector3d(block.coord.x, block.coord.y, block.coord.z) * extent;
  const Eigen::Vector3d camera = world_to_camera.inverse().translation;
  if (((camera - origin).array() >= 0.0).all() && ((camera - origin).array() < extent).all()) return true;
  for (int k = 0; k < 8; ++k) {
    const Eigen::Vector3d corner = origin + extent * Eigen::Vector3d(k & 1, (k >> 1) & 1, (k >> 2) & 1);
    const Eigen::Vector3d p = world_to_camera * corner;
    if (p.z() <= 0.0) continue;
    const Eigen::Vector2d uv = K.project(p);
    if (uv.x() >= -0.5 && uv.x() < K.width - 0.5 && uv.y() >= -0.5 && uv.y() < K.height - 0.5) return true;
  }
  return false;
}

}  // namespace

std::vector<Block*> Engine::frustum_blocks(const std::vector<BlockCoord>& collected, const Pose& pose,
                                           const Intrinsics& K) const {
  std::vector<Block*> out;
  const Pose world_to_camera = pose.inverse();
  const BlockTable& table = store_->block_table();
  for (std::size_t i = 0; i < table.size(); ++i) {
    Block* block = table.block_at(i);
    if (in_frustum(*block, world_to_camera, K, store_->block_extent())) out.push_back(block);
  }
  for (const BlockCoord& b : collected) {
    for (int dz = -1; dz <= 0; ++dz) {
      for (int dy = -1; dy <= 0; ++dy) {
        for (int dx = -1; dx <= 0; ++dx) {
          if (Block* block = store_->find_block({b.x + dx, b.y + dy, b.z + dz})) out.push_back(block);
        }
      }
    }
  }
  std::sort(out.begin(), out.end(), [](const Block* a, const Block* b) { return a->coord < b->coord; });
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

FrameResult Engine::process(const DepthFrame& frame, const Pose& pose, const Intrinsics& K) {
  FrameResult result;
  current_frame_ = frame.frame_index;
  const FusionParams fusion = fusion_params();

  auto t0 = std::chrono::steady_clock::now();
  result.collected = collect_blocks(frame, pose, K, fusion, store_->block_extent(), *executor_);
  allocate_blocks(*store_, result.collected, *executor_);
  result.corners_updated = integrate_frame(*store_, result.collected, frame, pose, K, fusion, *executor_);
  result.stats.fusion_ms = elapsed_ms(t0);

  t0 = std::chrono::steady_clock::now();
  const std::vector<Block*> blocks =
      config_.frustum_only ? frustum_blocks(result.collected, pose, K) : store_->block_table().blocks();
  result.mesh = mesher_->extract_frame(blocks, mesh_params(), frame.frame_index);
  result.stats.meshing_ms = elapsed_ms(t0);

  t0 = std::chrono::steady_clock::now();
  const CompactMesh mesh = compact();
  result.stats.compact_ms = elapsed_ms(t0);
  (void)mesh;

  result.stats.frame = frame.frame_index;
  result.stats.blocks_active = blocks.size();
  result.stats.vertices_live = store_->vertices().live_count();
  result.stats.triangles_live = store_->triangles().live_count();
  result.stats.vertices_allocated_total = store_->vertices().allocated_total();
  result.stats.vertices_recycled_total = store_->vertices().released_total();
  result.stats.irregular_cube_count = result.mesh.irregular_cubes;
  return result;
}

CompactMesh Engine::compact_loose() const {
  CompactMesh mesh;
  for (const Block* block : store_->block_table().blocks()) {
    for (const LooseTriangle& tri : block->loose) {
      const Eigen::Vector3f n = (tri[1] - tri[0]).cross(tri[2] - tri[0]).normalized();
      for (const Eigen::Vector3f& p : tri) {
        mesh.indices.push_back(static_cast<std::uint32_t>(mesh.positions.size()));
        mesh.positions.push_back(p);
        mesh.normals.push_back(n.allFinite() ? n : Eigen::Vector3f::UnitZ());
        mesh.ages.push_back(0);
      }
    }
  }
  return mesh;
}

std::uint64_t Engine::loose_vertex_count() const {
  std::uint64_t n = 0;
  for (const Block* block : store_->block_table().blocks()) n += 3 * block->loose.size();
  return n;
}

}  // namespace cubemesh
