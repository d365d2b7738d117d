#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "cubemesh/fusion.hpp"
#include "cubemesh/mesher.hpp"
#include "cubemesh/parallel.hpp"
#include "cubemesh/spatial_store.hpp"

namespace cubemesh {

struct EngineConfig {
  double cube_size = 0.03;
  double truncation = 0.0;  // <= 0 selects 3 * cube_size
  int max_weight = 128;
  double max_range = 5.0;
  Strategy strategy = Strategy::Claim;
  bool refine = false;
  double epsilon = 0.1;
  bool frustum_only = false;
  bool baseline = false;
  int workers = 0;
  std::size_t table_size = std::size_t{1} << 20;
  std::size_t max_blocks = std::size_t{1} << 17;
  std::size_t max_vertices = std::size_t{1} << 24;
  std::size_t max_triangles = std::size_t{1} << 25;

  double effective_truncation() const { return truncation > 0.0 ? truncation : 3.0 * cube_size; }
};

/// Per-frame counters, one CSV row each.
struct StatsRow {
  std::int32_t frame = 0;
  std::uint64_t blocks_active = 0;
  std::uint64_t vertices_live = 0;
  std::uint64_t triangles_live = 0;
  std::uint64_t vertices_allocated_total = 0;
  std::uint64_t vertices_recycled_total = 0;
  std::uint64_t irregular_cube_count = 0;
  double fusion_ms = 0.0;
  double meshing_ms = 0.0;
  double compact_ms = 0.0;

  friend bool operator==(const StatsRow&, const StatsRow&) = default;
};

struct FrameResult {
  StatsRow stats;
  MeshReport mesh;
  std::vector<BlockCoord> collected;
  std::size_t corners_updated = 0;
};

/// The whole per-frame pipeline: collect blocks, fuse, mesh.
///
/// With frustum_only the meshing pass covers blocks with a corner that
/// projects into the image at positive depth or that contain the camera,
/// together with the blocks this frame's rays touched and their -X/-Y/-Z
/// neighbors (whose boundary cubes read the touched corners). Otherwise
/// every allocated block is meshed.
class Engine {
 public:
  explicit Engine(const EngineConfig& config);

  FrameResult process(const DepthFrame& frame, const Pose& pose, const Intrinsics& K);

  const EngineConfig& config() const { return config_; }
  SpatialStore& store() { return *store_; }
  const SpatialStore& store() const { return *store_; }
  Mesher& mesher() { return *mesher_; }
  const Executor& executor() const { return *executor_; }
  FusionParams fusion_params() const;
  MeshParams mesh_params() const;

  /// Frame index of the last processed frame (-1 before the first).
  std::int32_t current_frame() const { return current_frame_; }

  CompactMesh compact() const { return store_->compact_mesh(current_frame_); }
  /// Loose baseline mesh: three private vertices per triangle.
  CompactMesh compact_loose() const;
  std::uint64_t loose_vertex_count() const;

  /// Blocks a frustum-only pass meshes, sorted by coordinate.
  std::vector<Block*> frustum_blocks(const std::vector<BlockCoord>& collected, const Pose& pose,
                                     const Intrinsics& K) const;

 private:
  EngineConfig config_;
  std::unique_ptr<Executor> executor_;
  std::unique_ptr<SpatialStore> store_;
  std::unique_ptr<Mesher> mesher_;
  std::int32_t current_frame_ = -1;
};

}  // namespace cubemesh
