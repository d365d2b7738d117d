#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "cubemesh/parallel.hpp"
#include "cubemesh/refiner.hpp"
#include "cubemesh/spatial_store.hpp"

namespace cubemesh {

/// How concurrent cubes agree on the single vertex of a shared edge.
enum class Strategy {
  Serial,     // one thread, fixed loop order
  Claim,      // first thread to CAS the slot allocates, others wait for the handle
  Partition,  // 8 parity classes of cubes, no two members of a class share an edge
};

std::string_view to_string(Strategy s);
std::optional<Strategy> parse_strategy(std::string_view name);

struct MeshParams {
  Strategy strategy = Strategy::Claim;
  RefineParams refine;
  bool loose_baseline = false;
};

struct MeshReport {
  std::size_t blocks = 0;
  std::size_t typed_cubes = 0;
  std::size_t irregular_cubes = 0;
  std::size_t refined_cubes = 0;
  std::size_t vertices_allocated = 0;
  std::size_t vertices_freed = 0;
  std::size_t triangles_allocated = 0;
  std::size_t triangles_freed = 0;
  std::size_t degenerate_edges = 0;
};

/// Bit k set <=> corner k is below the isovalue 0.
std::uint8_t classify_corners(std::span<const double, 8> corners);

/// p0 + d0 / (d0 - d1) * (p1 - p0). With equal signs the same formula
/// extrapolates past the segment. d0 == d1 yields the midpoint and sets
/// *degenerate.
Eigen::Vector3d interpolate_vertex(double d0, double d1, const Eigen::Vector3d& p0, const Eigen::Vector3d& p1,
                                   bool* degenerate = nullptr);

/// Cached access to the 27 blocks around a center block.
class BlockNeighborhood {
 public:
  BlockNeighborhood(const SpatialStore& store, BlockCoord center);

  Block* block(BlockCoord b) const;
  Cube* cube(CubeCoord c) const;

 private:
  const SpatialStore& store_;
  BlockCoord center_;
  mutable std::array<Block*, 27> blocks_{};
  mutable std::array<bool, 27> resolved_{};
};

/// Incremental Marching Cubes over a set of blocks.
///
/// A pass runs, separated by barriers: cube typing (with optional
/// refinement), vertex placement, triangulation, garbage collection,
/// normal estimation. Output is independent of strategy and worker count.
class Mesher {
 public:
  Mesher(SpatialStore& store, const Executor& executor);

  MeshReport extract_frame(std::span<Block* const> blocks, const MeshParams& params, std::int32_t frame_index);

  /// Sample values at the 8 corners of c, or nullopt if any is unobserved.
  std::optional<std::array<double, 8>> gather_corners(CubeCoord c) const;
  /// Types cube c and shifts its previous type into type_prev. Leaves the
  /// cube untouched and returns nullopt when a corner is unobserved.
  std::optional<std::uint8_t> compute_cube_type(CubeCoord c, const RefineParams& refine = {});

  /// Vertex position for an edge from its two endpoint samples.
  std::optional<Eigen::Vector3d> edge_position(const EdgeKey& key) const;
  Eigen::Vector3f estimate_normal(VertexId id) const;

  // Individual phases. They must run in this order inside one pass,
  // after begin_pass.
  void begin_pass(std::span<Block* const> blocks, std::int32_t frame_index);
  void type_cubes(std::span<Block* const> blocks, const RefineParams& refine);
  void place_vertices(std::span<Block* const> blocks, Strategy strategy);
  void triangulate(std::span<Block* const> blocks);
  void garbage_collect();
  void compute_normals(std::span<Block* const> blocks);
  void rebuild_loose(std::span<Block* const> blocks);
  MeshReport end_pass();

 private:
  void place_cube(Block& block, int local_index, Strategy strategy, const BlockNeighborhood& hood,
                  std::vector<VertexId>& foreign);
  VertexId acquire_vertex(std::atomic<VertexId>& slot, const EdgeKey& key, Strategy strategy);
  void triangulate_cube(Cube& cube, CubeCoord c, const BlockNeighborhood& hood, std::vector<VertexId>& orphaned);
  void update_position(VertexId id);

  SpatialStore& store_;
  const Executor& executor_;
  std::uint64_t stamp_ = 0;
  std::int32_t frame_index_ = 0;

  std::vector<VertexId> foreign_;
  std::vector<VertexId> orphaned_;
  std::atomic<std::size_t> typed_{0};
  std::atomic<std::size_t> irregular_{0};
  std::atomic<std::size_t> refined_{0};
  std::atomic<std::size_t> vertices_allocated_{0};
  std::atomic<std::size_t> triangles_allocated_{0};
  std::atomic<std::size_t> triangles_freed_{0};
  std::atomic<std::size_t> degenerate_{0};
  std::size_t vertices_freed_ = 0;
  std::size_t pass_blocks_ = 0;
};

}  // namespace cubemesh
