#pragma once

#include <array>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "cubemesh/types.hpp"

namespace cubemesh {

/// One lattice cell. Holds the sample at its minimal corner, the vertex
/// slots of the three edges leaving that corner along +X, +Y, +Z, and the
/// triangles Marching Cubes produced for this cell.
struct Cube {
  double tsdf = 0.0;  // normalized to [-1, 1], positive in free space
  std::uint16_t weight = 0;
  std::uint8_t type_prev = 0;
  std::uint8_t type_curr = 0;
  std::array<std::atomic<VertexId>, 3> edge_vertex;
  std::array<TriangleId, 5> triangles;

  Cube() {
    for (auto& slot : edge_vertex) slot.store(kNone, std::memory_order_relaxed);
    triangles.fill(kNone);
  }
};

using LooseTriangle = std::array<Eigen::Vector3f, 3>;

struct Block {
  explicit Block(BlockCoord c) : coord(c) {}

  Cube& at(int lx, int ly, int lz) { return cubes[lx + kBlockSide * (ly + kBlockSide * lz)]; }
  const Cube& at(int lx, int ly, int lz) const { return cubes[lx + kBlockSide * (ly + kBlockSide * lz)]; }

  BlockCoord coord;
  std::array<Cube, kCubesPerBlock> cubes;
  // Frame stamp of the last meshing pass that included this block.
  std::uint64_t mesh_stamp = 0;
  // Triangles of the loose (unshared) baseline, regenerated per pass.
  std::vector<LooseTriangle> loose;
};

struct Vertex {
  Eigen::Vector3f position = Eigen::Vector3f::Zero();
  Eigen::Vector3f normal = Eigen::Vector3f::Zero();
  Eigen::Vector3f color = Eigen::Vector3f::Zero();  // reserved, never filled
  std::atomic<std::int32_t> refcount{0};
  std::int32_t birth_frame = 0;
  EdgeKey edge;
  bool live = false;

  void reset() {
    position.setZero();
    normal.setZero();
    color.setZero();
    refcount.store(0, std::memory_order_relaxed);
    birth_frame = 0;
    edge = {};
  }
};

struct Triangle {
  std::array<VertexId, 3> v{kNone, kNone, kNone};
  bool live = false;

  void reset() { v = {kNone, kNone, kNone}; }
};

/// Chunked arena with a LIFO free list. Handles stay valid while the
/// arena grows, so readers never race with allocation. allocate/release
/// are linearizable (serialized on one mutex).
template <class T>
class Pool {
 public:
  static constexpr unsigned kChunkBits = 12;
  static constexpr std::size_t kChunkSize = std::size_t{1} << kChunkBits;

  explicit Pool(std::size_t capacity, std::string name = "pool")
      : name_(std::move(name)), capacity_(capacity), directory_((capacity + kChunkSize - 1) / kChunkSize) {}

  Pool(const Pool&) = delete;
  Pool& operator=(const Pool&) = delete;

  std::uint32_t allocate() {
    std::lock_guard lock(mutex_);
    std::uint32_t id;
    if (!free_.empty()) {
      id = free_.back();
      free_.pop_back();
    } else {
      if (size_ >= capacity_) {
        throw CapacityError(name_ + " exhausted (capacity " + std::to_string(capacity_) + ")");
      }
      id = static_cast<std::uint32_t>(size_++);
      const std::size_t chunk = id >> kChunkBits;
      if (chunk == chunks_.size()) {
        chunks_.push_back(std::make_unique<T[]>(kChunkSize));
        directory_[chunk].store(chunks_.back().get(), std::memory_order_release);
      }
    }
    T& item = (*this)[id];
    item.reset();
    item.live = true;
    return id;
  }

  void release(std::uint32_t id) {
    std::lock_guard lock(mutex_);
    if (id >= size_) throw ConsistencyError(name_ + ": release of unknown handle " + std::to_string(id));
    T& item = (*this)[id];
    if (!item.live) throw ConsistencyError(name_ + ": double free of handle " + std::to_string(id));
    item.live = false;
    free_.push_back(id);
    ++released_;
  }

  T& operator[](std::uint32_t id) {
    return directory_[id >> kChunkBits].load(std::memory_order_acquire)[id & (kChunkSize - 1)];
  }
  const T& operator[](std::uint32_t id) const {
    return directory_[id >> kChunkBits].load(std::memory_order_acquire)[id & (kChunkSize - 1)];
  }

  bool is_live(std::uint32_t id) const { return id < allocated_total() && (*this)[id].live; }

  /// Arena slots ever created (live + free-listed).
  std::size_t allocated_total() const {
    std::lock_guard lock(mutex_);
    return size_;
  }
  std::size_t free_count() const {
    std::lock_guard lock(mutex_);
    return free_.size();
  }
  std::size_t live_count() const {
    std::lock_guard lock(mutex_);
    return size_ - free_.size();
  }
  /// Cumulative number of release() calls.
  std::uint64_t released_total() const {
    std::lock_guard lock(mutex_);
    return released_;
  }
  std::size_t capacity() const { return capacity_; }

  template <class F>
  void for_each_live(F&& fn) const {
    const std::size_t n = allocated_total();
    for (std::uint32_t id = 0; id < n; ++id) {
      const T& item = (*this)[id];
      if (item.live) fn(id, item);
    }
  }

 private:
  std::string name_;
  std::size_t capacity_;
  std::vector<std::atomic<T*>> directory_;
  std::vector<std::unique_ptr<T[]>> chunks_;
  std::vector<std::uint32_t> free_;
  std::size_t size_ = 0;
  std::uint64_t released_ = 0;
  mutable std::mutex mutex_;
};

/// Open-addressed BlockCoord -> Block map with linear probing.
///
/// Lookups are lock-free and may run concurrently with each other and with
/// insertions. Concurrent get_or_allocate calls for one coordinate allocate
/// exactly once: the first thread to claim an empty slot builds the block,
/// later arrivals wait for it to be published and share it.
///
/// Bucket = (x * 73856093 ^ y * 19349663 ^ z * 83492791) mod table_size,
/// evaluated on the two's-complement bit patterns in 64-bit arithmetic.
class BlockTable {
 public:
  static constexpr std::uint64_t kPrimeX = 73856093;
  static constexpr std::uint64_t kPrimeY = 19349663;
  static constexpr std::uint64_t kPrimeZ = 83492791;

  /// table_size must be a power of two.
  explicit BlockTable(std::size_t table_size = std::size_t{1} << 20, std::size_t max_blocks = std::size_t{1} << 17);

  static std::size_t hash(BlockCoord c, std::size_t table_size);

  Block* find(BlockCoord c) const;
  /// Throws CapacityError when max_blocks is reached or the table is full.
  Block& get_or_allocate(BlockCoord c);

  std::size_t size() const { return count_.load(std::memory_order_acquire); }
  std::size_t bucket_count() const { return slots_.size(); }
  std::size_t max_blocks() const { return blocks_.size(); }

  /// All allocated blocks, ordered by coordinate.
  std::vector<Block*> blocks() const;
  /// The i-th allocated block in allocation order, i < size(). Only valid
  /// outside the allocation phase.
  Block* block_at(std::size_t i) const { return blocks_[i].get(); }
  /// Mean number of slots inspected by a successful lookup.
  double mean_probe_length() const;

 private:
  static constexpr std::uint32_t kEmpty = 0xFFFFFFFFu;
  static constexpr std::uint32_t kBusy = 0xFFFFFFFEu;

  struct Slot {
    std::atomic<std::uint32_t> state{kEmpty};
    BlockCoord coord;
  };

  std::vector<Slot> slots_;
  std::vector<std::unique_ptr<Block>> blocks_;
  std::atomic<std::uint32_t> count_{0};
};

struct CornerSample {
  double tsdf = 0.0;
  std::uint16_t weight = 0;
};

/// Contiguous export of the live mesh. Vertices appear in block-coordinate
/// order, then cube order, then X/Y/Z slot order; indices are remapped.
struct CompactMesh {
  std::vector<Eigen::Vector3f> positions;
  std::vector<Eigen::Vector3f> normals;
  std::vector<std::int32_t> ages;
  std::vector<std::uint32_t> indices;

  std::size_t vertex_count() const { return positions.size(); }
  std::size_t triangle_count() const { return indices.size() / 3; }
};

struct StoreConfig {
  double cube_size = 0.03;
  std::size_t table_size = std::size_t{1} << 20;
  std::size_t max_blocks = std::size_t{1} << 17;
  std::size_t max_vertices = std::size_t{1} << 24;
  std::size_t max_triangles = std::size_t{1} << 25;
};

/// Two-level spatial hash (blocks -> cubes) with pooled mesh storage.
class SpatialStore {
 public:
  explicit SpatialStore(const StoreConfig& config = {});

  double cube_size() const { return cube_size_; }
  double block_extent() const { return cube_size_ * kBlockSide; }

  BlockCoord block_of_point(const Eigen::Vector3d& p) const;
  Eigen::Vector3d corner_position(CubeCoord c) const {
    return Eigen::Vector3d(c.x, c.y, c.z) * cube_size_;
  }

  BlockTable& block_table() { return table_; }
  const BlockTable& block_table() const { return table_; }
  Block* find_block(BlockCoord c) const { return table_.find(c); }
  Block& get_or_allocate_block(BlockCoord c) { return table_.get_or_allocate(c); }

  Cube* find_cube(CubeCoord c) const;
  /// Sample at the corner owned by cube c; weight 0 when the block is absent.
  CornerSample corner_sample(CubeCoord c) const;
  /// The vertex slot of edge k inside its owning cube, or nullptr when the
  /// owning block is not allocated.
  std::atomic<VertexId>* resolve_edge(const EdgeKey& k) const;

  Pool<Vertex>& vertices() { return vertices_; }
  const Pool<Vertex>& vertices() const { return vertices_; }
  Pool<Triangle>& triangles() { return triangles_; }
  const Pool<Triangle>& triangles() const { return triangles_; }

  VertexId allocate_vertex() { return vertices_.allocate(); }
  void free_vertex(VertexId id);

  CompactMesh compact_mesh(std::int32_t current_frame) const;

  /// Bytes per cube in this layout, and in the single-handle layout that
  /// keeps one pointer for edges and one for triangles.
  static constexpr std::size_t kCubeBytes = sizeof(Cube);
  static constexpr std::size_t kCompactCubeBytes = 24;

 private:
  double cube_size_;
  BlockTable table_;
  Pool<Vertex> vertices_;
  Pool<Triangle> triangles_;
};

}  // namespace cubemesh
