#include "cubemesh/spatial_store.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

namespace cubemesh {

BlockTable::BlockTable(std::size_t table_size, std::size_t max_blocks)
    : slots_(table_size), blocks_(std::min(max_blocks, table_size)) {
  if (table_size == 0 || (table_size & (table_size - 1)) != 0) {
    throw std::invalid_argument("block table size must be a power of two");
  }
}

std::size_t BlockTable::hash(BlockCoord c, std::size_t table_size) {
  const auto ux = static_cast<std::uint64_t>(static_cast<std::uint32_t>(c.x));
  const auto uy = static_cast<std::uint64_t>(static_cast<std::uint32_t>(c.y));
  const auto uz = static_cast<std::uint64_t>(static_cast<std::uint32_t>(c.z));
  return static_cast<std::size_t>(((ux * kPrimeX) ^ (uy * kPrimeY) ^ (uz * kPrimeZ)) & (table_size - 1));
}

Block* BlockTable::find(BlockCoord c) const {
  const std::size_t mask = slots_.size() - 1;
  std::size_t i = hash(c, slots_.size());
  for (std::size_t probes = 0; probes < slots_.size(); ++probes, i = (i + 1) & mask) {
    const Slot& slot = slots_[i];
    std::uint32_t state = slot.state.load(std::memory_order_acquire);
    while (state == kBusy) {
      std::this_thread::yield();
      state = slot.state.load(std::memory_order_acquire);
    }
    if (state == kEmpty) return nullptr;
    if (slot.coord == c) return blocks_[state].get();
  }
  return nullptr;
}

Block& BlockTable::get_or_allocate(BlockCoord c) {
  const std::size_t mask = slots_.size() - 1;
  std::size_t i = hash(c, slots_.size());
  for (std::size_t probes = 0; probes < slots_.size(); ++probes, i = (i + 1) & mask) {
    Slot& slot = slots_[i];
    std::uint32_t state = slot.state.load(std::memory_order_acquire);
    for (;;) {
      if (state == kEmpty) {
        if (!slot.state.compare_exchange_weak(state, kBusy, std::memory_order_acq_rel,
                                              std::memory_order_acquire)) {
          continue;  // state reloaded; re-examine
        }
        const std::uint32_t index = count_.fetch_add(1, std::memory_order_acq_rel);
        if (index >= blocks_.size()) {
          count_.fetch_sub(1, std::memory_order_acq_rel);
          slot.state.store(kEmpty, std::memory_order_release);
          throw CapacityError("block capacity exhausted (" + std::to_string(blocks_.size()) + " blocks)");
        }
        slot.coord = c;
        blocks_[index] = std::make_unique<Block>(c);
        slot.state.store(index, std::memory_order_release);
        return *blocks_[index];
      }
      if (state == kBusy) {
        std::this_thread::yield();
        state = slot.state.load(std::memory_order_acquire);
        continue;
      }
      break;
    }
    if (slot.coord == c) return *blocks_[state];
  }
  throw CapacityError("block table full");
}

std::vector<Block*> BlockTable::blocks() const {
  const std::size_t n = size();
  std::vector<Block*> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (blocks_[i]) out.push_back(blocks_[i].get());
  }
  std::sort(out.begin(), out.end(), [](const Block* a, const Block* b) { return a->coord < b->coord; });
  return out;
}

double BlockTable::mean_probe_length() const {
  const std::size_t mask = slots_.size() - 1;
  std::size_t total = 0;
  std::size_t found = 0;
  for (std::size_t s = 0; s < slots_.size(); ++s) {
    const std::uint32_t state = slots_[s].state.load(std::memory_order_acquire);
    if (state == kEmpty || state == kBusy) continue;
    const std::size_t home = hash(slots_[s].coord, slots_.size());
    total += ((s - home) & mask) + 1;
    ++found;
  }
  return found == 0 ? 0.0 : static_cast<double>(total) / static_cast<double>(found);
}

SpatialStore::SpatialStore(const StoreConfig& config)
    : cube_size_(config.cube_size),
      table_(config.table_size, config.max_blocks),
      vertices_(config.max_vertices, "vertex pool"),
      triangles_(config.max_triangles, "triangle pool") {
  if (!(cube_size_ > 0.0)) throw std::invalid_argument("cube size must be positive");
}

BlockCoord SpatialStore::block_of_point(const Eigen::Vector3d& p) const {
  const double extent = block_extent();
  return {static_cast<int>(std::floor(p.x() / extent)), static_cast<int>(std::floor(p.y() / extent)),
          static_cast<int>(std::floor(p.z() / extent))};
}

Cube* SpatialStore::find_cube(CubeCoord c) const {
  Block* block = table_.find(c.block());
  return block ? &block->cubes[c.local_index()] : nullptr;
}

CornerSample SpatialStore::corner_sample(CubeCoord c) const {
  const Cube* cube = find_cube(c);
  if (!cube) return {};
  return {cube->tsdf, cube->weight};
}

std::atomic<VertexId>* SpatialStore::resolve_edge(const EdgeKey& k) const {
  Cube* cube = find_cube(k.cube);
  return cube ? &cube->edge_vertex[static_cast<int>(k.axis)] : nullptr;
}

void SpatialStore::free_vertex(VertexId id) {
  if (vertices_[id].refcount.load(std::memory_order_acquire) != 0) {
    throw ConsistencyError("free of referenced vertex " + std::to_string(id));
  }
  vertices_.release(id);
}

CompactMesh SpatialStore::compact_mesh(std::int32_t current_frame) const {
  CompactMesh mesh;
  const std::vector<Block*> blocks = table_.blocks();
  std::vector<std::uint32_t> remap(vertices_.allocated_total(), kNone);

  for (const Block* block : blocks) {
    for (const Cube& cube : block->cubes) {
      for (const auto& slot : cube.edge_vertex) {
        const VertexId id = slot.load(std::memory_order_acquire);
        if (id == kNone) continue;
        const Vertex& v = vertices_[id];
        remap[id] = static_cast<std::uint32_t>(mesh.positions.size());
        mesh.positions.push_back(v.position);
        mesh.normals.push_back(v.normal);
        mesh.ages.push_back(current_frame - v.birth_frame);
      }
    }
  }
  for (const Block* block : blocks) {
    for (const Cube& cube : block->cubes) {
      for (const TriangleId t : cube.triangles) {
        if (t == kNone) continue;
        for (const VertexId v : triangles_[t].v) mesh.indices.push_back(remap[v]);
      }
    }
  }
  return mesh;
}

}  // namespace cubemesh
