#include "cubemesh/mesher.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <string>
#include <thread>

#include <tbb/enumerable_thread_specific.h>

#include "cubemesh/mc_tables.hpp"

namespace cubemesh {
namespace {

// Slot value while the claiming thread allocates the vertex.
constexpr VertexId kPending = 0xFFFFFFFEu;

// The tables wind triangles clockwise seen from the positive side under our
// corner numbering; emit (a, c, b) so face normals point toward +tsdf.
constexpr std::array<int, 3> kWinding = {0, 2, 1};

Eigen::Vector3d axis_unit(Axis a) {
  Eigen::Vector3d u = Eigen::Vector3d::Zero();
  u[static_cast<int>(a)] = 1.0;
  return u;
}

CubeCoord step(CubeCoord c, Axis a, int amount = 1) {
  switch (a) {
    case Axis::X: return c.offset(amount, 0, 0);
    case Axis::Y: return c.offset(0, amount, 0);
    case Axis::Z: return c.offset(0, 0, amount);
  }
  return c;
}

template <class T>
std::vector<T> merge(tbb::enumerable_thread_specific<std::vector<T>>& parts) {
  std::vector<T> out;
  for (auto& part : parts) out.insert(out.end(), part.begin(), part.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::Serial: return "serial";
    case Strategy::Claim: return "claim";
    case Strategy::Partition: return "partition";
  }
  return "?";
}

std::optional<Strategy> parse_strategy(std::string_view name) {
  if (name == "serial") return Strategy::Serial;
  if (name == "claim") return Strategy::Claim;
  if (name == "partition") return Strategy::Partition;
  return std::nullopt;
}

std::uint8_t classify_corners(std::span<const double, 8> corners) {
  std::uint8_t t = 0;
  for (int k = 0; k < 8; ++k) {
    if (corners[k] < 0.0) t |= static_cast<std::uint8_t>(1u << k);
  }
  return t;
}

Eigen::Vector3d interpolate_vertex(double d0, double d1, const Eigen::Vector3d& p0, const Eigen::Vector3d& p1,
                                   bool* degenerate) {
  if (d0 == d1) {
    if (degenerate) *degenerate = true;
    return 0.5 * (p0 + p1);
  }
  if (degenerate) *degenerate = false;
  return p0 + (d0 / (d0 - d1)) * (p1 - p0);
}

BlockNeighborhood::BlockNeighborhood(const SpatialStore& store, BlockCoord center)
    : store_(store), center_(center) {}

Block* BlockNeighborhood::block(BlockCoord b) const {
  const int dx = b.x - center_.x;
  const int dy = b.y - center_.y;
  const int dz = b.z - center_.z;
  if (dx < -1 || dx > 1 || dy < -1 || dy > 1 || dz < -1 || dz > 1) return store_.find_block(b);
  const int slot = (dx + 1) + 3 * ((dy + 1) + 3 * (dz + 1));
  if (!resolved_[slot]) {
    blocks_[slot] = store_.find_block(b);
    resolved_[slot] = true;
  }
  return blocks_[slot];
}

Cube* BlockNeighborhood::cube(CubeCoord c) const {
  Block* b = block(c.block());
  return b ? &b->cubes[c.local_index()] : nullptr;
}

Mesher::Mesher(SpatialStore& store, const Executor& executor) : store_(store), executor_(executor) {}

std::optional<std::array<double, 8>> Mesher::gather_corners(CubeCoord c) const {
  const BlockNeighborhood hood(store_, c.block());
  std::array<double, 8> values{};
  for (int k = 0; k < 8; ++k) {
    const auto& o = mc::kCornerOffset[k];
    const Cube* corner = hood.cube(c.offset(o[0], o[1], o[2]));
    if (!corner || corner->weight == 0) return std::nullopt;
    values[k] = corner->tsdf;
  }
  return values;
}

std::optional<std::uint8_t> Mesher::compute_cube_type(CubeCoord c, const RefineParams& refine) {
  Cube* cube = store_.find_cube(c);
  if (!cube) return std::nullopt;
  const auto corners = gather_corners(c);
  if (!corners) return std::nullopt;
  const std::uint8_t raw = classify_corners(*corners);
  cube->type_prev = cube->type_curr;
  std::uint8_t type = raw;
  if (refine.enabled) {
    if (const auto regular = detect_disturbance(raw, cube->type_prev, *corners, refine.epsilon)) type = *regular;
  }
  cube->type_curr = type;
  return raw;
}

std::optional<Eigen::Vector3d> Mesher::edge_position(const EdgeKey& key) const {
  const CornerSample s0 = store_.corner_sample(key.cube);
  const CornerSample s1 = store_.corner_sample(step(key.cube, key.axis));
  if (s0.weight == 0 || s1.weight == 0) return std::nullopt;
  const Eigen::Vector3d p0 = store_.corner_position(key.cube);
  return interpolate_vertex(s0.tsdf, s1.tsdf, p0, p0 + axis_unit(key.axis) * store_.cube_size());
}

void Mesher::begin_pass(std::span<Block* const> blocks, std::int32_t frame_index) {
  ++stamp_;
  frame_index_ = frame_index;
  for (Block* b : blocks) b->mesh_stamp = stamp_;
  pass_blocks_ = blocks.size();
  foreign_.clear();
  orphaned_.clear();
  typed_ = 0;
  irregular_ = 0;
  refined_ = 0;
  vertices_allocated_ = 0;
  triangles_allocated_ = 0;
  triangles_freed_ = 0;
  degenerate_ = 0;
  vertices_freed_ = 0;
}

void Mesher::type_cubes(std::span<Block* const> blocks, const RefineParams& refine) {
  executor_.parallel_for(blocks.size(), [&](std::size_t bi) {
    Block& block = *blocks[bi];
    const BlockNeighborhood hood(store_, block.coord);
    std::size_t typed = 0, irregular = 0, refined = 0;
    for (int i = 0; i < kCubesPerBlock; ++i) {
      const CubeCoord c = CubeCoord::from_local(block.coord, i % kBlockSide, (i / kBlockSide) % kBlockSide,
                                                i / (kBlockSide * kBlockSide));
      std::array<double, 8> corners{};
      bool observed = true;
      for (int k = 0; k < 8 && observed; ++k) {
        const auto& o = mc::kCornerOffset[k];
        const Cube* corner = hood.cube(c.offset(o[0], o[1], o[2]));
        observed = corner && corner->weight > 0;
        if (observed) corners[k] = corner->tsdf;
      }
      if (!observed) continue;
      Cube& cube = block.cubes[i];
      const std::uint8_t raw = classify_corners(corners);
      cube.type_prev = cube.type_curr;
      std::uint8_t type = raw;
      if (refine.enabled) {
        if (const auto regular = detect_disturbance(raw, cube.type_prev, corners, refine.epsilon)) {
          type = *regular;
          if (type != raw) ++refined;
        }
      }
      cube.type_curr = type;
      ++typed;
      if (is_irregular(type)) ++irregular;
    }
    typed_ += typed;
    irregular_ += irregular;
    refined_ += refined;
  });
}

VertexId Mesher::acquire_vertex(std::atomic<VertexId>& slot, const EdgeKey& key, Strategy strategy) {
  auto create = [&] {
    const VertexId id = store_.allocate_vertex();
    Vertex& v = store_.vertices()[id];
    v.edge = key;
    v.birth_frame = frame_index_;
    vertices_allocated_.fetch_add(1, std::memory_order_relaxed);
    return id;
  };

  if (strategy != Strategy::Claim) {
    // Serial and Partition never have two writers on one slot.
    VertexId id = slot.load(std::memory_order_relaxed);
    if (id == kNone) {
      id = create();
      slot.store(id, std::memory_order_release);
    }
    return id;
  }

  VertexId current = slot.load(std::memory_order_acquire);
  for (;;) {
    if (current == kNone) {
      if (!slot.compare_exchange_weak(current, kPending, std::memory_order_acq_rel, std::memory_order_acquire)) {
        continue;
      }
      VertexId id;
      try {
        id = create();
      } catch (...) {
        slot.store(kNone, std::memory_order_release);
        throw;
      }
      slot.store(id, std::memory_order_release);
      return id;
    }
    if (current == kPending) {
      std::this_thread::yield();
      current = slot.load(std::memory_order_acquire);
      continue;
    }
    return current;
  }
}

void Mesher::place_cube(Block& block, int local_index, Strategy strategy, const BlockNeighborhood& hood,
                        std::vector<VertexId>& foreign) {
  const Cube& cube = block.cubes[local_index];
  const std::uint16_t mask = mc::kEdgeMask[cube.type_curr];
  if (mask == 0) return;
  const CubeCoord c = CubeCoord::from_local(block.coord, local_index % kBlockSide,
                                            (local_index / kBlockSide) % kBlockSide,
                                            local_index / (kBlockSide * kBlockSide));
  for (int e = 0; e < 12; ++e) {
    if (!((mask >> e) & 1u)) continue;
    const EdgeKey key = mc::edge_key(c, e);
    Block* owner_block = hood.block(key.cube.block());
    if (!owner_block) throw ConsistencyError("edge owner block missing for a typed cube");
    Cube& owner = owner_block->cubes[key.cube.local_index()];
    const VertexId id = acquire_vertex(owner.edge_vertex[static_cast<int>(key.axis)], key, strategy);
    if (owner_block->mesh_stamp != stamp_) foreign.push_back(id);
  }
}

void Mesher::place_vertices(std::span<Block* const> blocks, Strategy strategy) {
  tbb::enumerable_thread_specific<std::vector<VertexId>> foreign;

  auto run_block = [&](Block& block, int parity) {
    const BlockNeighborhood hood(store_, block.coord);
    auto& out = foreign.local();
    for (int i = 0; i < kCubesPerBlock; ++i) {
      if (parity >= 0) {
        const int px = (i % kBlockSide) & 1;
        const int py = ((i / kBlockSide) % kBlockSide) & 1;
        const int pz = (i / (kBlockSide * kBlockSide)) & 1;
        if ((px | (py << 1) | (pz << 2)) != parity) continue;
      }
      place_cube(block, i, strategy, hood, out);
    }
  };

  switch (strategy) {
    case Strategy::Serial:
      for (Block* b : blocks) run_block(*b, -1);
      break;
    case Strategy::Claim:
      executor_.parallel_for(blocks.size(), [&](std::size_t bi) { run_block(*blocks[bi], -1); });
      break;
    case Strategy::Partition:
      // B is even, so local parity equals global parity: two cubes of one
      // class are at least 2 apart along some axis and share no edge.
      for (int parity = 0; parity < 8; ++parity) {
        executor_.parallel_for(blocks.size(), [&](std::size_t bi) { run_block(*blocks[bi], parity); });
      }
      break;
  }
  foreign_ = merge(foreign);

  // Positions: every occupied slot owned by a cube of this pass, plus the
  // required vertices whose owners lie outside it.
  executor_.parallel_for(blocks.size(), [&](std::size_t bi) {
    for (const Cube& cube : blocks[bi]->cubes) {
      for (const auto& slot : cube.edge_vertex) {
        const VertexId id = slot.load(std::memory_order_acquire);
        if (id != kNone) update_position(id);
      }
    }
  });
  executor_.parallel_for(foreign_.size(), [&](std::size_t i) { update_position(foreign_[i]); });
}

void Mesher::update_position(VertexId id) {
  Vertex& v = store_.vertices()[id];
  const CornerSample s0 = store_.corner_sample(v.edge.cube);
  const CornerSample s1 = store_.corner_sample(step(v.edge.cube, v.edge.axis));
  if (s0.weight == 0 || s1.weight == 0) return;
  const Eigen::Vector3d p0 = store_.corner_position(v.edge.cube);
  bool degenerate = false;
  const Eigen::Vector3d p =
      interpolate_vertex(s0.tsdf, s1.tsdf, p0, p0 + axis_unit(v.edge.axis) * store_.cube_size(), &degenerate);
  if (degenerate) degenerate_.fetch_add(1, std::memory_order_relaxed);
  v.position = p.cast<float>();
}

void Mesher::triangulate_cube(Cube& cube, CubeCoord c, const BlockNeighborhood& hood,
                              std::vector<VertexId>& orphaned) {
  if (cube.type_curr == cube.type_prev) return;
  auto& vertices = store_.vertices();
  auto& triangles = store_.triangles();

  for (TriangleId& t : cube.triangles) {
    if (t == kNone) continue;
    for (const VertexId v : triangles[t].v) {
      if (vertices[v].refcount.fetch_sub(1, std::memory_order_acq_rel) == 1) orphaned.push_back(v);
    }
    triangles.release(t);
    t = kNone;
    triangles_freed_.fetch_add(1, std::memory_order_relaxed);
  }

  const mc::Lookup layout = mc::lookup(cube.type_curr);
  for (int i = 0; i < layout.triangle_count; ++i) {
    std::array<VertexId, 3> ids{};
    for (int j = 0; j < 3; ++j) {
      const EdgeKey key = mc::edge_key(c, layout.layout[3 * i + kWinding[j]]);
      const Cube* owner = hood.cube(key.cube);
      const VertexId id = owner ? owner->edge_vertex[static_cast<int>(key.axis)].load(std::memory_order_acquire) : kNone;
      if (id == kNone || id == kPending) {
        throw ConsistencyError("triangle references an empty edge slot");
      }
      ids[j] = id;
    }
    const TriangleId t = triangles.allocate();
    triangles[t].v = ids;
    for (const VertexId v : ids) vertices[v].refcount.fetch_add(1, std::memory_order_acq_rel);
    cube.triangles[i] = t;
    triangles_allocated_.fetch_add(1, std::memory_order_relaxed);
  }
}

void Mesher::triangulate(std::span<Block* const> blocks) {
  tbb::enumerable_thread_specific<std::vector<VertexId>> orphaned;
  executor_.parallel_for(blocks.size(), [&](std::size_t bi) {
    Block& block = *blocks[bi];
    const BlockNeighborhood hood(store_, block.coord);
    auto& out = orphaned.local();
    for (int i = 0; i < kCubesPerBlock; ++i) {
      const CubeCoord c = CubeCoord::from_local(block.coord, i % kBlockSide, (i / kBlockSide) % kBlockSide,
                                                i / (kBlockSide * kBlockSide));
      triangulate_cube(block.cubes[i], c, hood, out);
    }
  });
  orphaned_ = merge(orphaned);
}

void Mesher::garbage_collect() {
  auto& vertices = store_.vertices();
  for (const VertexId id : orphaned_) {
    if (!vertices.is_live(id) || vertices[id].refcount.load(std::memory_order_acquire) != 0) continue;
    std::atomic<VertexId>* slot = store_.resolve_edge(vertices[id].edge);
    if (!slot || slot->load(std::memory_order_acquire) != id) {
      throw ConsistencyError("orphaned vertex " + std::to_string(id) + " not found in its edge slot");
    }
    slot->store(kNone, std::memory_order_release);
    store_.free_vertex(id);
    ++vertices_freed_;
  }
}

Eigen::Vector3f Mesher::estimate_normal(VertexId id) const {
  const Vertex& v = store_.vertices()[id];
  const CubeCoord c0 = v.edge.cube;
  const CubeCoord c1 = step(c0, v.edge.axis);
  const BlockNeighborhood hood(store_, c0.block());

  auto sample = [&](CubeCoord c, double& out) {
    const Cube* cube = hood.cube(c);
    if (!cube || cube->weight == 0) return false;
    out = cube->tsdf;
    return true;
  };
  auto gradient = [&](CubeCoord c, Eigen::Vector3d& g) {
    for (int a = 0; a < 3; ++a) {
      double lo = 0.0, hi = 0.0;
      if (!sample(step(c, static_cast<Axis>(a), -1), lo) || !sample(step(c, static_cast<Axis>(a), 1), hi)) {
        return false;
      }
      g[a] = 0.5 * (hi - lo);
    }
    return true;
  };

  double d0 = 0.0, d1 = 0.0;
  const bool have_ends = sample(c0, d0) && sample(c1, d1);
  Eigen::Vector3d g0, g1;
  if (have_ends && gradient(c0, g0) && gradient(c1, g1)) {
    const double t = d0 == d1 ? 0.5 : std::clamp(d0 / (d0 - d1), 0.0, 1.0);
    const Eigen::Vector3d g = (1.0 - t) * g0 + t * g1;
    if (g.norm() > 1e-12) return g.normalized().cast<float>();
  }

  // Fallback: area-weighted face normals of the incident triangles, found
  // in the four cubes sharing this edge.
  const int a = static_cast<int>(v.edge.axis);
  const int b = (a + 1) % 3;
  const int c = (a + 2) % 3;
  Eigen::Vector3d sum = Eigen::Vector3d::Zero();
  const auto& vertices = store_.vertices();
  const auto& triangles = store_.triangles();
  for (int db = 0; db <= 1; ++db) {
    for (int dc = 0; dc <= 1; ++dc) {
      int off[3] = {0, 0, 0};
      off[b] = -db;
      off[c] = -dc;
      const Cube* cube = hood.cube(c0.offset(off[0], off[1], off[2]));
      if (!cube) continue;
      for (const TriangleId t : cube->triangles) {
        if (t == kNone) continue;
        const auto& tri = triangles[t].v;
        if (tri[0] != id && tri[1] != id && tri[2] != id) continue;
        const Eigen::Vector3d p0 = vertices[tri[0]].position.cast<double>();
        const Eigen::Vector3d p1 = vertices[tri[1]].position.cast<double>();
        const Eigen::Vector3d p2 = vertices[tri[2]].position.cast<double>();
        sum += (p1 - p0).cross(p2 - p0);
      }
    }
  }
  if (sum.norm() > 1e-20) return sum.normalized().cast<float>();

  Eigen::Vector3d along = axis_unit(v.edge.axis);
  if (have_ends && d1 < d0) along = -along;
  return along.cast<float>();
}

void Mesher::compute_normals(std::span<Block* const> blocks) {
  auto& vertices = store_.vertices();
  executor_.parallel_for(blocks.size(), [&](std::size_t bi) {
    for (const Cube& cube : blocks[bi]->cubes) {
      for (const auto& slot : cube.edge_vertex) {
        const VertexId id = slot.load(std::memory_order_acquire);
        if (id != kNone) vertices[id].normal = estimate_normal(id);
      }
    }
  });
  executor_.parallel_for(foreign_.size(), [&](std::size_t i) {
    const VertexId id = foreign_[i];
    if (vertices.is_live(id)) vertices[id].normal = estimate_normal(id);
  });
}

void Mesher::rebuild_loose(std::span<Block* const> blocks) {
  const auto& vertices = store_.vertices();
  const auto& triangles = store_.triangles();
  executor_.parallel_for(blocks.size(), [&](std::size_t bi) {
    Block& block = *blocks[bi];
    block.loose.clear();
    for (const Cube& cube : block.cubes) {
      for (const TriangleId t : cube.triangles) {
        if (t == kNone) continue;
        const auto& tri = triangles[t].v;
        block.loose.push_back({vertices[tri[0]].position, vertices[tri[1]].position, vertices[tri[2]].position});
      }
    }
  });
}

MeshReport Mesher::end_pass() {
  MeshReport r;
  r.blocks = pass_blocks_;
  r.typed_cubes = typed_;
  r.irregular_cubes = irregular_;
  r.refined_cubes = refined_;
  r.vertices_allocated = vertices_allocated_;
  r.vertices_freed = vertices_freed_;
  r.triangles_allocated = triangles_allocated_;
  r.triangles_freed = triangles_freed_;
  r.degenerate_edges = degenerate_;
  return r;
}

MeshReport Mesher::extract_frame(std::span<Block* const> blocks, const MeshParams& params,
                                 std::int32_t frame_index) {
  std::vector<Block*> list(blocks.begin(), blocks.end());
  std::sort(list.begin(), list.end(), [](const Block* a, const Block* b) { return a->coord < b->coord; });
  list.erase(std::unique(list.begin(), list.end()), list.end());

  begin_pass(list, frame_index);
  type_cubes(list, params.refine);
  place_vertices(list, params.strategy);
  triangulate(list);
  garbage_collect();
  compute_normals(list);
  if (params.loose_baseline) rebuild_loose(list);
  return end_pass();
}

}  // namespace cubemesh
