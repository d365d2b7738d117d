#include "cubemesh/audit.hpp"

#include <algorithm>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

namespace cubemesh::audit {

std::size_t refcount_mismatches(const SpatialStore& store) {
  std::unordered_map<VertexId, std::int32_t> incident;
  std::size_t bad = 0;
  store.triangles().for_each_live([&](TriangleId, const Triangle& t) {
    for (const VertexId v : t.v) {
      if (!store.vertices().is_live(v)) ++bad;
      ++incident[v];
    }
  });
  store.vertices().for_each_live([&](VertexId id, const Vertex& v) {
    const auto it = incident.find(id);
    const std::int32_t expected = it == incident.end() ? 0 : it->second;
    if (v.refcount.load(std::memory_order_relaxed) != expected) ++bad;
  });
  return bad;
}

std::size_t duplicate_edge_keys(const SpatialStore& store) {
  std::unordered_set<EdgeKey, EdgeKeyHash> seen;
  std::size_t dup = 0;
  store.vertices().for_each_live([&](VertexId, const Vertex& v) {
    if (!seen.insert(v.edge).second) ++dup;
  });
  return dup;
}

std::size_t slot_mismatches(const SpatialStore& store) {
  std::size_t bad = 0;
  store.vertices().for_each_live([&](VertexId id, const Vertex& v) {
    const std::atomic<VertexId>* slot = store.resolve_edge(v.edge);
    if (slot == nullptr || slot->load(std::memory_order_relaxed) != id) ++bad;
  });
  return bad;
}

std::size_t crossing_edge_count(const SpatialStore& store) {
  // The 12 edges of a cube as (corner offset, axis).
  struct CubeEdge {
    int dx, dy, dz;
    Axis axis;
  };
  std::vector<CubeEdge> edges;
  for (int a = 0; a < 3; ++a) {
    for (int u = 0; u < 2; ++u) {
      for (int v = 0; v < 2; ++v) {
        int off[3] = {0, 0, 0};
        off[(a + 1) % 3] = u;
        off[(a + 2) % 3] = v;
        edges.push_back({off[0], off[1], off[2], static_cast<Axis>(a)});
      }
    }
  }

  std::unordered_set<EdgeKey, EdgeKeyHash> crossing;
  for (const Block* block : store.block_table().blocks()) {
    for (int lz = 0; lz < kBlockSide; ++lz) {
      for (int ly = 0; ly < kBlockSide; ++ly) {
        for (int lx = 0; lx < kBlockSide; ++lx) {
          const CubeCoord c = CubeCoord::from_local(block->coord, lx, ly, lz);
          bool observed = true;
          for (int k = 0; k < 8 && observed; ++k) {
            observed = store.corner_sample(c.offset(k & 1, (k >> 1) & 1, (k >> 2) & 1)).weight > 0;
          }
          if (!observed) continue;
          for (const CubeEdge& e : edges) {
            const CubeCoord a = c.offset(e.dx, e.dy, e.dz);
            const CubeCoord b = a.offset(e.axis == Axis::X, e.axis == Axis::Y, e.axis == Axis::Z);
            const bool inside_a = store.corner_sample(a).tsdf < 0.0;
            const bool inside_b = store.corner_sample(b).tsdf < 0.0;
            if (inside_a != inside_b) crossing.insert({a, e.axis});
          }
        }
      }
    }
  }
  return crossing.size();
}

Topology topology(const CompactMesh& mesh) {
  Topology t;
  t.vertices = mesh.vertex_count();
  t.faces = mesh.triangle_count();
  std::unordered_map<std::uint64_t, int> edge_use;
  std::vector<bool> referenced(t.vertices, false);
  for (std::size_t f = 0; f < t.faces; ++f) {
    const std::uint32_t* v = &mesh.indices[3 * f];
    if (v[0] == v[1] || v[1] == v[2] || v[0] == v[2]) ++t.degenerate_faces;
    for (int k = 0; k < 3; ++k) {
      referenced[v[k]] = true;
      const std::uint64_t a = std::min(v[k], v[(k + 1) % 3]);
      const std::uint64_t b = std::max(v[k], v[(k + 1) % 3]);
      ++edge_use[(a << 32) | b];
    }
  }
  t.edges = edge_use.size();
  for (const auto& [key, uses] : edge_use) {
    if (uses == 1) ++t.boundary_edges;
    if (uses > 2) ++t.nonmanifold_edges;
  }
  t.unreferenced_vertices = static_cast<std::size_t>(std::count(referenced.begin(), referenced.end(), false));
  return t;
}

}  // namespace cubemesh::audit
