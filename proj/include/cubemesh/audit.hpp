#pragma once

#include <cstddef>
#include <cstdint>

#include "cubemesh/spatial_store.hpp"

namespace cubemesh::audit {

/// Live vertices whose refcount differs from the number of live triangles
/// that reference them, plus live triangles pointing at dead vertices.
std::size_t refcount_mismatches(const SpatialStore& store);

/// Live vertices sharing an EdgeKey with an earlier live vertex.
std::size_t duplicate_edge_keys(const SpatialStore& store);

/// Live vertices whose EdgeKey slot does not hold their own handle.
std::size_t slot_mismatches(const SpatialStore& store);

/// Distinct lattice edges with a sign change that belong to at least one
/// cube whose 8 corners are all observed. Computed from raw samples.
std::size_t crossing_edge_count(const SpatialStore& store);

struct Topology {
  std::size_t vertices = 0;
  std::size_t edges = 0;
  std::size_t faces = 0;
  std::size_t boundary_edges = 0;      // used by one triangle
  std::size_t nonmanifold_edges = 0;   // used by three or more
  std::size_t degenerate_faces = 0;    // repeated vertex index
  std::size_t unreferenced_vertices = 0;

  std::int64_t euler() const {
    return static_cast<std::int64_t>(vertices) - static_cast<std::int64_t>(edges) + static_cast<std::int64_t>(faces);
  }
  bool closed_manifold() const { return boundary_edges == 0 && nonmanifold_edges == 0 && degenerate_faces == 0; }
};

Topology topology(const CompactMesh& mesh);

}  // namespace cubemesh::audit
