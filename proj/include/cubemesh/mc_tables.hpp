#pragma once

#include <array>
#include <cstdint>

#include "cubemesh/types.hpp"

// Corner numbering (bit k of a cube type <-> corner k):
//
//        7 ---- 6          z
//       /|     /|          |  y
//      4 ---- 5 |          | /
//      | 3 ---|-2          |/
//      |/     |/           +---- x
//      0 ---- 1
//
// Edges: 0:(0,1) 1:(1,2) 2:(3,2) 3:(0,3) 4:(4,5) 5:(5,6) 6:(7,6) 7:(4,7)
//        8:(0,4) 9:(1,5) 10:(2,6) 11:(3,7), each listed minimal endpoint first.

namespace cubemesh::mc {

extern const std::array<std::uint16_t, 256> kEdgeMask;
extern const std::array<std::array<std::int8_t, 16>, 256> kTriLayout;

inline constexpr std::array<std::array<int, 3>, 8> kCornerOffset = {{
    {0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
    {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1},
}};

inline constexpr std::array<std::array<int, 2>, 12> kEdgeCorners = {{
    {0, 1}, {1, 2}, {3, 2}, {0, 3}, {4, 5}, {5, 6},
    {7, 6}, {4, 7}, {0, 4}, {1, 5}, {2, 6}, {3, 7},
}};

inline constexpr std::array<Axis, 12> kEdgeAxis = {
    Axis::X, Axis::Y, Axis::X, Axis::Y, Axis::X, Axis::Y,
    Axis::X, Axis::Y, Axis::Z, Axis::Z, Axis::Z, Axis::Z,
};

/// Edge e of cube c, expressed as the key of the cube that owns it.
constexpr EdgeKey edge_key(CubeCoord c, int e) {
  const auto& o = kCornerOffset[kEdgeCorners[e][0]];
  return {c.offset(o[0], o[1], o[2]), kEdgeAxis[e]};
}

inline int triangle_count(std::uint8_t type) {
  int n = 0;
  while (n < 5 && kTriLayout[type][3 * n] >= 0) ++n;
  return n;
}

struct Lookup {
  std::uint16_t edge_mask = 0;
  int triangle_count = 0;
  const std::int8_t* layout = nullptr;  // 3 * triangle_count edge indices
};

inline Lookup lookup(std::uint8_t type) {
  return {kEdgeMask[type], triangle_count(type), kTriLayout[type].data()};
}

}  // namespace cubemesh::mc
