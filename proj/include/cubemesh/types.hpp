#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

namespace cubemesh {

/// Cubes per block side. A block holds kBlockSide^3 cubes.
inline constexpr int kBlockSide = 8;
inline constexpr int kCubesPerBlock = kBlockSide * kBlockSide * kBlockSide;

using VertexId = std::uint32_t;
using TriangleId = std::uint32_t;
inline constexpr std::uint32_t kNone = 0xFFFFFFFFu;

/// Floor division for signed lattice indices.
constexpr int floor_div(int a, int b) {
  const int q = a / b;
  return (a % b != 0 && ((a < 0) != (b < 0))) ? q - 1 : q;
}

struct BlockCoord {
  int x = 0;
  int y = 0;
  int z = 0;

  friend constexpr auto operator<=>(const BlockCoord&, const BlockCoord&) = default;
};

/// Global lattice index of a cube. The cube's corner sample sits at
/// (x, y, z) * cube_size; the owning block and local index are derived.
struct CubeCoord {
  int x = 0;
  int y = 0;
  int z = 0;

  static constexpr CubeCoord from_local(BlockCoord b, int lx, int ly, int lz) {
    return {b.x * kBlockSide + lx, b.y * kBlockSide + ly, b.z * kBlockSide + lz};
  }

  constexpr BlockCoord block() const {
    return {floor_div(x, kBlockSide), floor_div(y, kBlockSide), floor_div(z, kBlockSide)};
  }
  constexpr int local_x() const { return x - floor_div(x, kBlockSide) * kBlockSide; }
  constexpr int local_y() const { return y - floor_div(y, kBlockSide) * kBlockSide; }
  constexpr int local_z() const { return z - floor_div(z, kBlockSide) * kBlockSide; }
  /// Linear index of the cube inside its block (x fastest).
  constexpr int local_index() const {
    return local_x() + kBlockSide * (local_y() + kBlockSide * local_z());
  }
  constexpr CubeCoord offset(int dx, int dy, int dz) const { return {x + dx, y + dy, z + dz}; }

  friend constexpr auto operator<=>(const CubeCoord&, const CubeCoord&) = default;
};

enum class Axis : std::uint8_t { X = 0, Y = 1, Z = 2 };

/// A lattice edge, named by the cube whose corner is its minimal endpoint
/// and the axis it extends along.
struct EdgeKey {
  CubeCoord cube;
  Axis axis = Axis::X;

  friend constexpr auto operator<=>(const EdgeKey&, const EdgeKey&) = default;
};

struct BlockCoordHash {
  std::size_t operator()(const BlockCoord& c) const noexcept {
    return (static_cast<std::size_t>(static_cast<std::uint32_t>(c.x)) * 73856093u) ^
           (static_cast<std::size_t>(static_cast<std::uint32_t>(c.y)) * 19349663u) ^
           (static_cast<std::size_t>(static_cast<std::uint32_t>(c.z)) * 83492791u);
  }
};

struct EdgeKeyHash {
  std::size_t operator()(const EdgeKey& k) const noexcept {
    std::size_t h = BlockCoordHash{}(BlockCoord{k.cube.x, k.cube.y, k.cube.z});
    return h * 3 + static_cast<std::size_t>(k.axis);
  }
};

/// A fixed-capacity store ran out of room. Nothing is evicted.
class CapacityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An internal invariant was violated (phase-order bug, double free).
class ConsistencyError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Malformed or inconsistent input data.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace cubemesh
