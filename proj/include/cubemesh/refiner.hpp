#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <optional>
#include <span>

namespace cubemesh {

/// Cube types whose surface is a single quad splitting the cube parallel
/// to a face pair. Under the corner numbering of mc_tables.hpp they are,
/// in order: +y half, -y half, x=0 half, x=1 half, top half, bottom half
/// (bit set = below the isovalue).
inline constexpr std::array<std::uint8_t, 6> kRegularTypes = {0xCC, 0x33, 0x99, 0x66, 0xF0, 0x0F};

struct RefineParams {
  double epsilon = 0.1;  // normalized tsdf units
  bool enabled = false;
};

constexpr int hamming(std::uint8_t a, std::uint8_t b) { return std::popcount(static_cast<unsigned>(a ^ b)); }

constexpr bool is_regular(std::uint8_t t) {
  for (const std::uint8_t r : kRegularTypes) {
    if (r == t) return true;
  }
  return false;
}

/// Non-empty and not one of the six regular types.
constexpr bool is_irregular(std::uint8_t t) { return t != 0x00 && t != 0xFF && !is_regular(t); }

/// Regular type that t_curr is a small disturbance of, if any.
///
/// A candidate r qualifies when hamming(t_curr, t_prev) <= 3,
/// hamming(t_curr, r) <= 3, and every corner where t_curr and r disagree
/// has |tsdf| < epsilon. Among qualifying candidates the one closest to
/// t_curr wins; ties go to the earlier entry of kRegularTypes.
std::optional<std::uint8_t> detect_disturbance(std::uint8_t t_curr, std::uint8_t t_prev,
                                               std::span<const double, 8> corners, double epsilon);

}  // namespace cubemesh
