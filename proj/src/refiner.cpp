#include "cubemesh/refiner.hpp"

#include <cmath>

namespace cubemesh {

std::optional<std::uint8_t> detect_disturbance(std::uint8_t t_curr, std::uint8_t t_prev,
                                               std::span<const double, 8> corners, double epsilon) {
  if (hamming(t_curr, t_prev) > 3) return std::nullopt;

  std::optional<std::uint8_t> best;
  int best_distance = 4;
  for (const std::uint8_t regular : kRegularTypes) {
    const int distance = hamming(t_curr, regular);
    if (distance > 3 || distance >= best_distance) continue;
    const std::uint8_t differing = t_curr ^ regular;
    bool small = true;
    for (int k = 0; k < 8 && small; ++k) {
      if ((differing >> k) & 1u) small = std::abs(corners[k]) < epsilon;
    }
    if (!small) continue;
    best = regular;
    best_distance = distance;
  }
  return best;
}

}  // namespace cubemesh
