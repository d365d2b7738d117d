#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>

#include "cubemesh/mesher.hpp"
#include "cubemesh/refiner.hpp"

using namespace cubemesh;

namespace {

std::array<double, 8> filled(double v) {
  std::array<double, 8> a{};
  a.fill(v);
  return a;
}

// Plane z = 0.44 over block (0,0,0) with l = 0.1 and tau = 0.3.
void plane(SpatialStore& store) {
  Block& b = store.get_or_allocate_block({0, 0, 0});
  for (int i = 0; i < kCubesPerBlock; ++i) {
    const double z = (i / 64) * 0.1;
    b.cubes[i].tsdf = std::clamp((z - 0.44) / 0.3, -1.0, 1.0);
    b.cubes[i].weight = 1;
  }
}

}  // namespace

TEST_CASE("hamming distance counts differing bits") {
  CHECK(hamming(0x00, 0x00) == 0);
  CHECK(hamming(0x00, 0xFF) == 8);
  CHECK(hamming(0x0F, 0x0E) == 1);
  CHECK(hamming(0xCC, 0x33) == 8);
  CHECK(hamming(0xCC, 0xF0) == 4);
  CHECK(hamming(0b10100000, 0b00000101) == 4);
}

TEST_CASE("regular types are the six axis-aligned half splits") {
  // Independent construction: corners with coordinate d equal to s.
  const std::array<std::array<int, 3>, 8> offset = {{
      {0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}, {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1},
  }};
  std::array<std::uint8_t, 6> halves{};
  int n = 0;
  for (int d = 0; d < 3; ++d) {
    for (int s = 0; s < 2; ++s) {
      std::uint8_t t = 0;
      for (int k = 0; k < 8; ++k) {
        if (offset[k][d] == s) t |= static_cast<std::uint8_t>(1u << k);
      }
      halves[n++] = t;
    }
  }
  std::sort(halves.begin(), halves.end());
  std::array<std::uint8_t, 6> regular = kRegularTypes;
  std::sort(regular.begin(), regular.end());
  CHECK(halves == regular);

  CHECK(is_regular(0xF0));
  CHECK_FALSE(is_regular(0xF1));
  CHECK_FALSE(is_irregular(0x00));
  CHECK_FALSE(is_irregular(0xFF));
  CHECK_FALSE(is_irregular(0x33));
  CHECK(is_irregular(0x01));
  CHECK(is_irregular(0x3B));
}

TEST_CASE("small disturbance of a regular type is snapped back") {
  auto corners = filled(0.8);
  corners[0] = 0.05;
  // 0x0F with corner 0 flipped positive.
  CHECK(detect_disturbance(0x0E, 0x0F, corners, 0.1) == std::optional<std::uint8_t>(0x0F));
  // The flipped corner is not close to the isovalue.
  corners[0] = 0.3;
  CHECK_FALSE(detect_disturbance(0x0E, 0x0F, corners, 0.1).has_value());
  // Larger epsilon accepts it.
  CHECK(detect_disturbance(0x0E, 0x0F, corners, 0.35) == std::optional<std::uint8_t>(0x0F));
}

TEST_CASE("history gate rejects large jumps") {
  const auto corners = filled(0.01);
  CHECK(detect_disturbance(0x0E, 0x0F, corners, 0.1).has_value());
  CHECK(detect_disturbance(0x0E, 0x00, corners, 0.1).has_value());   // hamming 3
  CHECK_FALSE(detect_disturbance(0x0E, 0xF0, corners, 0.1).has_value());  // hamming 7
}

TEST_CASE("types three or more flips away from every regular type stay") {
  const auto corners = filled(0.01);
  // 0x01 is 3 away from 0x0F, 0x33 and 0x99; the earliest in table order wins.
  CHECK(detect_disturbance(0x01, 0x00, corners, 0.1) == std::optional<std::uint8_t>(0x33));
  // The checkerboard 0x5A is 4 away from every regular type.
  for (const std::uint8_t r : kRegularTypes) CHECK(hamming(0x5A, r) == 4);
  CHECK_FALSE(detect_disturbance(0x5A, 0x5A, corners, 0.1).has_value());
}

TEST_CASE("closest regular type wins") {
  auto corners = filled(0.01);
  // 0x0E: distance 1 to 0x0F, distance 3 to 0x66 (0x0E ^ 0x66 = 0x68).
  CHECK(hamming(0x0E, 0x66) == 3);
  CHECK(detect_disturbance(0x0E, 0x0E, corners, 0.1) == std::optional<std::uint8_t>(0x0F));
}

TEST_CASE("a regular type maps to itself") {
  const auto corners = filled(0.9);
  for (const std::uint8_t r : kRegularTypes) {
    CHECK(detect_disturbance(r, r, corners, 0.1) == std::optional<std::uint8_t>(r));
  }
}

TEST_CASE("refinement in the mesher removes a one-corner bump") {
  const Executor ex(1);
  for (const bool enabled : {false, true}) {
    SpatialStore store({.cube_size = 0.1});
    plane(store);
    Mesher m(store, ex);
    const auto blocks = store.block_table().blocks();
    const MeshParams params{.strategy = Strategy::Serial, .refine = {.epsilon = 0.1, .enabled = enabled}};
    const MeshReport first = m.extract_frame(blocks, params, 0);
    CHECK(first.irregular_cubes == 0);
    CHECK(first.refined_cubes == 0);

    // Corner (3,3,4) sits just below the plane; push it just above.
    Cube* c = store.find_cube({3, 3, 4});
    REQUIRE(c->tsdf == doctest::Approx(-0.04 / 0.3));
    c->tsdf = 0.05;
    const MeshReport second = m.extract_frame(blocks, params, 1);
    if (!enabled) {
      CHECK(second.irregular_cubes == 8);
      CHECK(second.refined_cubes == 0);
      continue;
    }
    // The four cubes above keep the plane type. The four below were fully
    // inside and are not near any regular type.
    CHECK(second.refined_cubes == 4);
    CHECK(second.irregular_cubes == 4);
    for (const auto& [x, y] : {std::pair{2, 2}, std::pair{3, 2}, std::pair{2, 3}, std::pair{3, 3}}) {
      CHECK(store.find_cube({x, y, 4})->type_curr == 0x0F);
    }

    // The vertical edge from the disturbed corner no longer has a sign
    // change; its vertex extrapolates below the corner by a / (m - a) * l.
    const double a = 0.05;
    const double top = (0.5 - 0.44) / 0.3;
    const VertexId v = c->edge_vertex[static_cast<int>(Axis::Z)].load();
    REQUIRE(v != kNone);
    const double z = store.vertices()[v].position.z();
    const double overshoot = (0.4 - z) / 0.1;
    CHECK(overshoot == doctest::Approx(a / (top - a)).epsilon(1e-5));
    // Bound for m > epsilon: a < epsilon, so the overshoot is below epsilon / (m - epsilon).
    CHECK(overshoot < 0.1 / (top - 0.1));
  }
}
