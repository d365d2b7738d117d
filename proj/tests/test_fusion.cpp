#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "cubemesh/fusion.hpp"

using namespace cubemesh;

namespace {

Intrinsics small_camera(int w, int h, double f) {
  Intrinsics K;
  K.fx = K.fy = f;
  K.cx = (w - 1) / 2.0;
  K.cy = (h - 1) / 2.0;
  K.width = w;
  K.height = h;
  return K;
}

DepthFrame flat_frame(int w, int h, float depth) {
  DepthFrame f(w, h);
  std::fill(f.depth.begin(), f.depth.end(), depth);
  return f;
}

}  // namespace

TEST_CASE("truncate clamps the scaled distance") {
  CHECK(truncate(0.03, 0.06) == doctest::Approx(0.5));
  CHECK(truncate(-0.03, 0.06) == doctest::Approx(-0.5));
  CHECK(truncate(0.0, 0.06) == 0.0);
  CHECK(truncate(1.0, 0.06) == 1.0);
  CHECK(truncate(-0.2, 0.06) == -1.0);
}

TEST_CASE("fuse_sample keeps a running average") {
  Cube c;
  fuse_sample(c, 0.5, 128);
  CHECK(c.tsdf == 0.5);
  CHECK(c.weight == 1);
  fuse_sample(c, -0.5, 128);
  CHECK(c.tsdf == 0.0);
  CHECK(c.weight == 2);
  fuse_sample(c, 0.3, 128);
  CHECK(c.tsdf == doctest::Approx(0.1));
  CHECK(c.weight == 3);
}

TEST_CASE("fuse_sample weight saturates") {
  Cube c;
  for (int i = 0; i < 300; ++i) fuse_sample(c, 1.0, 128);
  CHECK(c.weight == 128);
  CHECK(c.tsdf == 1.0);
  // At the cap a new observation moves the value by 1 / (w_max + 1).
  fuse_sample(c, 0.0, 128);
  CHECK(c.weight == 128);
  CHECK(c.tsdf == doctest::Approx(1.0 - 1.0 / 129.0));
}

TEST_CASE("folding in the stored value is a no-op on the value") {
  Cube c;
  fuse_sample(c, 0.123456789, 128);
  fuse_sample(c, -0.987654321, 128);
  const double stored = c.tsdf;
  fuse_sample(c, stored, 128);
  CHECK(c.tsdf == stored);
}

TEST_CASE("running average is order insensitive below the cap") {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::vector<double> obs(100);
  for (double& o : obs) o = dist(rng);
  const double mean = std::accumulate(obs.begin(), obs.end(), 0.0) / obs.size();
  for (int trial = 0; trial < 5; ++trial) {
    std::shuffle(obs.begin(), obs.end(), rng);
    Cube c;
    for (const double o : obs) fuse_sample(c, o, 128);
    CHECK(std::abs(c.tsdf - mean) < 1e-12);
    CHECK(c.weight == 100);
  }
}

TEST_CASE("a single ray at 1 m touches two blocks") {
  // Band [1 - 0.06, 1 + 0.06] along the optical axis; blocks are 0.24 m.
  DepthFrame f(1, 1);
  f.at(0, 0) = 1.0f;
  Intrinsics K = small_camera(1, 1, 1.0);
  const FusionParams params{.truncation = 0.06, .max_weight = 128, .max_range = 5.0};
  const Executor ex(1);
  const auto blocks = collect_blocks(f, Pose{}, K, params, 8 * 0.03, ex);
  REQUIRE(blocks.size() == 2);
  CHECK(blocks[0] == BlockCoord{0, 0, 3});
  CHECK(blocks[1] == BlockCoord{0, 0, 4});
}

TEST_CASE("long rays are sampled densely enough") {
  // A grazing ray spanning several blocks must not skip any of them.
  DepthFrame f(1, 1);
  f.at(0, 0) = 1.0f;
  Intrinsics K = small_camera(1, 1, 1.0);
  const FusionParams params{.truncation = 0.9, .max_weight = 128, .max_range = 5.0};
  const auto blocks = collect_blocks(f, Pose{}, K, params, 0.08, Executor(1));
  // lambda in [0.1, 1.9] -> z in [0.1, 1.9] -> blocks 1 .. 23
  REQUIRE(blocks.size() == 23);
  for (int i = 0; i < 23; ++i) CHECK(blocks[i] == BlockCoord{0, 0, i + 1});
}

TEST_CASE("invalid and out-of-range pixels contribute nothing") {
  const Intrinsics K = small_camera(16, 12, 20.0);
  const FusionParams params{.truncation = 0.09, .max_weight = 128, .max_range = 5.0};
  CHECK(collect_blocks(flat_frame(16, 12, 0.0f), Pose{}, K, params, 0.24, Executor(1)).empty());
  CHECK(collect_blocks(flat_frame(16, 12, 6.0f), Pose{}, K, params, 0.24, Executor(1)).empty());
  CHECK(collect_blocks(flat_frame(16, 12, std::nanf("")), Pose{}, K, params, 0.24, Executor(1)).empty());
}

TEST_CASE("collect_blocks does not allocate") {
  SpatialStore store;
  const Intrinsics K = small_camera(16, 12, 20.0);
  collect_blocks(flat_frame(16, 12, 1.0f), Pose{}, K, {}, store.block_extent(), Executor(1));
  CHECK(store.block_table().size() == 0);
}

TEST_CASE("fronto-parallel wall fuses to its signed distance") {
  const double l = 0.02;
  const double tau = 0.06;
  SpatialStore store({.cube_size = l});
  const int w = 64;
  const int h = 48;
  const Intrinsics K = small_camera(w, h, 60.0);
  const DepthFrame f = flat_frame(w, h, 1.0f);
  const FusionParams params{.truncation = tau, .max_weight = 128, .max_range = 5.0};
  const Executor ex(2);

  const auto blocks = collect_blocks(f, Pose{}, K, params, store.block_extent(), ex);
  allocate_blocks(store, blocks, ex);
  CHECK(store.block_table().size() == blocks.size());
  const std::size_t updated = integrate_frame(store, blocks, f, Pose{}, K, params, ex);
  CHECK(updated > 0);

  // Corners on the optical axis: tsdf = clamp((1 - z) / tau).
  int checked = 0;
  for (int iz = 40; iz <= 60; ++iz) {
    const Cube* c = store.find_cube({0, 0, iz});
    if (!c) continue;
    const double z = iz * l;
    const double sdf = 1.0 - z;
    if (sdf < -tau) {
      CHECK(c->weight == 0);
      continue;
    }
    REQUIRE(c->weight == 1);
    CHECK(std::abs(c->tsdf - std::clamp(sdf / tau, -1.0, 1.0)) < 1e-6);
    ++checked;
  }
  CHECK(checked >= 6);
  const Cube* surface = store.find_cube({0, 0, 50});
  REQUIRE(surface != nullptr);
  CHECK(std::abs(surface->tsdf) < 1e-6);
  CHECK(store.find_cube({0, 0, 49})->tsdf > 0.0);
  CHECK(store.find_cube({0, 0, 51})->tsdf < 0.0);
}

TEST_CASE("repeated frames average and worker count does not change values") {
  const double l = 0.03;
  const Intrinsics K = small_camera(40, 30, 40.0);
  const FusionParams params{.truncation = 0.09, .max_weight = 128, .max_range = 5.0};
  std::vector<DepthFrame> frames;
  std::mt19937 rng(3);
  std::normal_distribution<float> noise(0.0f, 0.005f);
  for (int i = 0; i < 4; ++i) {
    DepthFrame f(40, 30);
    for (float& d : f.depth) d = 1.2f + noise(rng);
    frames.push_back(f);
  }

  auto run = [&](int workers) {
    SpatialStore store({.cube_size = l});
    const Executor ex(workers);
    for (const DepthFrame& f : frames) {
      const auto blocks = collect_blocks(f, Pose{}, K, params, store.block_extent(), ex);
      allocate_blocks(store, blocks, ex);
      integrate_frame(store, blocks, f, Pose{}, K, params, ex);
    }
    std::vector<std::pair<double, int>> values;
    for (const Block* b : store.block_table().blocks()) {
      for (const Cube& c : b->cubes) values.emplace_back(c.tsdf, c.weight);
    }
    return values;
  };
  const auto serial = run(1);
  CHECK(serial == run(4));

  // Independent recomputation for the on-axis corner nearest the wall.
  SpatialStore store({.cube_size = l});
  const Executor ex(1);
  for (const DepthFrame& f : frames) {
    const auto blocks = collect_blocks(f, Pose{}, K, params, store.block_extent(), ex);
    allocate_blocks(store, blocks, ex);
    integrate_frame(store, blocks, f, Pose{}, K, params, ex);
  }
  const int iz = 40;  // z = 1.2
  double sum = 0.0;
  int n = 0;
  const int u = static_cast<int>(std::lround(K.cx));
  const int v = static_cast<int>(std::lround(K.cy));
  for (const DepthFrame& f : frames) {
    const double sdf = f.at(u, v) - iz * l;
    if (sdf < -0.09) continue;
    sum += std::clamp(sdf / 0.09, -1.0, 1.0);
    ++n;
  }
  const Cube* c = store.find_cube({0, 0, iz});
  REQUIRE(c != nullptr);
  CHECK(c->weight == n);
  CHECK(c->tsdf == doctest::Approx(sum / n).epsilon(1e-12));
}

TEST_CASE("translated pose moves the fused surface") {
  const double l = 0.02;
  SpatialStore store({.cube_size = l});
  const Intrinsics K = small_camera(32, 24, 30.0);
  const DepthFrame f = flat_frame(32, 24, 1.0f);
  Pose pose;
  pose.translation = Eigen::Vector3d(0.0, 0.0, 0.5);
  const FusionParams params{.truncation = 0.06, .max_weight = 128, .max_range = 5.0};
  const Executor ex(1);
  const auto blocks = collect_blocks(f, pose, K, params, store.block_extent(), ex);
  allocate_blocks(store, blocks, ex);
  integrate_frame(store, blocks, f, pose, K, params, ex);
  // Wall at world z = 1.5 -> corner index 75.
  const Cube* c = store.find_cube({0, 0, 75});
  REQUIRE(c != nullptr);
  CHECK(c->weight == 1);
  CHECK(std::abs(c->tsdf) < 1e-6);
}
