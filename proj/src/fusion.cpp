#include "cubemesh/fusion.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

#include <tbb/enumerable_thread_specific.h>

namespace cubemesh {

double truncate(double sdf_metric, double tau) { return std::clamp(sdf_metric / tau, -1.0, 1.0); }

void fuse_sample(Cube& cube, double observed_tsdf, int max_weight) {
  // d' = (w d + d~) / (w + 1), written as an increment so that folding in
  // the stored value itself leaves it bit-identical.
  const int w = cube.weight;
  cube.tsdf += (observed_tsdf - cube.tsdf) / static_cast<double>(w + 1);
  cube.weight = static_cast<std::uint16_t>(std::min(w + 1, max_weight));
}

std::vector<BlockCoord> collect_blocks(const DepthFrame& frame, const Pose& pose, const Intrinsics& K,
                                       const FusionParams& params, double block_extent,
                                       const Executor& executor) {
  tbb::enumerable_thread_specific<std::vector<BlockCoord>> local;
  const double max_step = 0.5 * block_extent;

  executor.parallel_for(static_cast<std::size_t>(frame.height), [&](std::size_t row) {
    auto& out = local.local();
    const int v = static_cast<int>(row);
    for (int u = 0; u < frame.width; ++u) {
      const double depth = frame.at(u, v);
      if (!(depth > 0.0) || depth > params.max_range) continue;
      // r(lambda) = t + lambda R D K^-1 p~
      const Eigen::Vector3d ray = pose.rotation * K.backproject(u, v, depth);
      const double delta = params.truncation / depth;
      const double span = 2.0 * delta * ray.norm();
      const int steps = std::max(1, static_cast<int>(std::ceil(span / max_step)));
      BlockCoord last{0, 0, 0};
      bool have_last = false;
      for (int s = 0; s <= steps; ++s) {
        const double lambda = 1.0 - delta + 2.0 * delta * s / steps;
        const Eigen::Vector3d p = pose.translation + lambda * ray;
        const BlockCoord b{static_cast<int>(std::floor(p.x() / block_extent)),
                           static_cast<int>(std::floor(p.y() / block_extent)),
                           static_cast<int>(std::floor(p.z() / block_extent))};
        if (have_last && b == last) continue;
        out.push_back(b);
        last = b;
        have_last = true;
      }
    }
    // Keep per-thread buffers bounded on large frames.
    if (out.size() > (1u << 16)) {
      std::sort(out.begin(), out.end());
      out.erase(std::unique(out.begin(), out.end()), out.end());
    }
  });

  std::vector<BlockCoord> blocks;
  for (auto& part : local) blocks.insert(blocks.end(), part.begin(), part.end());
  std::sort(blocks.begin(), blocks.end());
  blocks.erase(std::unique(blocks.begin(), blocks.end()), blocks.end());
  return blocks;
}

void allocate_blocks(SpatialStore& store, std::span<const BlockCoord> blocks, const Executor& executor) {
  executor.parallel_for(blocks.size(), [&](std::size_t i) { store.get_or_allocate_block(blocks[i]); });
}

std::size_t integrate_frame(SpatialStore& store, std::span<const BlockCoord> blocks, const DepthFrame& frame,
                            const Pose& pose, const Intrinsics& K, const FusionParams& params,
                            const Executor& executor) {
  const Pose world_to_camera = pose.inverse();
  const double tau = params.truncation;
  std::atomic<std::size_t> updated{0};

  executor.parallel_for(blocks.size(), [&](std::size_t bi) {
    Block* block = store.find_block(blocks[bi]);
    if (!block) return;
    std::size_t count = 0;
    for (int lz = 0; lz < kBlockSide; ++lz) {
      for (int ly = 0; ly < kBlockSide; ++ly) {
        for (int lx = 0; lx < kBlockSide; ++lx) {
          const CubeCoord c = CubeCoord::from_local(block->coord, lx, ly, lz);
          const Eigen::Vector3d p_cam = world_to_camera * store.corner_position(c);
          if (p_cam.z() <= 0.0) continue;
          const Eigen::Vector2d px = K.project(p_cam);
          const int u = static_cast<int>(std::lround(px.x()));
          const int v = static_cast<int>(std::lround(px.y()));
          if (u < 0 || v < 0 || u >= frame.width || v >= frame.height) continue;
          const double depth = frame.at(u, v);
          if (!(depth > 0.0) || depth > params.max_range) continue;
          const double sdf = depth - p_cam.z();
          if (sdf < -tau) continue;
          fuse_sample(block->at(lx, ly, lz), truncate(sdf, tau), params.max_weight);
          ++count;
        }
      }
    }
    updated.fetch_add(count, std::memory_order_relaxed);
  });
  return updated.load();
}

}  // namespace cubemesh
