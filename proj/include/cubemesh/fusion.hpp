#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "cubemesh/parallel.hpp"
#include "cubemesh/spatial_store.hpp"
#include "cubemesh/types.hpp"

namespace cubemesh {

/// Pinhole intrinsics. Pixel (u, v) has its center at integer coordinates.
struct Intrinsics {
  double fx = 525.0;
  double fy = 525.0;
  double cx = 319.5;
  double cy = 239.5;
  int width = 640;
  int height = 480;

  Eigen::Vector2d project(const Eigen::Vector3d& p_cam) const {
    return {fx * p_cam.x() / p_cam.z() + cx, fy * p_cam.y() / p_cam.z() + cy};
  }
  /// Camera-frame point at the given depth (z) behind pixel (u, v).
  Eigen::Vector3d backproject(double u, double v, double depth) const {
    return {(u - cx) / fx * depth, (v - cy) / fy * depth, depth};
  }
};

/// Rigid sensor-to-world transform.
struct Pose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  static Pose from_quaternion(const Eigen::Quaterniond& q, const Eigen::Vector3d& t) {
    return {q.normalized().toRotationMatrix(), t};
  }
  Eigen::Quaterniond quaternion() const { return Eigen::Quaterniond(rotation).normalized(); }

  Eigen::Vector3d operator*(const Eigen::Vector3d& p) const { return rotation * p + translation; }
  Pose operator*(const Pose& o) const { return {rotation * o.rotation, rotation * o.translation + translation}; }
  Pose inverse() const {
    const Eigen::Matrix3d rt = rotation.transpose();
    return {rt, -(rt * translation)};
  }
};

/// Depth image in meters; 0 marks an invalid pixel.
struct DepthFrame {
  int width = 0;
  int height = 0;
  std::int32_t frame_index = 0;
  std::vector<float> depth;

  DepthFrame() = default;
  DepthFrame(int w, int h, std::int32_t index = 0)
      : width(w), height(h), frame_index(index), depth(static_cast<std::size_t>(w) * h, 0.0f) {}

  float at(int u, int v) const { return depth[static_cast<std::size_t>(v) * width + u]; }
  float& at(int u, int v) { return depth[static_cast<std::size_t>(v) * width + u]; }
};

struct FusionParams {
  double truncation = 0.09;  // tau, meters
  int max_weight = 128;
  double max_range = 5.0;
};

/// Clamp-scale truncation: clamp(sdf / tau, -1, 1).
double truncate(double sdf_metric, double tau);

/// Blocks traversed by every valid pixel's ray over the band
/// lambda in [1 - tau/D, 1 + tau/D], sampled at most half a block apart.
/// Sorted, deduplicated. Nothing is allocated.
std::vector<BlockCoord> collect_blocks(const DepthFrame& frame, const Pose& pose, const Intrinsics& K,
                                       const FusionParams& params, double block_extent,
                                       const Executor& executor);

/// get_or_allocate_block over the collected set, in parallel.
void allocate_blocks(SpatialStore& store, std::span<const BlockCoord> blocks, const Executor& executor);

/// Weighted running average of truncated projective distances at every
/// cube corner of the given (allocated) blocks. Returns the number of
/// corners updated.
std::size_t integrate_frame(SpatialStore& store, std::span<const BlockCoord> blocks, const DepthFrame& frame,
                            const Pose& pose, const Intrinsics& K, const FusionParams& params,
                            const Executor& executor);

/// Fold one observation into a stored sample.
void fuse_sample(Cube& cube, double observed_tsdf, int max_weight);

}  // namespace cubemesh
