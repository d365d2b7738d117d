#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "cubemesh/fusion.hpp"

namespace cubemesh::synth {

/// Analytic primitives; the scene's signed distance is the minimum over them.
struct Plane {
  Eigen::Vector3d normal{0, 0, -1};  // unit, points into free space
  double offset = 1.0;               // plane: normal . p + offset = 0
};

struct Sphere {
  Eigen::Vector3d center{0, 0, 1.5};
  double radius = 0.5;
};

/// Solid axis-aligned box.
struct Box {
  Eigen::Vector3d min{-0.5, -0.5, -0.5};
  Eigen::Vector3d max{0.5, 0.5, 0.5};
};

/// Hollow axis-aligned room; free space is the inside.
struct Room {
  Eigen::Vector3d min{-2, -1.5, -2};
  Eigen::Vector3d max{2, 1.5, 2};
};

enum class PathKind {
  Static,  // every frame at the first pose
  Orbit,   // circle around target with an elevation swing
  Sweep,   // straight line from sweep_from to sweep_to, fixed orientation
  Tour,    // spin in place around the vertical axis, one turn over the sequence
};

struct CameraPath {
  PathKind kind = PathKind::Static;
  Eigen::Vector3d target{0, 0, 1.5};
  double radius = 1.5;
  double height = 0.0;       // offset along world up
  double step_deg = 6.0;     // azimuth per frame
  double swing_deg = 0.0;    // elevation amplitude
  int swing_periods = 1;     // elevation periods per turn
  Eigen::Vector3d sweep_from{0, 0, 0};
  Eigen::Vector3d sweep_to{0, 0, 0};
  Eigen::Vector3d position{0, 0, 0};  // Static / Tour eye
  Eigen::Vector3d look{0, 0, 1};      // Static / Sweep view direction
};

/// World up is -y: cameras follow the image convention x right, y down, z forward.
const Eigen::Vector3d kWorldUp{0, -1, 0};

struct SceneSpec {
  std::vector<Plane> planes;
  std::vector<Sphere> spheres;
  std::vector<Box> boxes;
  std::vector<Room> rooms;
  CameraPath path;
  int frames = 1;
  int width = 320;
  int height = 240;
  double hfov_deg = 60.0;
  double noise_sigma = 0.0;  // meters, additive Gaussian on depth
  double max_depth = 10.0;
  std::uint64_t seed = 1;

  double sdf(const Eigen::Vector3d& p) const;
  Eigen::Vector3d gradient(const Eigen::Vector3d& p) const;
  Intrinsics intrinsics() const;
  std::vector<Pose> poses() const;
};

/// Camera at eye looking toward target, image up along `up`.
Pose look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target, const Eigen::Vector3d& up = kWorldUp);

/// Sphere-traced depth (camera z) for one pose. Rays that do not converge
/// within max_depth or 1000 steps give invalid (0) pixels.
DepthFrame render_depth(const SceneSpec& spec, const Pose& pose, std::int32_t frame_index);

/// Writes depth/NNNNNN.pgm, trajectory.txt and intrinsics.txt.
void synth_sequence(const SceneSpec& spec, const std::filesystem::path& outdir);

// Preset scenes.
SceneSpec plane_scene(double tilt_deg, int frames, double distance = 1.0);
SceneSpec sphere_scene(double radius, int frames);
SceneSpec room_scene(int frames);

}  // namespace cubemesh::synth
