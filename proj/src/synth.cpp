#include "cubemesh/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <fmt/format.h>

#include "cubemesh/io.hpp"

namespace cubemesh::synth {
namespace {

constexpr double kDeg = std::numbers::pi / 180.0;
constexpr int kMaxSteps = 1000;
constexpr double kHitEpsilon = 1e-7;

double box_sdf(const Eigen::Vector3d& p, const Eigen::Vector3d& lo, const Eigen::Vector3d& hi) {
  const Eigen::Vector3d center = 0.5 * (lo + hi);
  const Eigen::Vector3d half = 0.5 * (hi - lo);
  const Eigen::Vector3d q = (p - center).cwiseAbs() - half;
  return q.cwiseMax(0.0).norm() + std::min(q.maxCoeff(), 0.0);
}

}  // namespace

double SceneSpec::sdf(const Eigen::Vector3d& p) const {
  double d = std::numeric_limits<double>::infinity();
  for (const Plane& s : planes) d = std::min(d, s.normal.dot(p) + s.offset);
  for (const Sphere& s : spheres) d = std::min(d, (p - s.center).norm() - s.radius);
  for (const Box& s : boxes) d = std::min(d, box_sdf(p, s.min, s.max));
  for (const Room& s : rooms) d = std::min(d, -box_sdf(p, s.min, s.max));
  return d;
}

Eigen::Vector3d SceneSpec::gradient(const Eigen::Vector3d& p) const {
  constexpr double h = 1e-6;
  Eigen::Vector3d g;
  for (int k = 0; k < 3; ++k) {
    Eigen::Vector3d e = Eigen::Vector3d::Zero();
    e[k] = h;
    g[k] = (sdf(p + e) - sdf(p - e)) / (2 * h);
  }
  return g;
}

Intrinsics SceneSpec::intrinsics() const {
  Intrinsics K;
  K.width = width;
  K.height = height;
  K.fx = K.fy = 0.5 * width / std::tan(0.5 * hfov_deg * kDeg);
  K.cx = 0.5 * width;
  K.cy = 0.5 * height;
  return K;
}

Pose look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target, const Eigen::Vector3d& up) {
  const Eigen::Vector3d z = (target - eye).normalized();
  Eigen::Vector3d x = z.cross(-up);
  if (x.norm() < 1e-9) x = z.unitOrthogonal();
  x.normalize();
  const Eigen::Vector3d y = z.cross(x);
  Pose pose;
  pose.rotation.col(0) = x;
  pose.rotation.col(1) = y;
  pose.rotation.col(2) = z;
  pose.translation = eye;
  return pose;
}

std::vector<Pose> SceneSpec::poses() const {
  std::vector<Pose> out;
  out.reserve(std::max(frames, 0));
  const Eigen::Vector3d forward{0, 0, 1};
  const Eigen::Vector3d right{1, 0, 0};
  for (int i = 0; i < frames; ++i) {
    switch (path.kind) {
      case PathKind::Static:
        out.push_back(look_at(path.position, path.position + path.look));
        break;
      case PathKind::Orbit: {
        const double a = i * path.step_deg * kDeg;
        const double e = path.swing_deg * kDeg * std::sin(path.swing_periods * a);
        const Eigen::Vector3d offset =
            path.radius * (std::cos(e) * (std::sin(a) * right + std::cos(a) * forward) + std::sin(e) * kWorldUp);
        out.push_back(look_at(path.target + offset + path.height * kWorldUp, path.target));
        break;
      }
      case PathKind::Sweep: {
        const double t = frames > 1 ? static_cast<double>(i) / (frames - 1) : 0.0;
        const Eigen::Vector3d eye = path.sweep_from + t * (path.sweep_to - path.sweep_from);
        out.push_back(look_at(eye, eye + path.look));
        break;
      }
      case PathKind::Tour: {
        const double yaw = 2.0 * std::numbers::pi * i / std::max(frames, 1);
        const Eigen::Vector3d dir = std::sin(yaw) * right + std::cos(yaw) * forward;
        out.push_back(look_at(path.position, path.position + dir));
        break;
      }
    }
  }
  return out;
}

DepthFrame render_depth(const SceneSpec& spec, const Pose& pose, std::int32_t frame_index) {
  const Intrinsics K = spec.intrinsics();
  DepthFrame frame(K.width, K.height, frame_index);
  std::mt19937_64 rng(spec.seed ^ (0x9E3779B97F4A7C15ull * static_cast<std::uint64_t>(frame_index + 1)));
  std::normal_distribution<double> noise(0.0, spec.noise_sigma > 0 ? spec.noise_sigma : 1.0);

  for (int v = 0; v < K.height; ++v) {
    for (int u = 0; u < K.width; ++u) {
      const Eigen::Vector3d ray_cam = K.backproject(u, v, 1.0);
      const Eigen::Vector3d dir_cam = ray_cam.normalized();
      const Eigen::Vector3d dir = pose.rotation * dir_cam;
      double t = 0.0;
      bool hit = false;
      if (spec.sdf(pose.translation) > 0.0) {
        for (int step = 0; step < kMaxSteps && t * dir_cam.z() <= spec.max_depth; ++step) {
          const double d = spec.sdf(pose.translation + t * dir);
          if (d < kHitEpsilon) {
            hit = true;
            break;
          }
          t += d;
        }
      }
      double depth = t * dir_cam.z();
      if (!hit || depth > spec.max_depth) continue;
      if (spec.noise_sigma > 0) depth += noise(rng);
      frame.at(u, v) = depth > 0 ? static_cast<float>(depth) : 0.0f;
    }
  }
  return frame;
}

void synth_sequence(const SceneSpec& spec, const std::filesystem::path& outdir) {
  std::filesystem::create_directories(outdir / "depth");
  const std::vector<Pose> poses = spec.poses();
  std::vector<io::TimedPose> trajectory;
  for (int i = 0; i < spec.frames; ++i) {
    const DepthFrame frame = render_depth(spec, poses[i], i);
    io::write_depth(outdir / "depth" / fmt::format("{:06d}.pgm", i), frame);
    trajectory.push_back({i / 30.0, poses[i]});
  }
  io::write_trajectory(outdir / "trajectory.txt", trajectory);
  io::write_intrinsics(outdir / "intrinsics.txt", spec.intrinsics());
}

SceneSpec plane_scene(double tilt_deg, int frames, double distance) {
  SceneSpec spec;
  const double a = tilt_deg * kDeg;
  Plane plane;
  plane.normal = Eigen::Vector3d(std::sin(a), 0.0, -std::cos(a));
  plane.offset = distance * std::cos(a);
  spec.planes.push_back(plane);
  spec.frames = frames;
  spec.path.kind = PathKind::Sweep;
  spec.path.sweep_from = {-0.1, 0.0, 0.0};
  spec.path.sweep_to = {0.1, 0.0, 0.0};
  spec.path.look = {0.0, 0.0, 1.0};
  return spec;
}

SceneSpec sphere_scene(double radius, int frames) {
  SceneSpec spec;
  spec.spheres.push_back({Eigen::Vector3d::Zero(), radius});
  spec.frames = frames;
  spec.path.kind = PathKind::Orbit;
  spec.path.target = Eigen::Vector3d::Zero();
  spec.path.radius = 3.0 * radius;
  spec.path.step_deg = 360.0 / std::max(frames, 1);
  spec.path.swing_deg = 60.0;
  spec.path.swing_periods = 3;
  return spec;
}

SceneSpec room_scene(int frames) {
  SceneSpec spec;
  spec.rooms.push_back({{-2.0, -1.5, -2.0}, {2.0, 1.5, 2.0}});
  spec.boxes.push_back({{0.4, 0.8, 0.6}, {1.2, 1.5, 1.4}});
  spec.frames = frames;
  spec.path.kind = PathKind::Tour;
  spec.path.position = {0.0, 0.0, 0.0};
  return spec;
}

}  // namespace cubemesh::synth
