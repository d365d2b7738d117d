#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cubemesh/engine.hpp"
#include "cubemesh/fusion.hpp"
#include "cubemesh/spatial_store.hpp"

namespace cubemesh::io {

constexpr double kDefaultDepthScale = 5000.0;

/// 16-bit binary PGM (P5, maxval 65535, big-endian samples).
/// Pixel meters = raw / depth_scale; raw 0 is invalid.
DepthFrame read_depth(const std::filesystem::path& path, double depth_scale = kDefaultDepthScale);
/// Inverse of read_depth; meters are rounded to the nearest raw unit and
/// clamped to [0, 65535].
void write_depth(const std::filesystem::path& path, const DepthFrame& frame,
                 double depth_scale = kDefaultDepthScale);

struct TimedPose {
  double timestamp = 0.0;
  Pose pose;
};

/// "timestamp tx ty tz qx qy qz qw" per line, '#' comments. Timestamps
/// must be strictly increasing. Quaternions off unit length by more than
/// 1e-3 are normalized and reported in *warnings.
std::vector<TimedPose> read_trajectory(const std::filesystem::path& path,
                                       std::vector<std::string>* warnings = nullptr);
void write_trajectory(const std::filesystem::path& path, const std::vector<TimedPose>& poses);

/// Single line "fx fy cx cy width height".
Intrinsics read_intrinsics(const std::filesystem::path& path);
void write_intrinsics(const std::filesystem::path& path, const Intrinsics& K);

void write_obj(const std::filesystem::path& path, const CompactMesh& mesh);

/// Binary little-endian PLY: float xyz, float nx ny nz, uchar rgb.
/// With age coloring, hue runs linearly from 240 deg (age 0) to 0 deg
/// (max age); otherwise vertices are white.
void write_ply(const std::filesystem::path& path, const CompactMesh& mesh, bool color_by_age = true);
/// RGB for an age on the [0, max_age] ramp.
std::array<std::uint8_t, 3> age_color(std::int32_t age, std::int32_t max_age);

extern const char* const kStatsHeader;
void write_stats(const std::filesystem::path& path, const std::vector<StatsRow>& rows);
std::vector<StatsRow> read_stats(const std::filesystem::path& path);

/// Whole file as bytes; throws InputError when unreadable.
std::string read_file(const std::filesystem::path& path);

}  // namespace cubemesh::io
