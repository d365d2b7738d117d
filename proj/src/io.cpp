#include "cubemesh/io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string_view>

namespace cubemesh::io {
namespace {

std::string format_double(double v) {
  std::array<char, 32> buf{};
  const auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), end);
}

std::ofstream open_out(const std::filesystem::path& path, bool binary) {
  std::ofstream out(path, binary ? std::ios::binary | std::ios::out : std::ios::out);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

// Header token reader that tracks byte offsets and skips '#' comments.
class PgmHeader {
 public:
  PgmHeader(const std::string& data, const std::filesystem::path& path) : data_(data), path_(path) {}

  std::string token() {
    skip_space();
    const std::size_t start = pos_;
    while (pos_ < data_.size() && !std::isspace(static_cast<unsigned char>(data_[pos_]))) ++pos_;
    if (start == pos_) fail(start, "unexpected end of header");
    return data_.substr(start, pos_ - start);
  }

  long number(const char* what) {
    skip_space();
    const std::size_t start = pos_;
    const std::string t = token();
    long v = 0;
    const auto [end, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc{} || end != t.data() + t.size() || v <= 0) {
      fail(start, std::string("bad ") + what + " '" + t + "'");
    }
    return v;
  }

  // Exactly one whitespace byte separates the header from the raster.
  std::size_t raster_start() {
    if (pos_ >= data_.size() || !std::isspace(static_cast<unsigned char>(data_[pos_]))) {
      fail(pos_, "missing whitespace before raster");
    }
    return pos_ + 1;
  }

  [[noreturn]] void fail(std::size_t offset, const std::string& msg) const {
    throw InputError(path_.string() + ": byte " + std::to_string(offset) + ": " + msg);
  }

 private:
  void skip_space() {
    while (pos_ < data_.size()) {
      const char c = data_[pos_];
      if (c == '#') {
        while (pos_ < data_.size() && data_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  const std::string& data_;
  const std::filesystem::path& path_;
  std::size_t pos_ = 0;
};

template <class T>
void put_le(std::string& out, T v) {
  char bytes[sizeof(T)];
  std::memcpy(bytes, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.append(bytes, sizeof(T));
}

}  // namespace

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

DepthFrame read_depth(const std::filesystem::path& path, double depth_scale) {
  const std::string data = read_file(path);
  PgmHeader header(data, path);
  if (data.size() < 2 || data.compare(0, 2, "P5") != 0) header.fail(0, "not a binary PGM (expected P5)");
  header.token();
  const long width = header.number("width");
  const long height = header.number("height");
  const long maxval = header.number("maxval");
  if (maxval != 65535) header.fail(0, "maxval " + std::to_string(maxval) + ", expected 65535");
  const std::size_t start = header.raster_start();
  const std::size_t expected = static_cast<std::size_t>(width) * height * 2;
  const std::size_t actual = data.size() - std::min(start, data.size());
  if (actual != expected) {
    header.fail(start, "raster has " + std::to_string(actual) + " bytes, expected " + std::to_string(expected));
  }

  DepthFrame frame(static_cast<int>(width), static_cast<int>(height));
  const auto* raw = reinterpret_cast<const unsigned char*>(data.data() + start);
  for (std::size_t i = 0; i < frame.depth.size(); ++i) {
    const unsigned value = (static_cast<unsigned>(raw[2 * i]) << 8) | raw[2 * i + 1];
    frame.depth[i] = value == 0 ? 0.0f : static_cast<float>(value / depth_scale);
  }
  return frame;
}

void write_depth(const std::filesystem::path& path, const DepthFrame& frame, double depth_scale) {
  std::string out = "P5\n" + std::to_string(frame.width) + " " + std::to_string(frame.height) + "\n65535\n";
  out.reserve(out.size() + frame.depth.size() * 2);
  for (const float d : frame.depth) {
    const double raw = std::isfinite(d) && d > 0.0f ? std::round(d * depth_scale) : 0.0;
    const auto v = static_cast<std::uint16_t>(std::clamp(raw, 0.0, 65535.0));
    out.push_back(static_cast<char>(v >> 8));
    out.push_back(static_cast<char>(v & 0xFF));
  }
  std::ofstream f = open_out(path, true);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  finish(f, path);
}

std::vector<TimedPose> read_trajectory(const std::filesystem::path& path, std::vector<std::string>* warnings) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  std::vector<TimedPose> out;
  std::string line;
  for (int lineno = 1; std::getline(in, line); ++lineno) {
    const std::string where = path.string() + ":" + std::to_string(lineno);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;

    std::istringstream fields(line);
    std::array<double, 8> v{};
    for (double& x : v) {
      std::string tok;
      if (!(fields >> tok)) throw InputError(where + ": expected 8 fields");
      const auto [end, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), x);
      if (ec != std::errc{} || end != tok.data() + tok.size() || !std::isfinite(x)) {
        throw InputError(where + ": bad number '" + tok + "'");
      }
    }
    if (std::string extra; fields >> extra) throw InputError(where + ": trailing field '" + extra + "'");

    Eigen::Quaterniond q(v[7], v[4], v[5], v[6]);
    const double norm = q.norm();
    if (norm == 0.0) throw InputError(where + ": zero quaternion");
    if (std::abs(norm - 1.0) > 1e-3 && warnings) {
      warnings->push_back(where + ": quaternion norm " + format_double(norm) + ", normalized");
    }
    if (!out.empty() && !(v[0] > out.back().timestamp)) {
      throw InputError(where + ": timestamp " + format_double(v[0]) + " not after " +
                       format_double(out.back().timestamp));
    }
    out.push_back({v[0], Pose::from_quaternion(q, {v[1], v[2], v[3]})});
  }
  return out;
}

void write_trajectory(const std::filesystem::path& path, const std::vector<TimedPose>& poses) {
  std::ofstream out = open_out(path, false);
  out << "# timestamp tx ty tz qx qy qz qw\n";
  for (const TimedPose& p : poses) {
    const Eigen::Quaterniond q = p.pose.quaternion();
    const Eigen::Vector3d& t = p.pose.translation;
    for (const double x : {p.timestamp, t.x(), t.y(), t.z(), q.x(), q.y(), q.z()}) out << format_double(x) << ' ';
    out << format_double(q.w()) << '\n';
  }
  finish(out, path);
}

Intrinsics read_intrinsics(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first != std::string::npos && line[first] != '#') break;
    line.clear();
  }
  const std::string where = path.string() + ":" + std::to_string(lineno);
  std::istringstream fields(line);
  Intrinsics K;
  if (!(fields >> K.fx >> K.fy >> K.cx >> K.cy >> K.width >> K.height)) {
    throw InputError(where + ": expected \"fx fy cx cy width height\"");
  }
  if (!(K.fx > 0 && K.fy > 0) || K.width <= 0 || K.height <= 0) {
    throw InputError(where + ": non-positive focal length or image size");
  }
  return K;
}

void write_intrinsics(const std::filesystem::path& path, const Intrinsics& K) {
  std::ofstream out = open_out(path, false);
  out << format_double(K.fx) << ' ' << format_double(K.fy) << ' ' << format_double(K.cx) << ' '
      << format_double(K.cy) << ' ' << K.width << ' ' << K.height << '\n';
  finish(out, path);
}

void write_obj(const std::filesystem::path& path, const CompactMesh& mesh) {
  std::string s;
  for (const auto& p : mesh.positions) {
    s += "v " + format_double(p.x()) + ' ' + format_double(p.y()) + ' ' + format_double(p.z()) + '\n';
  }
  for (const auto& n : mesh.normals) {
    s += "vn " + format_double(n.x()) + ' ' + format_double(n.y()) + ' ' + format_double(n.z()) + '\n';
  }
  for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
    s += 'f';
    for (int k = 0; k < 3; ++k) {
      const std::string i = std::to_string(mesh.indices[3 * t + k] + 1);
      s += ' ' + i + "//" + i;
    }
    s += '\n';
  }
  std::ofstream out = open_out(path, false);
  out << s;
  finish(out, path);
}

std::array<std::uint8_t, 3> age_color(std::int32_t age, std::int32_t max_age) {
  const double t = max_age > 0 ? std::clamp(static_cast<double>(age) / max_age, 0.0, 1.0) : 0.0;
  const double hue = 240.0 * (1.0 - t);  // saturation = value = 1
  const double h = hue / 60.0;
  const double x = 1.0 - std::abs(std::fmod(h, 2.0) - 1.0);
  double r = 0, g = 0, b = 0;
  if (h < 1) {
    r = 1, g = x;
  } else if (h < 2) {
    r = x, g = 1;
  } else if (h < 3) {
    g = 1, b = x;
  } else {
    g = x, b = 1;
  }
  auto byte = [](double c) { return static_cast<std::uint8_t>(std::lround(c * 255.0)); };
  return {byte(r), byte(g), byte(b)};
}

void write_ply(const std::filesystem::path& path, const CompactMesh& mesh, bool color_by_age) {
  std::string s =
      "ply\nformat binary_little_endian 1.0\nelement vertex " + std::to_string(mesh.vertex_count()) +
      "\nproperty float x\nproperty float y\nproperty float z\n"
      "property float nx\nproperty float ny\nproperty float nz\n"
      "property uchar red\nproperty uchar green\nproperty uchar blue\n"
      "element face " + std::to_string(mesh.triangle_count()) +
      "\nproperty list uchar uint vertex_indices\nend_header\n";
  const std::int32_t max_age =
      mesh.ages.empty() ? 0 : std::max(0, *std::max_element(mesh.ages.begin(), mesh.ages.end()));
  for (std::size_t i = 0; i < mesh.vertex_count(); ++i) {
    for (int k = 0; k < 3; ++k) put_le(s, mesh.positions[i][k]);
    for (int k = 0; k < 3; ++k) put_le(s, mesh.normals[i][k]);
    const auto rgb = color_by_age ? age_color(mesh.ages[i], max_age) : std::array<std::uint8_t, 3>{255, 255, 255};
    for (const std::uint8_t c : rgb) s.push_back(static_cast<char>(c));
  }
  for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
    s.push_back(3);
    for (int k = 0; k < 3; ++k) put_le(s, mesh.indices[3 * t + k]);
  }
  std::ofstream out = open_out(path, true);
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
  finish(out, path);
}

const char* const kStatsHeader =
    "frame,blocks_active,vertices_live,triangles_live,vertices_allocated_total,vertices_recycled_total,"
    "irregular_cube_count,fusion_ms,meshing_ms,compact_ms";

void write_stats(const std::filesystem::path& path, const std::vector<StatsRow>& rows) {
  std::ofstream out = open_out(path, true);
  out << kStatsHeader << '\n';
  for (const StatsRow& r : rows) {
    out << r.frame << ',' << r.blocks_active << ',' << r.vertices_live << ',' << r.triangles_live << ','
        << r.vertices_allocated_total << ',' << r.vertices_recycled_total << ',' << r.irregular_cube_count << ','
        << format_double(r.fusion_ms) << ',' << format_double(r.meshing_ms) << ',' << format_double(r.compact_ms)
        << '\n';
  }
  finish(out, path);
}

std::vector<StatsRow> read_stats(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kStatsHeader) throw InputError(path.string() + ":1: bad stats header");
  std::vector<StatsRow> rows;
  for (int lineno = 2; std::getline(in, line); ++lineno) {
    if (line.empty()) continue;
    std::vector<std::string_view> cells;
    std::string_view rest(line);
    for (std::size_t comma; (comma = rest.find(',')) != std::string_view::npos; rest.remove_prefix(comma + 1)) {
      cells.push_back(rest.substr(0, comma));
    }
    cells.push_back(rest);
    const std::string where = path.string() + ":" + std::to_string(lineno);
    if (cells.size() != 10) throw InputError(where + ": expected 10 columns");
    auto parse = [&](std::string_view cell, auto& v) {
      const auto [end, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc{} || end != cell.data() + cell.size()) {
        throw InputError(where + ": bad value '" + std::string(cell) + "'");
      }
    };
    StatsRow r;
    parse(cells[0], r.frame);
    parse(cells[1], r.blocks_active);
    parse(cells[2], r.vertices_live);
    parse(cells[3], r.triangles_live);
    parse(cells[4], r.vertices_allocated_total);
    parse(cells[5], r.vertices_recycled_total);
    parse(cells[6], r.irregular_cube_count);
    parse(cells[7], r.fusion_ms);
    parse(cells[8], r.meshing_ms);
    parse(cells[9], r.compact_ms);
    rows.push_back(r);
  }
  return rows;
}

}  // namespace cubemesh::io
