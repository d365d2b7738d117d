#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>
#include <unistd.h>

#include "cubemesh/harness.hpp"
#include "cubemesh/synth.hpp"

using namespace cubemesh;
namespace fs = std::filesystem;

#ifndef CUBEMESH_CLI
#error "CUBEMESH_CLI must name the command line binary"
#endif

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("cubemesh_harness_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  fs::path operator/(const std::string& name) const { return path / name; }
};

// Small, fast dataset: tilted plane, 6 frames at 80x60.
fs::path small_dataset(const TempDir& dir, int frames = 6) {
  synth::SceneSpec spec = synth::plane_scene(8.0, frames);
  spec.width = 80;
  spec.height = 60;
  const fs::path root = dir / "data";
  synth::synth_sequence(spec, root);
  return root;
}

harness::RunConfig config_for(const fs::path& out) {
  harness::RunConfig cfg;
  cfg.engine.cube_size = 0.03;
  cfg.out = out;
  return cfg;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(CUBEMESH_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("git blob hash matches git hash-object") {
  CHECK(harness::git_blob_hash("") == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
  CHECK(harness::git_blob_hash("hello\n") == "ce013625030ba8dba906f756967f9e9ca394464a");
}

TEST_CASE("config validation") {
  harness::RunConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.engine.cube_size = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.engine.cube_size = 0.03;
  cfg.engine.truncation = 0.02;  // below the cube size
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.engine.truncation = 0.0;
  CHECK(cfg.engine.effective_truncation() == doctest::Approx(0.09));
  cfg.engine.epsilon = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("empty dataset gives a header-only stats file") {
  TempDir dir;
  const fs::path data = small_dataset(dir, 0);
  const auto r = harness::run_reconstruct(config_for(dir / "out"), data);
  CHECK(r.stats.empty());
  CHECK(r.mesh.vertex_count() == 0);
  CHECK(io::read_file(dir / "out/stats.csv") == std::string(io::kStatsHeader) + "\n");
  CHECK(fs::exists(dir / "out/mesh.obj"));
  CHECK(fs::exists(dir / "out/manifest.json"));
}

TEST_CASE("reconstruction writes consistent outputs and manifest") {
  TempDir dir;
  const fs::path data = small_dataset(dir);
  const auto r = harness::run_reconstruct(config_for(dir / "out"), data);
  REQUIRE(r.stats.size() == 6);
  CHECK(r.mesh.triangle_count() > 0);
  for (std::size_t i = 0; i < r.stats.size(); ++i) CHECK(r.stats[i].frame == static_cast<int>(i));
  CHECK(r.stats.back().vertices_live == r.mesh.vertex_count());
  CHECK(r.stats.back().triangles_live == r.mesh.triangle_count());
  CHECK(io::read_stats(dir / "out/stats.csv") == r.stats);

  std::ifstream in(dir / "out/manifest.json");
  const nlohmann::json m = nlohmann::json::parse(in);
  CHECK(m["command"] == "reconstruct");
  CHECK(m["frames"] == 6);
  CHECK(m["config"]["cube_size"] == 0.03);
  CHECK(m["config"]["strategy"] == "claim");
  CHECK(m["inputs"]["trajectory.txt"] == harness::git_blob_hash(io::read_file(data / "trajectory.txt")));
  CHECK(m["inputs"]["depth/000003.pgm"] == harness::git_blob_hash(io::read_file(data / "depth/000003.pgm")));
  CHECK(m["inputs"].size() == 8);
  for (const char* name : {"mesh.obj", "mesh.ply", "stats.csv"}) {
    CHECK(m["outputs"][name] == harness::git_blob_hash(io::read_file(dir / "out" / name)));
  }
  CHECK(m["cube_bytes"]["layout"] == sizeof(Cube));
  CHECK(m["warnings"].empty());
}

TEST_CASE("mesh output is independent of strategy and worker count") {
  TempDir dir;
  const fs::path data = small_dataset(dir);
  const harness::Dataset dataset = harness::load_dataset(data);
  harness::RunConfig cfg = config_for(dir / "out");
  cfg.engine.strategy = Strategy::Serial;
  cfg.engine.workers = 1;
  const CompactMesh ref = harness::reconstruct(cfg, dataset).mesh;
  for (const Strategy s : {Strategy::Serial, Strategy::Claim, Strategy::Partition}) {
    for (const int w : {1, 3}) {
      cfg.engine.strategy = s;
      cfg.engine.workers = w;
      const CompactMesh m = harness::reconstruct(cfg, dataset).mesh;
      CHECK(m.positions == ref.positions);
      CHECK(m.normals == ref.normals);
      CHECK(m.ages == ref.ages);
      CHECK(m.indices == ref.indices);
    }
  }
}

TEST_CASE("isolated triangle: shared and loose counts agree") {
  EngineConfig ec;
  ec.cube_size = 0.1;
  ec.baseline = true;
  ec.workers = 1;
  Engine engine(ec);
  Block& b = engine.store().get_or_allocate_block({0, 0, 0});
  for (Cube& c : b.cubes) {
    c.tsdf = 1.0;
    c.weight = 1;
  }
  // Only cube (0,0,0) sees all eight of its corners inside this block.
  b.at(0, 0, 0).tsdf = -0.5;
  const auto blocks = engine.store().block_table().blocks();
  engine.mesher().extract_frame(blocks, engine.mesh_params(), 0);
  const CompactMesh shared = engine.compact();
  CHECK(shared.triangle_count() == 1);
  CHECK(shared.vertex_count() == 3);
  CHECK(engine.loose_vertex_count() == 3);
  const CompactMesh loose = engine.compact_loose();
  CHECK(loose.vertex_count() == 3);
  CHECK(static_cast<double>(shared.vertex_count()) / loose.vertex_count() == 1.0);
}

TEST_CASE("compare keeps three loose vertices per triangle") {
  TempDir dir;
  const fs::path data = small_dataset(dir);
  const auto r = harness::run_compare(config_for(dir / "out"), data);
  REQUIRE(r.rows.size() == 6);
  for (const auto& row : r.rows) {
    CHECK(row.loose_vertices == 3 * row.loose_triangles);
    CHECK(row.loose_triangles == row.compact_triangles);
  }
  CHECK(r.final_ratio < 0.25);
  CHECK(r.final_ratio ==
        doctest::Approx(static_cast<double>(r.rows.back().compact_vertices) / r.rows.back().loose_vertices));
  std::ifstream csv(dir / "out/compare.csv");
  int lines = 0;
  for (std::string line; std::getline(csv, line);) ++lines;
  CHECK(lines == 7);
}

TEST_CASE("PLY age coloring: oldest vertex is the reddest") {
  TempDir dir;
  const fs::path data = small_dataset(dir);
  const auto r = harness::run_reconstruct(config_for(dir / "out"), data);
  const CompactMesh& m = r.mesh;
  const std::string bytes = io::read_file(dir / "out/mesh.ply");
  const std::size_t body = bytes.find("end_header\n") + 11;
  auto rgb = [&](std::size_t i) {
    const std::size_t at = body + i * 27 + 24;
    return std::array<int, 3>{static_cast<unsigned char>(bytes[at]), static_cast<unsigned char>(bytes[at + 1]),
                              static_cast<unsigned char>(bytes[at + 2])};
  };
  std::size_t oldest = 0, newest = 0;
  for (std::size_t i = 0; i < m.vertex_count(); ++i) {
    if (m.ages[i] > m.ages[oldest]) oldest = i;
    if (m.ages[i] < m.ages[newest]) newest = i;
  }
  REQUIRE(m.ages[oldest] > m.ages[newest]);
  CHECK(rgb(oldest) == std::array<int, 3>{255, 0, 0});
  CHECK(rgb(newest)[2] == 255);
  int max_redness = -1000;
  for (std::size_t i = 0; i < m.vertex_count(); ++i) max_redness = std::max(max_redness, rgb(i)[0] - rgb(i)[2]);
  CHECK(rgb(oldest)[0] - rgb(oldest)[2] == max_redness);
}

TEST_CASE("dataset inconsistencies are reported before processing") {
  TempDir dir;
  const fs::path data = small_dataset(dir);
  fs::remove(data / "depth/000005.pgm");
  CHECK_THROWS_AS(harness::load_dataset(data), InputError);
  CHECK_THROWS_AS(harness::load_dataset(dir / "nowhere"), InputError);

  TempDir other;
  const fs::path d2 = small_dataset(other);
  io::write_intrinsics(d2 / "intrinsics.txt", Intrinsics{});  // 640x480, frames are 80x60
  const harness::Dataset ds = harness::load_dataset(d2);
  CHECK_THROWS_AS(ds.frame(0, io::kDefaultDepthScale), InputError);
}

TEST_CASE("capacity exhaustion surfaces as CapacityError") {
  TempDir dir;
  const fs::path data = small_dataset(dir);
  harness::RunConfig cfg = config_for(dir / "out");
  cfg.engine.max_blocks = 2;
  CHECK_THROWS_AS(harness::run_reconstruct(cfg, data), CapacityError);
}

TEST_CASE("command line exit codes and outputs") {
  TempDir dir;
  const std::string d = dir.path.string();
  CHECK(run_cli("--help") == 0);
  CHECK(run_cli("") == 1);
  CHECK(run_cli("reconstruct") == 1);
  CHECK(run_cli("reconstruct " + d + " --bogus") == 1);
  CHECK(run_cli("synth --scene cube --out " + d + "/x") == 1);

  REQUIRE(run_cli("synth --scene sphere --frames 5 --width 64 --height 48 --out " + d + "/s") == 0);
  int pgms = 0;
  for (const auto& e : fs::directory_iterator(dir / "s/depth")) pgms += e.path().extension() == ".pgm";
  CHECK(pgms == 5);
  CHECK(fs::exists(dir / "s/trajectory.txt"));
  CHECK(fs::exists(dir / "s/intrinsics.txt"));

  CHECK(run_cli("reconstruct " + d + "/s --cube-size 0.05 --out " + d + "/r") == 0);
  CHECK(fs::exists(dir / "r/mesh.obj"));
  CHECK(fs::exists(dir / "r/mesh.ply"));
  CHECK(fs::exists(dir / "r/stats.csv"));
  CHECK(fs::exists(dir / "r/manifest.json"));
  CHECK(run_cli("reconstruct " + d + "/s --cube-size 0.05 --strategy partition --workers 2 --out " + d + "/r2") == 0);
  CHECK(io::read_file(dir / "r/mesh.obj") == io::read_file(dir / "r2/mesh.obj"));

  CHECK(run_cli("reconstruct " + d + "/s --cube-size -1 --out " + d + "/bad") == 1);
  CHECK(run_cli("reconstruct " + d + "/s --cube-size 0.05 --trunc 0.01 --out " + d + "/bad") == 1);
  CHECK(run_cli("reconstruct " + d + "/s --strategy greedy --out " + d + "/bad") == 1);
  CHECK(run_cli("reconstruct " + d + "/missing --out " + d + "/bad") == 2);

  CHECK(run_cli("compare " + d + "/s --cube-size 0.05 --out " + d + "/c") == 0);
  CHECK(fs::exists(dir / "c/compare.csv"));

  CHECK(run_cli("export " + d + "/s --cube-size 0.05 --out " + d + "/e") == 1);
  CHECK(run_cli("export " + d + "/s --cube-size 0.05 --ply --color none --out " + d + "/e") == 0);
  CHECK(fs::exists(dir / "e/mesh.ply"));
  CHECK_FALSE(fs::exists(dir / "e/mesh.obj"));

  fs::remove(dir / "s/depth/000004.pgm");
  CHECK(run_cli("reconstruct " + d + "/s --out " + d + "/bad") == 2);
}
