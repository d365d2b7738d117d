// cubemesh: reconstruct, compare, synth and export from the command line.
//
// Exit codes: 0 ok, 1 usage, 2 input error, 3 capacity exhausted.

#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "cubemesh/harness.hpp"
#include "cubemesh/synth.hpp"

namespace {

using namespace cubemesh;

enum Exit { kOk = 0, kUsage = 1, kInput = 2, kCapacity = 3 };

void add_engine_flags(CLI::App& cmd, harness::RunConfig& cfg, std::string& strategy) {
  EngineConfig& e = cfg.engine;
  cmd.add_option("--cube-size", e.cube_size, "Cube edge length in meters")->capture_default_str();
  cmd.add_option("--trunc", e.truncation, "Truncation band in meters (default 3 x cube size)");
  cmd.add_option("--epsilon", e.epsilon, "Refinement threshold on normalized TSDF")->capture_default_str();
  cmd.add_flag("--refine,!--no-refine", e.refine, "Hamming refinement of cube types");
  cmd.add_option("--strategy", strategy, "Vertex sharing strategy")
      ->check(CLI::IsMember({"serial", "claim", "partition"}))
      ->capture_default_str();
  cmd.add_flag("--baseline", e.baseline, "Also maintain the loose per-cube baseline");
  cmd.add_option("--max-range", e.max_range, "Ignore depth beyond this range (m)")->capture_default_str();
  cmd.add_flag("--frustum-only", e.frustum_only, "Mesh only blocks in the current view frustum");
  cmd.add_option("--workers", e.workers, "Worker threads (0 = hardware concurrency)")->capture_default_str();
  cmd.add_option("--seed", cfg.seed, "Seed recorded in the manifest")->capture_default_str();
  cmd.add_option("--depth-scale", cfg.depth_scale, "Raw depth units per meter")->capture_default_str();
  cmd.add_option("--out", cfg.out, "Output directory")->capture_default_str();
}

void apply_strategy(harness::RunConfig& cfg, const std::string& strategy) {
  cfg.engine.strategy = *parse_strategy(strategy);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Incremental TSDF fusion with shared-vertex Marching Cubes"};
  app.require_subcommand(1);

  harness::RunConfig cfg;
  std::string strategy = "claim";
  std::string dataset;

  auto* reconstruct = app.add_subcommand("reconstruct", "Fuse a dataset and export mesh, stats and manifest");
  reconstruct->add_option("dataset", dataset, "Dataset directory")->required();
  add_engine_flags(*reconstruct, cfg, strategy);
  reconstruct->add_flag("!--no-obj", cfg.write_obj, "Skip mesh.obj");
  reconstruct->add_flag("!--no-ply", cfg.write_ply, "Skip mesh.ply");

  auto* compare = app.add_subcommand("compare", "Vertex counts of the shared mesh against the loose baseline");
  compare->add_option("dataset", dataset, "Dataset directory")->required();
  add_engine_flags(*compare, cfg, strategy);

  std::string scene = "sphere";
  double tilt_deg = 0.0;
  double radius = 0.5;
  double distance = 1.0;
  synth::SceneSpec spec;
  std::uint64_t synth_seed = 1;
  std::string synth_out = "dataset";
  int frames = 60;
  auto* synth_cmd = app.add_subcommand("synth", "Render a synthetic depth dataset");
  synth_cmd->add_option("--scene", scene, "Scene preset")
      ->check(CLI::IsMember({"plane", "sphere", "room"}))
      ->capture_default_str();
  synth_cmd->add_option("--tilt-deg", tilt_deg, "Plane tilt about the vertical axis")->capture_default_str();
  synth_cmd->add_option("--distance", distance, "Plane distance from the camera")->capture_default_str();
  synth_cmd->add_option("--radius", radius, "Sphere radius")->capture_default_str();
  synth_cmd->add_option("--frames", frames, "Frame count")->check(CLI::NonNegativeNumber)->capture_default_str();
  synth_cmd->add_option("--width", spec.width, "Image width")->check(CLI::PositiveNumber)->capture_default_str();
  synth_cmd->add_option("--height", spec.height, "Image height")->check(CLI::PositiveNumber)->capture_default_str();
  synth_cmd->add_option("--fov", spec.hfov_deg, "Horizontal field of view (deg)")->capture_default_str();
  synth_cmd->add_option("--noise", spec.noise_sigma, "Depth noise sigma (m)")->capture_default_str();
  synth_cmd->add_option("--seed", synth_seed, "Noise seed")->capture_default_str();
  synth_cmd->add_option("--out", synth_out, "Output directory")->capture_default_str();

  bool want_obj = false;
  bool want_ply = false;
  std::string color = "age";
  auto* export_cmd = app.add_subcommand("export", "Reconstruct a dataset and write only the requested mesh files");
  export_cmd->add_option("dataset", dataset, "Dataset directory")->required();
  add_engine_flags(*export_cmd, cfg, strategy);
  export_cmd->add_flag("--obj", want_obj, "Write mesh.obj");
  export_cmd->add_flag("--ply", want_ply, "Write mesh.ply");
  export_cmd->add_option("--color", color, "PLY vertex coloring")
      ->check(CLI::IsMember({"age", "none"}))
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    apply_strategy(cfg, strategy);
    if (*reconstruct) {
      const harness::RunResult r = harness::run_reconstruct(cfg, dataset);
      fmt::print("{} frames, {} vertices, {} triangles -> {}\n", r.stats.size(), r.mesh.vertex_count(),
                 r.mesh.triangle_count(), cfg.out.string());
    } else if (*compare) {
      const harness::CompareResult r = harness::run_compare(cfg, dataset);
      if (r.rows.empty()) {
        fmt::print("0 frames\n");
      } else {
        fmt::print("compact {} vertices, loose {} vertices, ratio {:.4f}\n", r.rows.back().compact_vertices,
                   r.rows.back().loose_vertices, r.final_ratio);
      }
    } else if (*synth_cmd) {
      synth::SceneSpec preset = scene == "plane"    ? synth::plane_scene(tilt_deg, frames, distance)
                                : scene == "sphere" ? synth::sphere_scene(radius, frames)
                                                    : synth::room_scene(frames);
      preset.width = spec.width;
      preset.height = spec.height;
      preset.hfov_deg = spec.hfov_deg;
      preset.noise_sigma = spec.noise_sigma;
      preset.seed = synth_seed;
      synth::synth_sequence(preset, synth_out);
      fmt::print("{} frames -> {}\n", frames, synth_out);
    } else if (*export_cmd) {
      if (!want_obj && !want_ply) {
        std::cerr << "export: choose at least one of --obj, --ply\n";
        return kUsage;
      }
      cfg.write_obj = want_obj;
      cfg.write_ply = want_ply;
      cfg.color_by_age = color == "age";
      cfg.validate();
      const harness::RunResult r = harness::reconstruct(cfg, harness::load_dataset(dataset));
      harness::export_mesh(cfg, r.mesh);
      fmt::print("{} vertices, {} triangles -> {}\n", r.mesh.vertex_count(), r.mesh.triangle_count(),
                 cfg.out.string());
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const CapacityError& e) {
    std::cerr << "capacity exhausted: " << e.what() << '\n';
    return kCapacity;
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInput;
  }
  return kOk;
}
