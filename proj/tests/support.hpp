#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "cubemesh/audit.hpp"
#include "cubemesh/engine.hpp"
#include "cubemesh/synth.hpp"

namespace cubemesh::testing {

/// Runs a synthetic scene through a fresh engine. After each frame the
/// optional callback sees the engine and that frame's result.
struct SceneRun {
  std::vector<StatsRow> stats;
  std::vector<MeshReport> reports;
  std::size_t refcount_failures = 0;  // summed over frames
};

inline SceneRun run_scene(Engine& engine, const synth::SceneSpec& spec, bool audit_every_frame = true,
                          const std::function<void(Engine&, const FrameResult&)>& on_frame = {}) {
  SceneRun run;
  const std::vector<Pose> poses = spec.poses();
  const Intrinsics K = spec.intrinsics();
  for (int i = 0; i < spec.frames; ++i) {
    const DepthFrame frame = synth::render_depth(spec, poses[i], i);
    const FrameResult r = engine.process(frame, poses[i], K);
    run.stats.push_back(r.stats);
    run.reports.push_back(r.mesh);
    if (audit_every_frame) run.refcount_failures += audit::refcount_mismatches(engine.store());
    if (on_frame) on_frame(engine, r);
  }
  return run;
}

inline bool same_mesh(const CompactMesh& a, const CompactMesh& b) {
  return a.positions == b.positions && a.normals == b.normals && a.ages == b.ages && a.indices == b.indices;
}

}  // namespace cubemesh::testing
