#pragma once

#include <string>

#include "handsplat/appearance.hpp"
#include "handsplat/trainer.hpp"

namespace handsplat {

// CLI-facing configuration: asset paths plus every module default. Loaded
// from a single JSON file; unknown keys are rejected and referenced input
// paths must exist.
struct RunConfig {
  struct Paths {
    std::string template_file, weights, mesh, canonical, camera, dataset,
        checkpoint, limits, output;
  } paths;

  int n_per_bone = 150;
  Eigen::Vector3i field_resolution = Eigen::Vector3i(64, 64, 64);

  AppearanceConfig appearance;
  LossWeights loss;
  TrainConfig train;
  ShadowSettings shadow;

  uint64_t seed = 0;
  int threads = 0;  // 0 = hardware concurrency
  bool isotropic = true;
};

RunConfig load_run_config(const std::string& path);
RunConfig parse_run_config(const std::string& text);

}  // namespace handsplat
