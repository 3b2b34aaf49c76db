#pragma once

#include <string>

#include "handsplat/trainer.hpp"

namespace handsplat {

struct SynthOptions {
  int n_views = 8;
  int image_size = 128;
  uint64_t seed = 0;
  int n_per_bone = 150;
  Eigen::Vector3i field_resolution = Eigen::Vector3i(48, 48, 48);
  double pose_variation = 0.5;  // fraction of the angle-limit windows
  ShadowSettings shadow;
  int threads = 0;
};

// Ground-truth appearance used for synthetic frames: a smooth color field
// over uvd, fixed opacity and scale.
Vec3 synthetic_color(const Vec3& uvd);

// Builds a capsule-hand scene (mesh, template, weight field, canonical
// skeleton), renders n_views posed frames with the fixed appearance and
// writes a complete dataset under out_dir:
//   template.jgtp, weights.jgwf, canonical.json, mesh.obj,
//   frames/ masks/ skeletons/ cameras/ manifest.json
void generate_synthetic_dataset(const std::string& out_dir,
                                const SynthOptions& opts);

}  // namespace handsplat
