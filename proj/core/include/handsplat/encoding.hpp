#pragma once

#include <atomic>
#include <vector>

#include "handsplat/kinematics.hpp"
#include "handsplat/types.hpp"

namespace handsplat {

// Frequency encoding: for each of the three components, L pairs
// (sin 2^k pi x, cos 2^k pi x) for k = 0..L-1. Output length 6L, ordered
// u-block, v-block, d-block.
VecX positional_encode(const Vec3& uvd, int bands);

// Dense 2D feature grid with bilinear queries on [0,1]^2. Node (ix, iy)
// sits at (ix, iy) / (res - 1).
struct Grid2D {
  int res = 0;
  int channels = 0;
  VecX data;  // ((iy * res + ix) * channels + c)

  void init(int res_, int channels_) {
    res = res_;
    channels = channels_;
    data = VecX::Zero(static_cast<long>(res) * res * channels);
  }
  double& at(int ix, int iy, int c) {
    return data[(static_cast<long>(iy) * res + ix) * channels + c];
  }
  double at(int ix, int iy, int c) const {
    return data[(static_cast<long>(iy) * res + ix) * channels + c];
  }
  VecX query(double x, double y) const;
  // Adjoint of query: accumulates g into the four corner nodes.
  void scatter(double x, double y, const VecX& g);
};

// Identity feature triplane over (u,v), (v,d), (u,d); queries concatenate
// the three bilinear lookups.
struct FeatureTriplane {
  Grid2D uv, vd, ud;

  void init(int res, int channels) {
    uv.init(res, channels);
    vd.init(res, channels);
    ud.init(res, channels);
  }
  int feature_size() const { return 3 * uv.channels; }
  VecX query(const Vec3& uvd) const;
  void scatter(const Vec3& uvd, const VecX& g);
};

// One feature plane per bone, queried at normalized (abduction, flexion).
struct AngularPlanes {
  std::vector<Grid2D> planes;  // kNumBones entries, bone b at index b-1

  void init(int res, int channels) {
    planes.assign(kNumBones, {});
    for (auto& p : planes) p.init(res, channels);
  }
  int channels() const { return planes.empty() ? 0 : planes[0].channels; }
};

struct NormalizedAngles {
  Eigen::Matrix<double, kNumBones, 2> af;  // row b-1 = (abduction, flexion)
  int clamped = 0;                         // entries that hit a limit
};

// Linear map (theta - min)/(max - min), clamped to [0,1]. Out-of-range
// inputs clamp, set `clamped`, and bump the optional diagnostics counter.
NormalizedAngles normalize_angles(const PoseAngles& pose,
                                  const AngleLimits& limits,
                                  std::atomic<uint64_t>* clamp_counter = nullptr);

// Per-bone angular features, averaged down the kinematic chain:
// F_b = delta_b for level-1 bones, (F_parent + delta_b)/2 deeper.
// Row b-1 of the result is F_b.
MatX angular_features(const NormalizedAngles& angles,
                      const AngularPlanes& planes);

// Accumulates plane gradients for upstream d_features (same layout as the
// forward result).
void angular_features_backward(const NormalizedAngles& angles,
                               const MatX& d_features, AngularPlanes* grads);

}  // namespace handsplat
