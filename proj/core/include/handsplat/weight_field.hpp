#pragma once

#include <string>
#include <vector>

#include "handsplat/mesh.hpp"
#include "handsplat/skeleton.hpp"
#include "handsplat/types.hpp"

namespace handsplat {

using JointWeights = Eigen::Matrix<double, kNumJoints, 1>;
using JointWeightsGrad = Eigen::Matrix<double, kNumJoints, 3>;

// Voxelized skinning-weight field over the canonical mesh bounds. Each voxel
// stores a 21-vector on the probability simplex; queries interpolate
// trilinearly between voxel centers (clamped at the boundary).
struct WeightField {
  Eigen::Vector3i dims = Eigen::Vector3i::Zero();
  Vec3 bbox_min = Vec3::Zero(), bbox_max = Vec3::Zero();
  std::vector<float> weights;  // dims.prod() * 21, voxel-major

  size_t voxel_count() const {
    return static_cast<size_t>(dims.x()) * dims.y() * dims.z();
  }
  const float* voxel(int x, int y, int z) const {
    return weights.data() +
           ((static_cast<size_t>(z) * dims.y() + y) * dims.x() + x) * kNumJoints;
  }
  Vec3 voxel_center(int x, int y, int z) const;
};

// Inverse-squared-distance-to-bone weights: bone b contributes
// 1/(eps + dist(p, bone_b))^2 to joint b, and half the level-1 bone
// contributions go to the root so the palm stays near-rigid.
WeightField build_weight_field(const CanonicalMesh& mesh,
                               const HandSkeleton& skeleton,
                               const Eigen::Vector3i& resolution,
                               int threads = 0);

// Direct evaluation of the weight formula at a point (no grid); the voxel
// contents equal this at voxel centers.
JointWeights evaluate_bone_weights(const HandSkeleton& skeleton, const Vec3& p);

JointWeights query_weights(const WeightField& field, const Vec3& p);

// Also returns d(weights)/d(position); zero in clamped directions.
JointWeights query_weights_grad(const WeightField& field, const Vec3& p,
                                JointWeightsGrad* grad);

// Binary cache ("JGWF").
void save_weight_field(const WeightField& f, const std::string& path);
WeightField load_weight_field(const std::string& path);

}  // namespace handsplat
