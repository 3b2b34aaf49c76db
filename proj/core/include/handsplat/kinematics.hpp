#pragma once

#include <array>
#include <random>

#include "handsplat/skeleton.hpp"
#include "handsplat/types.hpp"

namespace handsplat {

// Per-bone flexion/abduction plus palm shape, extracted from joint positions.
// Angles live in the bone's parent-local frame: flexion is the angle between
// the bone's xz-projection and the local z-axis, abduction the angle between
// the bone and its xz-projection. Level-1 bones are measured in the shared
// palm reference frame. Arrays are bone-indexed 1..20 (slot 0 unused).
struct PoseAngles {
  std::array<double, kNumJoints> flexion{};
  std::array<double, kNumJoints> abduction{};
  std::array<double, 5> palm_inter_bone{};  // [k] = angle(b_k, b_{k+1}), k=1..4
  std::array<double, 4> palm_dihedral{};    // [k] = angle(n_k, n_{k+1}), k=1..3
  std::array<double, kNumJoints> bone_lengths{};
  Vec3 root_position = Vec3::Zero();
};

// One orthonormal basis per bone, defined at the bone's parent joint.
// Columns are the x/y/z axes in global coordinates; the z-axis of a
// level>=2 frame is the unit direction of the parent bone, level-1 frames
// share the palm reference frame.
struct LocalFrames {
  std::array<Mat3, kNumJoints> frames{};  // bone-indexed 1..20
};

// Rigid-up-to-scale transform per joint plus the factor matrices it is
// composed from, bone-indexed 1..20 (per_joint additionally has slot 0 for
// the root). per_joint[i] maps the canonical joint i to the target joint i.
struct SkeletonTransform {
  std::array<Mat4, kNumJoints> per_joint{};
  std::array<Mat4, kNumJoints> K{};        // canonical joint -> unit bone at origin
  std::array<Mat4, kNumJoints> F{};        // global -> parent-local coordinates
  std::array<Mat4, kNumJoints> R{};        // canonical angles -> target angles
  std::array<Mat4, kNumJoints> F_back{};   // local -> global through the chain
  std::array<Mat4, kNumJoints> K_scale{};  // scale to target length, chain translations
  std::array<Mat4, kNumJoints> P{};        // palm alignment + root placement
};

// Per-bone sampling/normalization windows (radians), bone-indexed 1..20.
struct AngleLimits {
  std::array<double, kNumJoints> flexion_min{}, flexion_max{};
  std::array<double, kNumJoints> abduction_min{}, abduction_max{};
};

// Local bone direction for a flexion/abduction pair:
// (cos a * sin f, sin a, cos a * cos f).
Vec3 direction_from_angles(double flexion, double abduction);

// Inverse of direction_from_angles for a unit vector. Throws
// GimbalDegenerateError (with the offending joint index) when the xz
// projection vanishes.
void angles_from_direction(const Vec3& local_dir, int joint_index,
                           double* flexion, double* abduction);

// Shared palm reference frame of a skeleton: z along the middle-finger
// level-1 bone, y the palm normal (from the planes flanking the middle
// finger), x = y cross z. Throws DegeneratePalmError when undefined.
Mat3 palm_frame(const HandSkeleton& s);

LocalFrames build_local_frames(const HandSkeleton& s);

PoseAngles extract_pose(const HandSkeleton& s);

// Exact canonical->target transform. apply_transform(compute_transform(c, t), c)
// reproduces t to floating-point roundoff for any valid target.
SkeletonTransform compute_transform(const HandSkeleton& canonical,
                                    const HandSkeleton& target);

HandSkeleton apply_transform(const SkeletonTransform& t, const HandSkeleton& s);

// Shipped default per-bone angle windows. Level-1 windows are centered on
// the canonical pose; deeper levels use fixed anatomical ranges. These are
// configuration defaults, not ground truth.
const AngleLimits& default_angle_limits();

AngleLimits load_angle_limits_json(const std::string& path);
void save_angle_limits_json(const AngleLimits& l, const std::string& path);

// Draws a valid skeleton: global rigid motion of the palm, per-bone angles
// uniform within `limits`, bone lengths scaled by U(1-length_jitter,
// 1+length_jitter) relative to `canonical`.
HandSkeleton sample_random_skeleton(const HandSkeleton& canonical,
                                    const AngleLimits& limits,
                                    double length_jitter, std::mt19937_64& rng);

}  // namespace handsplat
