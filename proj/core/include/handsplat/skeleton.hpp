#pragma once

#include <array>
#include <optional>
#include <string>

#include "handsplat/types.hpp"

namespace handsplat {

inline constexpr int kNumJoints = 21;
inline constexpr int kNumBones = 20;

// Fixed hand topology. Joint 0 is the wrist root. Joints 1..5 are the five
// level-1 joints (thumb, index, middle, ring, pinky), 6..10 level 2,
// 11..15 level 3, 16..20 the fingertips. Bone i connects parent(i) -> i.
inline constexpr int joint_parent(int i) { return i <= 5 ? 0 : i - 5; }
inline constexpr int joint_level(int i) { return i == 0 ? 0 : (i - 1) / 5 + 1; }
inline constexpr int joint_finger(int i) { return (i - 1) % 5; }  // 0=thumb..4=pinky

// 21 joint positions in meters.
struct HandSkeleton {
  std::array<Vec3, kNumJoints> joints{};

  const Vec3& root() const { return joints[0]; }
};

// Bone vectors b_i = joints[i] - joints[parent(i)], indexed 1..20 (slot 0
// unused), with cached lengths.
struct BoneVectors {
  std::array<Vec3, kNumJoints> bones{};
  std::array<double, kNumJoints> lengths{};
};

// Throws DegenerateSkeletonError on non-finite coordinates or a bone of
// (near-)zero length.
void validate_skeleton(const HandSkeleton& s);

BoneVectors bone_vectors(const HandSkeleton& s);

// The fixed canonical (template-space) skeleton: a relaxed right hand,
// fingers along +y, palm facing +z, thumb on the +x side.
const HandSkeleton& canonical_skeleton();

// JSON skeleton file: {"format":"jg21","units":"m","joints":[[x,y,z] x 21]}.
// An optional "joint_order" array of 21 indices permutes file order into the
// topology above (joint_order[k] = internal index of the k-th file entry);
// `order` does the same for files without the key.
HandSkeleton load_skeleton_json(const std::string& path,
                                const std::optional<std::array<int, kNumJoints>>& order = std::nullopt);
void save_skeleton_json(const HandSkeleton& s, const std::string& path);

HandSkeleton parse_skeleton_json(const std::string& text,
                                 const std::optional<std::array<int, kNumJoints>>& order = std::nullopt);
std::string skeleton_to_json(const HandSkeleton& s);

// Mean per-joint position error between two skeletons (meters).
double mpjpe(const HandSkeleton& a, const HandSkeleton& b);

}  // namespace handsplat
