#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "handsplat/errors.hpp"
#include "handsplat/kinematics.hpp"
#include "helpers.hpp"

using namespace handsplat;
using namespace handsplat::testing;

namespace {

HandSkeleton transformed(const HandSkeleton& s, const Mat3& r, const Vec3& t) {
  HandSkeleton out;
  for (int i = 0; i < kNumJoints; ++i) out.joints[i] = r * s.joints[i] + t;
  return out;
}

HandSkeleton random_target(uint64_t seed) {
  auto g = rng(seed);
  return sample_random_skeleton(canonical_skeleton(), default_angle_limits(),
                                0.3, g);
}

}  // namespace

TEST_CASE("bone vectors follow the fixed topology") {
  BoneVectors bv = bone_vectors(canonical_skeleton());
  for (int i = 1; i < kNumJoints; ++i) CHECK(bv.lengths[i] > 0.0);
  // Level-1 bones hang off the root, deeper ones off the previous level.
  CHECK(joint_parent(3) == 0);
  CHECK(joint_parent(8) == 3);
  CHECK(joint_parent(13) == 8);
  CHECK(joint_parent(18) == 13);
}

TEST_CASE("bone vectors are translation invariant and scale with the skeleton") {
  const HandSkeleton& c = canonical_skeleton();
  BoneVectors base = bone_vectors(c);
  BoneVectors moved = bone_vectors(transformed(c, Mat3::Identity(), Vec3(1, 0, 0)));
  for (int i = 1; i < kNumJoints; ++i)
    CHECK((moved.bones[i] - base.bones[i]).norm() == doctest::Approx(0.0));

  HandSkeleton doubled;
  for (int i = 0; i < kNumJoints; ++i)
    doubled.joints[i] = c.root() + 2.0 * (c.joints[i] - c.root());
  BoneVectors big = bone_vectors(doubled);
  for (int i = 1; i < kNumJoints; ++i) {
    CHECK(big.lengths[i] == doctest::Approx(2.0 * base.lengths[i]));
    CHECK(big.bones[i].normalized().dot(base.bones[i].normalized()) ==
          doctest::Approx(1.0));
  }
}

TEST_CASE("a zero-length bone is a degenerate skeleton") {
  HandSkeleton s = canonical_skeleton();
  s.joints[7] = s.joints[2];
  CHECK_THROWS_AS(bone_vectors(s), DegenerateSkeletonError);
}

TEST_CASE("local frames are right-handed orthonormal bases") {
  LocalFrames f = build_local_frames(canonical_skeleton());
  for (int i = 1; i < kNumJoints; ++i) {
    CHECK((f.frames[i] * f.frames[i].transpose() - Mat3::Identity())
              .cwiseAbs()
              .maxCoeff() < 1e-9);
    CHECK(f.frames[i].determinant() == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("rigid rotation of the skeleton rotates every frame") {
  auto g = rng(7);
  Mat3 r = random_rotation(g);
  const HandSkeleton& c = canonical_skeleton();
  LocalFrames base = build_local_frames(c);
  LocalFrames rot = build_local_frames(transformed(c, r, Vec3(0.1, -0.2, 0.3)));
  for (int i = 1; i < kNumJoints; ++i)
    CHECK((rot.frames[i] - r * base.frames[i]).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("frame z-axes equal the normalized parent bone directions") {
  for (uint64_t seed : {1u, 2u, 3u}) {
    HandSkeleton s = random_target(seed);
    BoneVectors bv = bone_vectors(s);
    LocalFrames f = build_local_frames(s);
    for (int i = 6; i < kNumJoints; ++i) {
      Vec3 parent_dir = bv.bones[i - 5] / bv.lengths[i - 5];
      CHECK((f.frames[i].col(2) - parent_dir).norm() < 1e-9);
    }
  }
}

TEST_CASE("collinear palm bones raise the palm degeneracy") {
  HandSkeleton s = canonical_skeleton();
  // Make the middle-finger and ring-finger level-1 bones parallel.
  s.joints[4] = s.root() + 0.9 * (s.joints[3] - s.root());
  CHECK_THROWS_AS(build_local_frames(s), DegeneratePalmError);
}

TEST_CASE("angle extraction matches the closed-form directions") {
  double f, a;
  angles_from_direction(Vec3(0, 0, 1), 1, &f, &a);
  CHECK(f == doctest::Approx(0.0));
  CHECK(a == doctest::Approx(0.0));
  // A bone along the local x-axis is pure 90-degree flexion.
  angles_from_direction(Vec3(1, 0, 0), 1, &f, &a);
  CHECK(f == doctest::Approx(M_PI / 2));
  CHECK(a == doctest::Approx(0.0));
}

TEST_CASE("angles round-trip through the direction parameterization") {
  for (double f = -3.0; f <= 3.0; f += 0.37) {
    for (double a = -1.4; a <= 1.4; a += 0.23) {
      Vec3 dir = direction_from_angles(f, a);
      CHECK(dir.norm() == doctest::Approx(1.0).epsilon(1e-12));
      double f2, a2;
      angles_from_direction(dir, 1, &f2, &a2);
      CHECK(std::abs(f2 - f) < 1e-9);
      CHECK(std::abs(a2 - a) < 1e-9);
    }
  }
}

TEST_CASE("a bone along the local y-axis is gimbal degenerate") {
  double f, a;
  try {
    angles_from_direction(Vec3(0, 1, 0), 13, &f, &a);
    FAIL("expected GimbalDegenerateError");
  } catch (const GimbalDegenerateError& e) {
    CHECK(e.joint_index == 13);
  }
}

TEST_CASE("pose angles stay in their documented ranges") {
  for (uint64_t seed : {10u, 11u}) {
    HandSkeleton s = random_target(seed);
    PoseAngles p = extract_pose(s);
    for (int i = 1; i < kNumJoints; ++i) {
      CHECK(p.flexion[i] > -M_PI);
      CHECK(p.flexion[i] <= M_PI);
      CHECK(std::abs(p.abduction[i]) <= M_PI / 2);
    }
    for (int k = 1; k <= 4; ++k) {
      CHECK(p.palm_inter_bone[k] >= 0.0);
      CHECK(p.palm_inter_bone[k] <= M_PI);
    }
    CHECK((p.root_position - s.root()).norm() == 0.0);
  }
}

TEST_CASE("identity transform reproduces the canonical skeleton") {
  const HandSkeleton& c = canonical_skeleton();
  SkeletonTransform t = compute_transform(c, c);
  CHECK(mpjpe(apply_transform(t, c), c) <= 1e-12);
}

TEST_CASE("uniform bone scaling is a pure length change") {
  const HandSkeleton& c = canonical_skeleton();
  HandSkeleton target;
  for (int i = 0; i < kNumJoints; ++i)
    target.joints[i] = c.root() + 2.0 * (c.joints[i] - c.root());
  SkeletonTransform t = compute_transform(c, target);
  HandSkeleton posed = apply_transform(t, c);
  CHECK(mpjpe(posed, target) <= 1e-9);
  for (int i = 0; i < kNumJoints; ++i)
    CHECK((posed.joints[i] - (c.root() + 2.0 * (c.joints[i] - c.root()))).norm() <
          1e-9);
}

TEST_CASE("random targets round-trip with zero error") {
  const HandSkeleton& c = canonical_skeleton();
  auto g = rng(2024);
  double worst = 0.0;
  for (int k = 0; k < 300; ++k) {
    HandSkeleton target =
        sample_random_skeleton(c, default_angle_limits(), 0.3, g);
    SkeletonTransform t = compute_transform(c, target);
    worst = std::max(worst, mpjpe(apply_transform(t, c), target));
  }
  CHECK(worst <= 1e-6);
  CHECK(worst <= 1e-10);  // in practice roundoff only
}

TEST_CASE("apply_transform handles identity and pure translation") {
  const HandSkeleton& c = canonical_skeleton();
  SkeletonTransform ident;
  for (int i = 0; i < kNumJoints; ++i) ident.per_joint[i] = Mat4::Identity();
  CHECK(mpjpe(apply_transform(ident, c), c) == 0.0);

  SkeletonTransform shift = ident;
  for (int i = 0; i < kNumJoints; ++i)
    shift.per_joint[i] = translation4(Vec3(0.1, 0.2, -0.3));
  HandSkeleton moved = apply_transform(shift, c);
  for (int i = 0; i < kNumJoints; ++i)
    CHECK(moved.joints[i] == c.joints[i] + Vec3(0.1, 0.2, -0.3));
}

TEST_CASE("rigidly moving the target rigidly moves the posed output") {
  const HandSkeleton& c = canonical_skeleton();
  auto g = rng(91);
  HandSkeleton target = random_target(5);
  Mat3 r = random_rotation(g);
  Vec3 t(0.3, -0.1, 0.25);
  HandSkeleton moved = transformed(target, r, t);

  HandSkeleton posed = apply_transform(compute_transform(c, target), c);
  HandSkeleton posed_moved = apply_transform(compute_transform(c, moved), c);
  CHECK(mpjpe(posed_moved, transformed(posed, r, t)) <= 1e-6);
}

TEST_CASE("factor matrices satisfy their closed forms") {
  const HandSkeleton& c = canonical_skeleton();
  HandSkeleton target = random_target(17);
  SkeletonTransform t = compute_transform(c, target);
  BoneVectors bv = bone_vectors(c);
  PoseAngles pc = extract_pose(c);
  for (int i = 1; i < kNumJoints; ++i) {
    // Normalization step: canonical joint to its unit bone at the origin.
    Vec3 u = apply_affine(t.K[i], c.joints[i]);
    CHECK((u - bv.bones[i] / bv.lengths[i]).norm() < 1e-12);
    // Local-frame step exposes the angle parameterization.
    Vec3 local = apply_affine(t.F[i] * t.K[i], c.joints[i]);
    CHECK((local - direction_from_angles(pc.flexion[i], pc.abduction[i])).norm() <
          1e-9);
    // Chain translations land on the target parent joints after alignment.
    Vec3 ti = t.K_scale[i].block<3, 1>(0, 3);
    CHECK((apply_affine(t.P[i], ti) - target.joints[joint_parent(i)]).norm() <
          1e-9);
    // Full composition equals the stored per-joint transform.
    Mat4 composed = t.P[i] * t.K_scale[i] * t.F_back[i] * t.R[i] * t.F[i] * t.K[i];
    CHECK((composed - t.per_joint[i]).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("posed joints are differentiable in the target joints") {
  // The round trip reproduces the target exactly, so its jacobian is the
  // identity; central differences must agree to 1e-4.
  const HandSkeleton& c = canonical_skeleton();
  HandSkeleton target = random_target(23);
  const double h = 1e-6;
  double worst = 0.0;
  for (int j = 0; j < kNumJoints; ++j) {
    for (int d = 0; d < 3; ++d) {
      HandSkeleton tp = target, tm = target;
      tp.joints[j][d] += h;
      tm.joints[j][d] -= h;
      HandSkeleton rp = apply_transform(compute_transform(c, tp), c);
      HandSkeleton rm = apply_transform(compute_transform(c, tm), c);
      for (int jj = 0; jj < kNumJoints; ++jj)
        for (int dd = 0; dd < 3; ++dd) {
          double fd = (rp.joints[jj][dd] - rm.joints[jj][dd]) / (2 * h);
          double expect = (jj == j && dd == d) ? 1.0 : 0.0;
          worst = std::max(worst, std::abs(fd - expect));
        }
    }
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("degenerate targets propagate their errors") {
  const HandSkeleton& c = canonical_skeleton();
  HandSkeleton bad = c;
  bad.joints[6] = bad.joints[1];
  CHECK_THROWS_AS(compute_transform(c, bad), DegenerateSkeletonError);
  HandSkeleton collinear = c;
  collinear.joints[4] = collinear.root() + 0.9 * (collinear.joints[3] - collinear.root());
  CHECK_THROWS_AS(compute_transform(c, collinear), DegeneratePalmError);
}

TEST_CASE("random skeleton sampling is deterministic and respects limits") {
  auto g1 = rng(40), g2 = rng(40);
  const AngleLimits& limits = default_angle_limits();
  HandSkeleton a = sample_random_skeleton(canonical_skeleton(), limits, 0.3, g1);
  HandSkeleton b = sample_random_skeleton(canonical_skeleton(), limits, 0.3, g2);
  for (int i = 0; i < kNumJoints; ++i) CHECK(a.joints[i] == b.joints[i]);

  // Bone lengths stay within the +-30% jitter of the canonical lengths.
  BoneVectors canon = bone_vectors(canonical_skeleton());
  BoneVectors sampled = bone_vectors(a);
  for (int i = 1; i < kNumJoints; ++i) {
    double ratio = sampled.lengths[i] / canon.lengths[i];
    CHECK(ratio >= 0.7 - 1e-9);
    CHECK(ratio <= 1.3 + 1e-9);
  }
}

TEST_CASE("angle limits are valid windows containing the canonical pose") {
  const AngleLimits& l = default_angle_limits();
  PoseAngles canon = extract_pose(canonical_skeleton());
  for (int i = 1; i < kNumJoints; ++i) {
    CHECK(l.flexion_min[i] < l.flexion_max[i]);
    CHECK(l.abduction_min[i] < l.abduction_max[i]);
    CHECK(canon.flexion[i] >= l.flexion_min[i]);
    CHECK(canon.flexion[i] <= l.flexion_max[i]);
    CHECK(canon.abduction[i] >= l.abduction_min[i]);
    CHECK(canon.abduction[i] <= l.abduction_max[i]);
  }
}

TEST_CASE("angle limits survive a JSON round trip") {
  namespace fs = std::filesystem;
  fs::path path = fs::temp_directory_path() / "hs_limits_test.json";
  const AngleLimits& l = default_angle_limits();
  save_angle_limits_json(l, path.string());
  AngleLimits loaded = load_angle_limits_json(path.string());
  for (int i = 1; i < kNumJoints; ++i) {
    CHECK(loaded.flexion_min[i] == l.flexion_min[i]);
    CHECK(loaded.flexion_max[i] == l.flexion_max[i]);
    CHECK(loaded.abduction_min[i] == l.abduction_min[i]);
    CHECK(loaded.abduction_max[i] == l.abduction_max[i]);
  }
  fs::remove(path);
}
