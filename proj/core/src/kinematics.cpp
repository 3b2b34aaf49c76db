#include "handsplat/kinematics.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "handsplat/errors.hpp"

namespace handsplat {
namespace {

constexpr double kParallelTol = 1e-9;

Mat3 rot_y(double a) {
  Mat3 m;
  m << std::cos(a), 0, std::sin(a), 0, 1, 0, -std::sin(a), 0, std::cos(a);
  return m;
}

Mat3 rot_x(double a) {
  Mat3 m;
  m << 1, 0, 0, 0, std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a);
  return m;
}

// Local rotation whose z-image is direction_from_angles(f, a).
Mat3 local_rotation(double flexion, double abduction) {
  return rot_y(flexion) * rot_x(-abduction);
}

// Plane normal spanned by two adjacent palm bones.
Vec3 plane_normal(const Vec3& a, const Vec3& b) {
  Vec3 n = a.cross(b);
  double len = n.norm();
  if (len < kParallelTol)
    throw DegeneratePalmError("adjacent palm bones are collinear");
  return n / len;
}

// Palm plane index used by finger f (1=thumb..5=pinky): the plane between
// bones f and f+1, except the pinky which reuses the ring/pinky plane.
int finger_plane(int finger) { return std::min(finger, 4); }

int bone_finger(int bone) { return (bone - 1) % 5 + 1; }

struct DirFrames {
  std::array<Vec3, kNumJoints> dirs{};      // unit bone directions
  std::array<Mat3, kNumJoints> frames{};    // bone-local bases
  std::array<Vec3, 5> palm_normals{};       // n_k, k=1..4
};

Mat3 palm_frame_from(const std::array<Vec3, kNumJoints>& dirs) {
  Vec3 z = dirs[3];
  Vec3 n2 = plane_normal(dirs[2], dirs[3]);
  Vec3 n3 = plane_normal(dirs[3], dirs[4]);
  Vec3 y = n2 + n3;
  y -= y.dot(z) * z;
  double len = y.norm();
  if (len < kParallelTol)
    throw DegeneratePalmError("palm reference frame is undefined");
  y /= len;
  Vec3 x = y.cross(z);
  Mat3 m;
  m.col(0) = x;
  m.col(1) = y;
  m.col(2) = z;
  return m;
}

Mat3 level2_frame(const Vec3& bone_dir, const Vec3& palm_plane_normal) {
  Vec3 z = bone_dir;
  Vec3 y = palm_plane_normal - palm_plane_normal.dot(z) * z;
  double len = y.norm();
  if (len < kParallelTol)
    throw DegeneratePalmError("palm plane normal parallel to finger bone");
  y /= len;
  Vec3 x = y.cross(z);
  Mat3 m;
  m.col(0) = x;
  m.col(1) = y;
  m.col(2) = z;
  return m;
}

// Builds frames from known unit directions; shared by the extraction path
// and by build_local_frames.
DirFrames frames_from_directions(const std::array<Vec3, kNumJoints>& dirs) {
  DirFrames out;
  out.dirs = dirs;
  Mat3 palm = palm_frame_from(dirs);
  for (int i = 1; i <= 5; ++i) out.frames[i] = palm;
  for (int k = 1; k <= 4; ++k)
    out.palm_normals[k] = plane_normal(dirs[k], dirs[k + 1]);
  for (int i = 6; i <= 10; ++i)
    out.frames[i] = level2_frame(dirs[i - 5], out.palm_normals[finger_plane(i - 5)]);
  for (int i = 11; i <= 20; ++i) {
    int p = i - 5;
    Vec3 v = out.frames[p].transpose() * dirs[p];
    double f, a;
    angles_from_direction(v, p, &f, &a);
    out.frames[i] = out.frames[p] * local_rotation(f, a);
  }
  return out;
}

std::array<Vec3, kNumJoints> unit_directions(const BoneVectors& bv) {
  std::array<Vec3, kNumJoints> dirs{};
  for (int i = 1; i < kNumJoints; ++i) dirs[i] = bv.bones[i] / bv.lengths[i];
  return dirs;
}

// Regenerates unit bone directions and frames from per-bone angles, chained
// from the given level-1 frame. This is the reconstruction half of the
// extract/rebuild round trip.
DirFrames directions_from_angles(const Mat3& level1_frame,
                                 const std::array<double, kNumJoints>& flexion,
                                 const std::array<double, kNumJoints>& abduction) {
  DirFrames out;
  for (int i = 1; i <= 5; ++i) {
    out.frames[i] = level1_frame;
    out.dirs[i] = level1_frame * direction_from_angles(flexion[i], abduction[i]);
  }
  for (int k = 1; k <= 4; ++k)
    out.palm_normals[k] = plane_normal(out.dirs[k], out.dirs[k + 1]);
  for (int i = 6; i <= 10; ++i) {
    out.frames[i] =
        level2_frame(out.dirs[i - 5], out.palm_normals[finger_plane(i - 5)]);
    out.dirs[i] = out.frames[i] * direction_from_angles(flexion[i], abduction[i]);
  }
  for (int i = 11; i <= 20; ++i) {
    int p = i - 5;
    out.frames[i] = out.frames[p] * local_rotation(flexion[p], abduction[p]);
    out.dirs[i] = out.frames[i] * direction_from_angles(flexion[i], abduction[i]);
  }
  return out;
}

// Unique rotation mapping the (direction, normal) pair onto another. Both
// normals must be perpendicular to their directions.
Mat3 align_pair(const Vec3& d_from, const Vec3& n_from, const Vec3& d_to,
                const Vec3& n_to) {
  auto triad = [](const Vec3& d, const Vec3& n) {
    Vec3 nn = n - n.dot(d) * d;
    nn.normalize();
    Mat3 t;
    t.col(0) = d;
    t.col(1) = nn;
    t.col(2) = d.cross(nn);
    return t;
  };
  return triad(d_to, n_to) * triad(d_from, n_from).transpose();
}

double safe_acos(double x) { return std::acos(std::clamp(x, -1.0, 1.0)); }

}  // namespace

Vec3 direction_from_angles(double flexion, double abduction) {
  double ca = std::cos(abduction);
  return Vec3(ca * std::sin(flexion), std::sin(abduction),
              ca * std::cos(flexion));
}

void angles_from_direction(const Vec3& v, int joint_index, double* flexion,
                           double* abduction) {
  double xz = std::hypot(v.x(), v.z());
  if (xz < kParallelTol)
    throw GimbalDegenerateError(
        joint_index, "bone " + std::to_string(joint_index) +
                         " is parallel to its local y-axis");
  *flexion = std::atan2(v.x(), v.z());
  *abduction = std::asin(std::clamp(v.y(), -1.0, 1.0));
}

Mat3 palm_frame(const HandSkeleton& s) {
  return palm_frame_from(unit_directions(bone_vectors(s)));
}

LocalFrames build_local_frames(const HandSkeleton& s) {
  DirFrames df = frames_from_directions(unit_directions(bone_vectors(s)));
  LocalFrames out;
  out.frames = df.frames;
  return out;
}

PoseAngles extract_pose(const HandSkeleton& s) {
  BoneVectors bv = bone_vectors(s);
  DirFrames df = frames_from_directions(unit_directions(bv));
  PoseAngles pose;
  for (int i = 1; i < kNumJoints; ++i) {
    Vec3 v = df.frames[i].transpose() * df.dirs[i];
    angles_from_direction(v, i, &pose.flexion[i], &pose.abduction[i]);
    pose.bone_lengths[i] = bv.lengths[i];
  }
  for (int k = 1; k <= 4; ++k)
    pose.palm_inter_bone[k] = safe_acos(df.dirs[k].dot(df.dirs[k + 1]));
  for (int k = 1; k <= 3; ++k)
    pose.palm_dihedral[k] =
        safe_acos(df.palm_normals[k].dot(df.palm_normals[k + 1]));
  pose.root_position = s.root();
  return pose;
}

SkeletonTransform compute_transform(const HandSkeleton& canonical,
                                    const HandSkeleton& target) {
  BoneVectors bv_c = bone_vectors(canonical);
  BoneVectors bv_t = bone_vectors(target);
  DirFrames can = frames_from_directions(unit_directions(bv_c));
  DirFrames tgt = frames_from_directions(unit_directions(bv_t));

  // Target angles in the target's own frames; canonical angles likewise.
  std::array<double, kNumJoints> fc{}, ac{}, ft{}, at{};
  for (int i = 1; i < kNumJoints; ++i) {
    angles_from_direction(can.frames[i].transpose() * can.dirs[i], i, &fc[i], &ac[i]);
    angles_from_direction(tgt.frames[i].transpose() * tgt.dirs[i], i, &ft[i], &at[i]);
  }

  // Rebuild the target's angles in the canonical palm frame. The result is
  // the target hand rotated by the palm-frame mismatch, which P removes
  // finger by finger.
  DirFrames posed = directions_from_angles(can.frames[1], ft, at);

  // Joint positions relative to the root, before palm alignment.
  std::array<Vec3, kNumJoints> rel{};
  rel[0].setZero();
  for (int i = 1; i < kNumJoints; ++i)
    rel[i] = rel[joint_parent(i)] + posed.dirs[i] * bv_t.lengths[i];

  // Per-finger palm alignment: map the pre-aligned level-1 direction and its
  // palm-plane normal onto the target's.
  std::array<Mat3, 6> p_rot{};
  for (int f = 1; f <= 5; ++f) {
    int k = finger_plane(f);
    p_rot[f] = align_pair(posed.dirs[f], posed.palm_normals[k], tgt.dirs[f],
                          tgt.palm_normals[k]);
  }

  const Vec3 root_t = target.root();
  SkeletonTransform out;
  for (auto* f : {&out.K, &out.F, &out.R, &out.F_back, &out.K_scale, &out.P})
    (*f)[0] = Mat4::Identity();

  for (int i = 1; i < kNumJoints; ++i) {
    int p = joint_parent(i);
    Mat4 K = Mat4::Identity();
    K.block<3, 3>(0, 0) /= bv_c.lengths[i];
    K.block<3, 1>(0, 3) = -canonical.joints[p] / bv_c.lengths[i];

    Mat4 F = rotation4(can.frames[i].transpose());
    Mat4 R = rotation4(local_rotation(ft[i], at[i]) *
                       local_rotation(fc[i], ac[i]).transpose());
    Mat4 F_back = rotation4(posed.frames[i]);

    Mat4 K_scale = Mat4::Identity();
    K_scale.block<3, 3>(0, 0) *= bv_t.lengths[i];
    K_scale.block<3, 1>(0, 3) = rel[p];

    Mat4 P = translation4(root_t) * rotation4(p_rot[bone_finger(i)]);

    out.K[i] = K;
    out.F[i] = F;
    out.R[i] = R;
    out.F_back[i] = F_back;
    out.K_scale[i] = K_scale;
    out.P[i] = P;
    out.per_joint[i] = P * K_scale * F_back * R * F * K;
  }

  // Root motion: palm-frame alignment about the canonical root.
  Mat3 q = tgt.frames[1] * can.frames[1].transpose();
  out.per_joint[0] =
      translation4(root_t) * rotation4(q) * translation4(-canonical.root());
  return out;
}

HandSkeleton apply_transform(const SkeletonTransform& t, const HandSkeleton& s) {
  HandSkeleton out;
  for (int i = 0; i < kNumJoints; ++i)
    out.joints[i] = apply_affine(t.per_joint[i], s.joints[i]);
  return out;
}

const AngleLimits& default_angle_limits() {
  static const AngleLimits limits = [] {
    AngleLimits l;
    PoseAngles canon = extract_pose(canonical_skeleton());
    for (int i = 1; i <= 5; ++i) {
      l.flexion_min[i] = canon.flexion[i] - 0.20;
      l.flexion_max[i] = canon.flexion[i] + 0.20;
      l.abduction_min[i] = canon.abduction[i] - 0.15;
      l.abduction_max[i] = canon.abduction[i] + 0.15;
    }
    for (int i = 6; i <= 10; ++i) {
      bool thumb = bone_finger(i) == 1;
      l.flexion_min[i] = thumb ? -0.15 : -0.25;
      l.flexion_max[i] = thumb ? 0.95 : 1.45;
      l.abduction_min[i] = thumb ? -0.40 : -0.30;
      l.abduction_max[i] = thumb ? 0.40 : 0.30;
    }
    for (int i = 11; i <= 15; ++i) {
      l.flexion_min[i] = -0.05;
      l.flexion_max[i] = 1.80;
      l.abduction_min[i] = -0.08;
      l.abduction_max[i] = 0.08;
    }
    for (int i = 16; i < kNumJoints; ++i) {
      l.flexion_min[i] = -0.08;
      l.flexion_max[i] = 1.35;
      l.abduction_min[i] = -0.06;
      l.abduction_max[i] = 0.06;
    }
    return l;
  }();
  return limits;
}

AngleLimits load_angle_limits_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open angle limits file: " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed angle limits JSON: ") + e.what());
  }
  if (!doc.contains("bones") || doc["bones"].size() != kNumBones)
    throw IoError("angle limits must list 20 bones");
  AngleLimits l;
  for (int i = 1; i < kNumJoints; ++i) {
    const auto& row = doc["bones"][i - 1];
    l.flexion_min[i] = row.at("flexion_min").get<double>();
    l.flexion_max[i] = row.at("flexion_max").get<double>();
    l.abduction_min[i] = row.at("abduction_min").get<double>();
    l.abduction_max[i] = row.at("abduction_max").get<double>();
    if (l.flexion_min[i] >= l.flexion_max[i] ||
        l.abduction_min[i] >= l.abduction_max[i])
      throw IoError("angle limit min >= max for bone " + std::to_string(i));
  }
  return l;
}

void save_angle_limits_json(const AngleLimits& l, const std::string& path) {
  nlohmann::json bones = nlohmann::json::array();
  for (int i = 1; i < kNumJoints; ++i) {
    bones.push_back({{"flexion_min", l.flexion_min[i]},
                     {"flexion_max", l.flexion_max[i]},
                     {"abduction_min", l.abduction_min[i]},
                     {"abduction_max", l.abduction_max[i]}});
  }
  nlohmann::json doc;
  doc["bones"] = bones;
  std::ofstream out(path);
  if (!out) throw IoError("cannot write angle limits file: " + path);
  out << doc.dump(2) << "\n";
}

HandSkeleton sample_random_skeleton(const HandSkeleton& canonical,
                                    const AngleLimits& limits,
                                    double length_jitter,
                                    std::mt19937_64& rng) {
  BoneVectors bv_c = bone_vectors(canonical);
  Mat3 palm_c = palm_frame(canonical);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  for (int attempt = 0; attempt < 100; ++attempt) {
    // Uniform random rotation via a normalized quaternion.
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::Quaterniond quat(gauss(rng), gauss(rng), gauss(rng), gauss(rng));
    quat.normalize();
    Mat3 global_rot = quat.toRotationMatrix();
    Vec3 root(unit(rng) * 0.4 - 0.2, unit(rng) * 0.4 - 0.2,
              unit(rng) * 0.4 - 0.2);

    std::array<double, kNumJoints> f{}, a{}, len{};
    for (int i = 1; i < kNumJoints; ++i) {
      f[i] = limits.flexion_min[i] +
             unit(rng) * (limits.flexion_max[i] - limits.flexion_min[i]);
      a[i] = limits.abduction_min[i] +
             unit(rng) * (limits.abduction_max[i] - limits.abduction_min[i]);
      len[i] = bv_c.lengths[i] * (1.0 + length_jitter * (2.0 * unit(rng) - 1.0));
    }

    HandSkeleton s;
    try {
      DirFrames df = directions_from_angles(global_rot * palm_c, f, a);
      s.joints[0] = root;
      for (int i = 1; i < kNumJoints; ++i)
        s.joints[i] = s.joints[joint_parent(i)] + df.dirs[i] * len[i];
      extract_pose(s);  // rejects gimbal/palm degeneracies
    } catch (const Error&) {
      continue;
    }
    return s;
  }
  throw DegenerateSkeletonError(
      "could not sample a valid skeleton within the retry budget");
}

}  // namespace handsplat
