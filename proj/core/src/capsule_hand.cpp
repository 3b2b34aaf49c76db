#include "handsplat/capsule_hand.hpp"

#include <cmath>

#include "handsplat/errors.hpp"

namespace handsplat {

double capsule_radius(int bone) {
  const int level = joint_level(bone);
  const bool thumb = joint_finger(bone) == 0;
  const bool pinky = joint_finger(bone) == 4;
  double r;
  switch (level) {
    case 1: r = thumb ? 0.0105 : 0.0100; break;
    case 2: r = thumb ? 0.0092 : 0.0082; break;
    case 3: r = 0.0072; break;
    default: r = 0.0063; break;
  }
  if (pinky) r *= 0.88;
  return r;
}

namespace {

struct Builder {
  std::vector<Vec3> verts;
  std::vector<std::array<uint32_t, 3>> faces;
  std::vector<std::array<Vec2, 3>> uvs;

  void add_face(uint32_t a, uint32_t b, uint32_t c, const Vec2& ua,
                const Vec2& ub, const Vec2& uc) {
    faces.push_back({a, b, c});
    uvs.push_back({ua, ub, uc});
  }
};

void append_capsule(Builder& out, int bone, const Vec3& base, const Vec3& tip,
                    double radius, const CapsuleHandOptions& opts) {
  const int ns = opts.segments;
  const Vec3 axis = tip - base;
  const double len = axis.norm();
  if (len <= 0) throw DegenerateSkeletonError("zero-length capsule axis");
  const Mat3 rot =
      Eigen::Quaterniond::FromTwoVectors(Vec3(0, 0, 1), axis / len)
          .toRotationMatrix();
  auto place = [&](double ring_radius, double z) {
    std::vector<uint32_t> ring(ns);
    for (int s = 0; s < ns; ++s) {
      double ang = 2.0 * M_PI * s / ns;
      Vec3 local(ring_radius * std::cos(ang), ring_radius * std::sin(ang), z);
      ring[s] = static_cast<uint32_t>(out.verts.size());
      out.verts.push_back(base + rot * local);
    }
    return ring;
  };

  // Rings from the bottom pole to the top pole; z runs over [-r, len+r].
  std::vector<std::vector<uint32_t>> rings;
  std::vector<double> ring_z;
  for (int k = 1; k <= opts.cap_rings; ++k) {
    double phi = -M_PI / 2.0 + (M_PI / 2.0) * k / opts.cap_rings;
    rings.push_back(place(radius * std::cos(phi), radius * std::sin(phi)));
    ring_z.push_back(radius * std::sin(phi));
  }
  for (int j = 1; j <= opts.cylinder_rings; ++j) {
    double z = len * j / opts.cylinder_rings;
    rings.push_back(place(radius, z));
    ring_z.push_back(z);
  }
  for (int k = 1; k < opts.cap_rings; ++k) {
    double phi = (M_PI / 2.0) * k / opts.cap_rings;
    rings.push_back(place(radius * std::cos(phi), len + radius * std::sin(phi)));
    ring_z.push_back(len + radius * std::sin(phi));
  }
  uint32_t bottom_pole = static_cast<uint32_t>(out.verts.size());
  out.verts.push_back(base + rot * Vec3(0, 0, -radius));
  uint32_t top_pole = static_cast<uint32_t>(out.verts.size());
  out.verts.push_back(base + rot * Vec3(0, 0, len + radius));

  auto strip_u = [&](double z) {
    double t = (z + radius) / (len + 2.0 * radius);
    return (bone - 1 + std::clamp(t, 0.0, 1.0)) / kNumBones;
  };
  auto seg_v = [&](int s) { return static_cast<double>(s) / ns; };

  const double u_bottom = strip_u(-radius);
  const double u_top = strip_u(len + radius);
  // Bottom pole fan.
  for (int s = 0; s < ns; ++s) {
    int sn = (s + 1) % ns;
    double v0 = seg_v(s), v1 = seg_v(s + 1);
    double u0 = strip_u(ring_z[0]);
    out.add_face(bottom_pole, rings[0][sn], rings[0][s],
                 {u_bottom, 0.5 * (v0 + v1)}, {u0, v1}, {u0, v0});
  }
  // Ring-to-ring quads.
  for (size_t r = 0; r + 1 < rings.size(); ++r) {
    double ua = strip_u(ring_z[r]), ub = strip_u(ring_z[r + 1]);
    for (int s = 0; s < ns; ++s) {
      int sn = (s + 1) % ns;
      double v0 = seg_v(s), v1 = seg_v(s + 1);
      uint32_t a = rings[r][s], b = rings[r][sn];
      uint32_t c = rings[r + 1][s], d = rings[r + 1][sn];
      out.add_face(a, b, d, {ua, v0}, {ua, v1}, {ub, v1});
      out.add_face(a, d, c, {ua, v0}, {ub, v1}, {ub, v0});
    }
  }
  // Top pole fan.
  const auto& last = rings.back();
  double ul = strip_u(ring_z.back());
  for (int s = 0; s < ns; ++s) {
    int sn = (s + 1) % ns;
    double v0 = seg_v(s), v1 = seg_v(s + 1);
    out.add_face(top_pole, last[s], last[sn], {u_top, 0.5 * (v0 + v1)},
                 {ul, v0}, {ul, v1});
  }
}

}  // namespace

CanonicalMesh capsule_hand_mesh(const HandSkeleton& skeleton,
                                const CapsuleHandOptions& opts) {
  validate_skeleton(skeleton);
  Builder b;
  for (int bone = 1; bone < kNumJoints; ++bone) {
    append_capsule(b, bone, skeleton.joints[joint_parent(bone)],
                   skeleton.joints[bone], capsule_radius(bone) * opts.radius_scale,
                   opts);
  }
  CanonicalMesh m;
  m.vertices.resize(static_cast<int>(b.verts.size()), 3);
  for (size_t i = 0; i < b.verts.size(); ++i) m.vertices.row(i) = b.verts[i];
  m.faces.resize(static_cast<int>(b.faces.size()), 3);
  for (size_t f = 0; f < b.faces.size(); ++f)
    for (int c = 0; c < 3; ++c) m.faces(static_cast<int>(f), c) = b.faces[f][c];
  m.face_uvs = std::move(b.uvs);
  validate_mesh(m);
  return m;
}

}  // namespace handsplat
