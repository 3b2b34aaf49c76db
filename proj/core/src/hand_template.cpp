#include "handsplat/hand_template.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <random>

#include "handsplat/errors.hpp"
#include "handsplat/parallel.hpp"

namespace handsplat {

double point_segment_distance(const Vec3& p, const Segment& seg) {
  Vec3 d = seg.second - seg.first;
  double len2 = d.squaredNorm();
  if (len2 <= 0) return (p - seg.first).norm();
  double t = std::clamp((p - seg.first).dot(d) / len2, 0.0, 1.0);
  return (p - (seg.first + t * d)).norm();
}

namespace {

int nearest_segment(const Vec3& p, const std::vector<Segment>& segments) {
  int best = 0;
  double best_d = point_segment_distance(p, segments[0]);
  for (size_t i = 1; i < segments.size(); ++i) {
    double d = point_segment_distance(p, segments[i]);
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(i);
    }
  }
  return best;
}

float f32(double v) { return static_cast<float>(v); }

}  // namespace

void sample_interior_points(const CanonicalMesh& mesh,
                            const std::vector<Segment>& segments,
                            int n_per_segment, uint64_t seed, Points3* points,
                            std::vector<uint8_t>* labels, int threads) {
  if (segments.empty() || n_per_segment < 1)
    throw DomainError("need at least one segment and one sample");
  validate_mesh(mesh);
  MeshIndex index(mesh);

  const size_t ns = segments.size();
  std::vector<std::vector<Vec3>> accepted(ns);
  std::vector<std::string> failure(ns);

  parallel_for(ns, threads, [&](size_t begin, size_t end) {
    for (size_t si = begin; si < end; ++si) {
      const Segment& seg = segments[si];
      std::seed_seq sq{seed, static_cast<uint64_t>(si)};
      std::mt19937_64 rng(sq);
      std::uniform_real_distribution<double> unit(0.0, 1.0);

      // Local thickness estimate from the segment midpoint; used to size the
      // proposal box around the segment.
      Vec3 mid = 0.5 * (seg.first + seg.second);
      double thickness = index.closest_point(mid).distance;
      double pad = std::max(3.0 * thickness, 0.003);

      auto& out = accepted[si];
      out.reserve(n_per_segment);
      const long budget = 4000L * n_per_segment + 200000L;
      long draws = 0;
      while (static_cast<int>(out.size()) < n_per_segment) {
        if (draws >= budget) {
          failure[si] = "segment " + std::to_string(si) +
                        ": interior sampling exhausted after " +
                        std::to_string(draws) + " draws";
          break;
        }
        if (draws > 0 && draws % (1000L * n_per_segment) == 0) pad *= 1.5;
        ++draws;
        Vec3 lo = seg.first.cwiseMin(seg.second).array() - pad;
        Vec3 hi = seg.first.cwiseMax(seg.second).array() + pad;
        Vec3 p(lo.x() + unit(rng) * (hi.x() - lo.x()),
               lo.y() + unit(rng) * (hi.y() - lo.y()),
               lo.z() + unit(rng) * (hi.z() - lo.z()));
        if (nearest_segment(p, segments) != static_cast<int>(si)) continue;
        if (winding_number(mesh, p) <= 0.5) continue;
        out.push_back(p);
      }
    }
  });

  for (const auto& msg : failure)
    if (!msg.empty()) throw SamplingExhaustedError(msg);

  points->resize(static_cast<int>(ns) * n_per_segment, 3);
  labels->resize(ns * n_per_segment);
  int row = 0;
  for (size_t si = 0; si < ns; ++si) {
    for (const Vec3& p : accepted[si]) {
      points->row(row) = p;
      (*labels)[row] = static_cast<uint8_t>(si);
      ++row;
    }
  }
}

Vec3 compute_uvd(const MeshIndex& index, const Vec3& point, double d_max) {
  if (d_max <= 0) throw DomainError("d_max must be positive");
  if (winding_number(index.mesh(), point) <= 0.5)
    throw DomainError("point lies outside the mesh");
  SurfacePoint sp = index.closest_point(point);
  double d = std::clamp(sp.distance / d_max, 0.0, 1.0);
  return Vec3(sp.uv.x(), sp.uv.y(), d);
}

Vec3 compute_uvd(const CanonicalMesh& mesh, const Vec3& point, double d_max) {
  MeshIndex index(mesh);
  return compute_uvd(index, point, d_max);
}

CanonicalTemplate sample_template(const CanonicalMesh& mesh,
                                  const HandSkeleton& skeleton, int n_per_bone,
                                  uint64_t seed, int threads) {
  validate_skeleton(skeleton);
  std::vector<Segment> segments;
  segments.reserve(kNumBones);
  for (int bone = 1; bone < kNumJoints; ++bone)
    segments.emplace_back(skeleton.joints[joint_parent(bone)],
                          skeleton.joints[bone]);

  Points3 pts;
  std::vector<uint8_t> seg_labels;
  sample_interior_points(mesh, segments, n_per_bone, seed, &pts, &seg_labels,
                         threads);

  MeshIndex index(mesh);
  const int g = static_cast<int>(pts.rows());
  std::vector<SurfacePoint> surface(g);
  parallel_for(static_cast<size_t>(g), threads, [&](size_t begin, size_t end) {
    for (size_t i = begin; i < end; ++i)
      surface[i] = index.closest_point(pts.row(i).transpose());
  });
  double d_max = 0.0;
  for (const auto& sp : surface) d_max = std::max(d_max, sp.distance);
  if (d_max <= 0) d_max = 1e-9;
  d_max = f32(d_max);

  CanonicalTemplate t;
  t.n_per_bone = n_per_bone;
  t.d_max = d_max;
  t.positions.resize(g, 3);
  t.uvd.resize(g, 3);
  t.bone_label.resize(g);
  for (int i = 0; i < g; ++i) {
    for (int c = 0; c < 3; ++c) t.positions(i, c) = f32(pts(i, c));
    t.uvd(i, 0) = f32(surface[i].uv.x());
    t.uvd(i, 1) = f32(surface[i].uv.y());
    t.uvd(i, 2) = f32(std::clamp(surface[i].distance / d_max, 0.0, 1.0));
    t.bone_label[i] = static_cast<uint8_t>(seg_labels[i] + 1);  // bones 1..20
  }
  return t;
}

void save_template(const CanonicalTemplate& t, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write template file: " + path);
  const uint32_t version = 1;
  const uint32_t g = static_cast<uint32_t>(t.size());
  out.write("JGTP", 4);
  out.write(reinterpret_cast<const char*>(&version), 4);
  out.write(reinterpret_cast<const char*>(&g), 4);
  for (uint32_t i = 0; i < g; ++i) {
    float rec[6] = {f32(t.positions(i, 0)), f32(t.positions(i, 1)),
                    f32(t.positions(i, 2)), f32(t.uvd(i, 0)),
                    f32(t.uvd(i, 1)),       f32(t.uvd(i, 2))};
    out.write(reinterpret_cast<const char*>(rec), sizeof rec);
    out.write(reinterpret_cast<const char*>(&t.bone_label[i]), 1);
  }
  float dm = f32(t.d_max);
  out.write(reinterpret_cast<const char*>(&dm), 4);
  if (!out) throw IoError("short write on template file: " + path);
}

CanonicalTemplate load_template(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open template file: " + path);
  char magic[4];
  uint32_t version = 0, g = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&version), 4);
  in.read(reinterpret_cast<char*>(&g), 4);
  if (!in || std::memcmp(magic, "JGTP", 4) != 0)
    throw IoError("not a template file: " + path);
  if (version != 1)
    throw VersionError("unsupported template version " + std::to_string(version));
  CanonicalTemplate t;
  t.positions.resize(g, 3);
  t.uvd.resize(g, 3);
  t.bone_label.resize(g);
  for (uint32_t i = 0; i < g; ++i) {
    float rec[6];
    in.read(reinterpret_cast<char*>(rec), sizeof rec);
    in.read(reinterpret_cast<char*>(&t.bone_label[i]), 1);
    for (int c = 0; c < 3; ++c) {
      t.positions(i, c) = rec[c];
      t.uvd(i, c) = rec[3 + c];
    }
  }
  float dm = 0;
  in.read(reinterpret_cast<char*>(&dm), 4);
  if (!in) throw IoError("truncated template file: " + path);
  t.d_max = dm;
  std::array<int, kNumJoints> counts{};
  for (uint8_t b : t.bone_label) {
    if (b < 1 || b > kNumBones)
      throw IoError("template bone label out of range");
    counts[b]++;
  }
  t.n_per_bone = g > 0 ? counts[1] : 0;
  return t;
}

}  // namespace handsplat
