#include "handsplat/weight_field.hpp"

#include <cstring>
#include <fstream>

#include "handsplat/errors.hpp"
#include "handsplat/hand_template.hpp"
#include "handsplat/parallel.hpp"

namespace handsplat {

namespace {
constexpr double kEps = 1e-4;        // distance softening (meters)
constexpr double kPalmRigidity = 0.5;
}  // namespace

Vec3 WeightField::voxel_center(int x, int y, int z) const {
  Vec3 cell = (bbox_max - bbox_min).cwiseQuotient(dims.cast<double>());
  return bbox_min + cell.cwiseProduct(Vec3(x + 0.5, y + 0.5, z + 0.5));
}

JointWeights evaluate_bone_weights(const HandSkeleton& skeleton, const Vec3& p) {
  JointWeights w = JointWeights::Zero();
  for (int bone = 1; bone < kNumJoints; ++bone) {
    Segment seg{skeleton.joints[joint_parent(bone)], skeleton.joints[bone]};
    double d = point_segment_distance(p, seg);
    double raw = 1.0 / ((kEps + d) * (kEps + d));
    w[bone] = raw;
    if (bone <= 5) w[0] += kPalmRigidity * raw;
  }
  w /= w.sum();
  return w;
}

WeightField build_weight_field(const CanonicalMesh& mesh,
                               const HandSkeleton& skeleton,
                               const Eigen::Vector3i& resolution, int threads) {
  if (resolution.minCoeff() < 8)
    throw DomainError("weight field resolution must be >= 8 per axis");
  validate_skeleton(skeleton);

  WeightField f;
  f.dims = resolution;
  Vec3 lo = mesh.vertices.colwise().minCoeff().transpose();
  Vec3 hi = mesh.vertices.colwise().maxCoeff().transpose();
  Vec3 pad = 0.05 * (hi - lo).cwiseMax(1e-6);
  // Quantize bounds to f32 so that save/load round trips exactly.
  for (int d = 0; d < 3; ++d) {
    f.bbox_min[d] = static_cast<float>(lo[d] - pad[d]);
    f.bbox_max[d] = static_cast<float>(hi[d] + pad[d]);
  }
  f.weights.resize(f.voxel_count() * kNumJoints);

  const int nx = f.dims.x(), ny = f.dims.y(), nz = f.dims.z();
  parallel_for(static_cast<size_t>(nz), threads, [&](size_t z0, size_t z1) {
    for (size_t z = z0; z < z1; ++z) {
      for (int y = 0; y < ny; ++y) {
        for (int x = 0; x < nx; ++x) {
          JointWeights w = evaluate_bone_weights(
              skeleton, f.voxel_center(x, y, static_cast<int>(z)));
          float* dst = const_cast<float*>(f.voxel(x, y, static_cast<int>(z)));
          for (int j = 0; j < kNumJoints; ++j) dst[j] = static_cast<float>(w[j]);
        }
      }
    }
  });
  return f;
}

namespace {

struct TrilinearSetup {
  int i0[3], i1[3];
  double t[3];
  double inv_cell[3];
  bool clamped[3];
};

TrilinearSetup setup(const WeightField& f, const Vec3& p) {
  TrilinearSetup s;
  Vec3 cell = (f.bbox_max - f.bbox_min).cwiseQuotient(f.dims.cast<double>());
  for (int d = 0; d < 3; ++d) {
    double g = (p[d] - f.bbox_min[d]) / cell[d] - 0.5;
    s.clamped[d] = g <= 0.0 || g >= f.dims[d] - 1;
    g = std::clamp(g, 0.0, static_cast<double>(f.dims[d] - 1));
    int i0 = std::min(static_cast<int>(g), f.dims[d] - 2);
    i0 = std::max(i0, 0);
    s.i0[d] = i0;
    s.i1[d] = std::min(i0 + 1, f.dims[d] - 1);
    s.t[d] = g - i0;
    s.inv_cell[d] = 1.0 / cell[d];
  }
  return s;
}

}  // namespace

JointWeights query_weights(const WeightField& f, const Vec3& p) {
  return query_weights_grad(f, p, nullptr);
}

JointWeights query_weights_grad(const WeightField& f, const Vec3& p,
                                JointWeightsGrad* grad) {
  TrilinearSetup s = setup(f, p);
  JointWeights out = JointWeights::Zero();
  if (grad) grad->setZero();
  for (int cz = 0; cz < 2; ++cz) {
    double wz = cz ? s.t[2] : 1.0 - s.t[2];
    double dz = cz ? 1.0 : -1.0;
    for (int cy = 0; cy < 2; ++cy) {
      double wy = cy ? s.t[1] : 1.0 - s.t[1];
      double dy = cy ? 1.0 : -1.0;
      for (int cx = 0; cx < 2; ++cx) {
        double wx = cx ? s.t[0] : 1.0 - s.t[0];
        double dx = cx ? 1.0 : -1.0;
        const float* v = f.voxel(cx ? s.i1[0] : s.i0[0], cy ? s.i1[1] : s.i0[1],
                                 cz ? s.i1[2] : s.i0[2]);
        double w = wx * wy * wz;
        for (int j = 0; j < kNumJoints; ++j) {
          double val = v[j];
          out[j] += w * val;
          if (grad) {
            if (!s.clamped[0]) (*grad)(j, 0) += dx * wy * wz * s.inv_cell[0] * val;
            if (!s.clamped[1]) (*grad)(j, 1) += wx * dy * wz * s.inv_cell[1] * val;
            if (!s.clamped[2]) (*grad)(j, 2) += wx * wy * dz * s.inv_cell[2] * val;
          }
        }
      }
    }
  }
  return out;
}

void save_weight_field(const WeightField& f, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write weight field: " + path);
  const uint32_t version = 1;
  out.write("JGWF", 4);
  out.write(reinterpret_cast<const char*>(&version), 4);
  uint32_t dims[3] = {static_cast<uint32_t>(f.dims.x()),
                      static_cast<uint32_t>(f.dims.y()),
                      static_cast<uint32_t>(f.dims.z())};
  out.write(reinterpret_cast<const char*>(dims), sizeof dims);
  float bbox[6] = {static_cast<float>(f.bbox_min.x()),
                   static_cast<float>(f.bbox_min.y()),
                   static_cast<float>(f.bbox_min.z()),
                   static_cast<float>(f.bbox_max.x()),
                   static_cast<float>(f.bbox_max.y()),
                   static_cast<float>(f.bbox_max.z())};
  out.write(reinterpret_cast<const char*>(bbox), sizeof bbox);
  out.write(reinterpret_cast<const char*>(f.weights.data()),
            static_cast<std::streamsize>(f.weights.size() * sizeof(float)));
  if (!out) throw IoError("short write on weight field: " + path);
}

WeightField load_weight_field(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open weight field: " + path);
  char magic[4];
  uint32_t version = 0, dims[3] = {0, 0, 0};
  float bbox[6];
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&version), 4);
  in.read(reinterpret_cast<char*>(dims), sizeof dims);
  in.read(reinterpret_cast<char*>(bbox), sizeof bbox);
  if (!in || std::memcmp(magic, "JGWF", 4) != 0)
    throw IoError("not a weight field file: " + path);
  if (version != 1)
    throw VersionError("unsupported weight field version " +
                       std::to_string(version));
  WeightField f;
  f.dims = Eigen::Vector3i(static_cast<int>(dims[0]), static_cast<int>(dims[1]),
                           static_cast<int>(dims[2]));
  f.bbox_min = Vec3(bbox[0], bbox[1], bbox[2]);
  f.bbox_max = Vec3(bbox[3], bbox[4], bbox[5]);
  f.weights.resize(f.voxel_count() * kNumJoints);
  in.read(reinterpret_cast<char*>(f.weights.data()),
          static_cast<std::streamsize>(f.weights.size() * sizeof(float)));
  if (!in) throw IoError("truncated weight field: " + path);
  return f;
}

}  // namespace handsplat
