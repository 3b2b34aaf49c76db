#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "handsplat/mesh.hpp"
#include "handsplat/skeleton.hpp"
#include "handsplat/types.hpp"

namespace handsplat {

// Canonical-space sample points with surface coordinates. Values are
// quantized to f32 at creation so that file round trips are bit-exact.
struct CanonicalTemplate {
  Points3 positions;                // G x 3, strictly inside the mesh
  Points3 uvd;                      // G x 3, components in [0,1]
  std::vector<uint8_t> bone_label;  // G entries, 1..20
  int n_per_bone = 0;
  double d_max = 0.0;  // normalization constant for the d coordinate

  int size() const { return static_cast<int>(positions.rows()); }
};

using Segment = std::pair<Vec3, Vec3>;

double point_segment_distance(const Vec3& p, const Segment& seg);

// Uniform interior samples near each segment: exactly n_per_segment points
// per segment, each strictly inside the mesh (winding > 0.5) and closer to
// its segment than to any other. Deterministic per seed. Throws
// SamplingExhaustedError when a segment's quota cannot be met.
void sample_interior_points(const CanonicalMesh& mesh,
                            const std::vector<Segment>& segments,
                            int n_per_segment, uint64_t seed,
                            Points3* points, std::vector<uint8_t>* labels,
                            int threads = 0);

// Surface coordinates of an interior point: (u,v) is the interpolated
// per-face UV at the closest surface point, d the distance to it divided by
// d_max and clamped to [0,1]. Throws DomainError for points outside.
Vec3 compute_uvd(const MeshIndex& index, const Vec3& point, double d_max);
Vec3 compute_uvd(const CanonicalMesh& mesh, const Vec3& point, double d_max);

CanonicalTemplate sample_template(const CanonicalMesh& mesh,
                                  const HandSkeleton& skeleton, int n_per_bone,
                                  uint64_t seed, int threads = 0);

// Binary template file ("JGTP").
void save_template(const CanonicalTemplate& t, const std::string& path);
CanonicalTemplate load_template(const std::string& path);

}  // namespace handsplat
