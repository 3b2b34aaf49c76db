#pragma once

#include <array>
#include <string>
#include <vector>

#include "handsplat/types.hpp"

namespace handsplat {

// Watertight triangle mesh with per-face-corner texture coordinates.
struct CanonicalMesh {
  Points3 vertices;                          // N x 3
  Faces faces;                               // M x 3
  std::vector<std::array<Vec2, 3>> face_uvs; // M entries, one UV per corner

  int num_faces() const { return static_cast<int>(faces.rows()); }
  Vec3 face_vertex(int f, int corner) const {
    return vertices.row(faces(f, corner)).transpose();
  }
};

// Checks watertightness (every undirected edge shared by exactly two faces)
// and UV range; throws DomainError on violation.
void validate_mesh(const CanonicalMesh& m);

// OBJ with `vt` coordinates and `f v/vt ...` faces.
CanonicalMesh load_obj(const std::string& path);
void save_obj(const CanonicalMesh& m, const std::string& path);

// Generalized winding number of `p` with respect to the mesh (1 inside a
// closed component, 0 outside, fractional near defects).
double winding_number(const CanonicalMesh& m, const Vec3& p);

inline bool mesh_contains(const CanonicalMesh& m, const Vec3& p) {
  return winding_number(m, p) > 0.5;
}

struct SurfacePoint {
  int face = -1;
  Vec3 point = Vec3::Zero();   // closest point on the surface
  Vec3 bary = Vec3::Zero();    // barycentric coordinates on `face`
  double distance = 0.0;
  Vec2 uv = Vec2::Zero();      // interpolated per-face UV
};

// Uniform-grid acceleration structure for closest-point queries. The mesh
// must outlive the index.
class MeshIndex {
 public:
  explicit MeshIndex(const CanonicalMesh& mesh);

  SurfacePoint closest_point(const Vec3& p) const;

  // Exhaustive search over all faces; the accelerated query must agree.
  SurfacePoint closest_point_bruteforce(const Vec3& p) const;

  const CanonicalMesh& mesh() const { return mesh_; }
  Vec3 bbox_min() const { return bbox_min_; }
  Vec3 bbox_max() const { return bbox_max_; }

 private:
  const CanonicalMesh& mesh_;
  Vec3 bbox_min_, bbox_max_;
  double cell_size_ = 0.0;
  Eigen::Vector3i dims_ = Eigen::Vector3i::Zero();
  std::vector<std::vector<int>> cells_;

  int cell_index(const Eigen::Vector3i& c) const {
    return (c.z() * dims_.y() + c.y()) * dims_.x() + c.x();
  }
};

// Closest point on triangle abc to p, with barycentric output.
Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b,
                               const Vec3& c, Vec3* bary);

}  // namespace handsplat
