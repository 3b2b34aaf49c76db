#include "handsplat/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "handsplat/errors.hpp"

namespace handsplat {

void validate_mesh(const CanonicalMesh& m) {
  if (m.faces.rows() == 0) throw DomainError("mesh has no faces");
  if (static_cast<int>(m.face_uvs.size()) != m.num_faces())
    throw DomainError("mesh must carry one UV triple per face");
  std::map<std::pair<uint32_t, uint32_t>, int> edge_count;
  for (int f = 0; f < m.num_faces(); ++f) {
    for (int e = 0; e < 3; ++e) {
      uint32_t a = m.faces(f, e), b = m.faces(f, (e + 1) % 3);
      if (a == b) throw DomainError("degenerate face " + std::to_string(f));
      edge_count[{std::min(a, b), std::max(a, b)}]++;
    }
    for (int c = 0; c < 3; ++c) {
      const Vec2& uv = m.face_uvs[f][c];
      if (uv.x() < -1e-9 || uv.x() > 1 + 1e-9 || uv.y() < -1e-9 ||
          uv.y() > 1 + 1e-9)
        throw DomainError("UV outside [0,1]^2 on face " + std::to_string(f));
    }
  }
  for (const auto& [edge, count] : edge_count) {
    if (count != 2)
      throw DomainError("mesh is not watertight: edge (" +
                        std::to_string(edge.first) + "," +
                        std::to_string(edge.second) + ") has " +
                        std::to_string(count) + " faces");
  }
}

CanonicalMesh load_obj(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open OBJ file: " + path);
  std::vector<Vec3> verts;
  std::vector<Vec2> uvs;
  std::vector<std::array<uint32_t, 3>> faces;
  std::vector<std::array<uint32_t, 3>> face_uv_ids;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::string tag;
    ss >> tag;
    if (tag == "v") {
      double x, y, z;
      ss >> x >> y >> z;
      verts.emplace_back(x, y, z);
    } else if (tag == "vt") {
      double u, v;
      ss >> u >> v;
      uvs.emplace_back(u, v);
    } else if (tag == "f") {
      std::array<uint32_t, 3> fv{}, ft{};
      for (int c = 0; c < 3; ++c) {
        std::string tok;
        if (!(ss >> tok)) throw IoError("OBJ face with <3 corners");
        unsigned vi = 0, ti = 0;
        if (std::sscanf(tok.c_str(), "%u/%u", &vi, &ti) != 2)
          throw IoError("OBJ faces must use v/vt indices: " + tok);
        fv[c] = vi - 1;
        ft[c] = ti - 1;
      }
      std::string extra;
      if (ss >> extra) throw IoError("only triangle faces are supported");
      faces.push_back(fv);
      face_uv_ids.push_back(ft);
    }
  }
  CanonicalMesh m;
  m.vertices.resize(static_cast<int>(verts.size()), 3);
  for (size_t i = 0; i < verts.size(); ++i) m.vertices.row(i) = verts[i];
  m.faces.resize(static_cast<int>(faces.size()), 3);
  m.face_uvs.resize(faces.size());
  for (size_t f = 0; f < faces.size(); ++f) {
    for (int c = 0; c < 3; ++c) {
      if (faces[f][c] >= verts.size() || face_uv_ids[f][c] >= uvs.size())
        throw IoError("OBJ index out of range on face " + std::to_string(f));
      m.faces(static_cast<int>(f), c) = faces[f][c];
      m.face_uvs[f][c] = uvs[face_uv_ids[f][c]];
    }
  }
  validate_mesh(m);
  return m;
}

void save_obj(const CanonicalMesh& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write OBJ file: " + path);
  char buf[128];
  for (int i = 0; i < m.vertices.rows(); ++i) {
    std::snprintf(buf, sizeof buf, "v %.17g %.17g %.17g\n", m.vertices(i, 0),
                  m.vertices(i, 1), m.vertices(i, 2));
    out << buf;
  }
  // One vt per face corner keeps seams exact at the cost of duplication.
  for (int f = 0; f < m.num_faces(); ++f) {
    for (int c = 0; c < 3; ++c) {
      std::snprintf(buf, sizeof buf, "vt %.17g %.17g\n", m.face_uvs[f][c].x(),
                    m.face_uvs[f][c].y());
      out << buf;
    }
  }
  for (int f = 0; f < m.num_faces(); ++f) {
    out << "f";
    for (int c = 0; c < 3; ++c)
      out << ' ' << m.faces(f, c) + 1 << '/' << 3 * f + c + 1;
    out << '\n';
  }
}

double winding_number(const CanonicalMesh& m, const Vec3& p) {
  // van Oosterom & Strackee signed solid angle, summed over faces.
  double total = 0.0;
  const int n = m.num_faces();
  for (int f = 0; f < n; ++f) {
    Vec3 a = m.face_vertex(f, 0) - p;
    Vec3 b = m.face_vertex(f, 1) - p;
    Vec3 c = m.face_vertex(f, 2) - p;
    double la = a.norm(), lb = b.norm(), lc = c.norm();
    double num = a.dot(b.cross(c));
    double den = la * lb * lc + a.dot(b) * lc + b.dot(c) * la + c.dot(a) * lb;
    total += 2.0 * std::atan2(num, den);
  }
  return total / (4.0 * M_PI);
}

Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b,
                               const Vec3& c, Vec3* bary) {
  // Ericson, Real-Time Collision Detection, 5.1.5.
  Vec3 ab = b - a, ac = c - a, ap = p - a;
  double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0 && d2 <= 0) {
    if (bary) *bary = Vec3(1, 0, 0);
    return a;
  }
  Vec3 bp = p - b;
  double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0 && d4 <= d3) {
    if (bary) *bary = Vec3(0, 1, 0);
    return b;
  }
  double vc = d1 * d4 - d3 * d2;
  if (vc <= 0 && d1 >= 0 && d3 <= 0) {
    double v = d1 / (d1 - d3);
    if (bary) *bary = Vec3(1 - v, v, 0);
    return a + v * ab;
  }
  Vec3 cp = p - c;
  double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0 && d5 <= d6) {
    if (bary) *bary = Vec3(0, 0, 1);
    return c;
  }
  double vb = d5 * d2 - d1 * d6;
  if (vb <= 0 && d2 >= 0 && d6 <= 0) {
    double w = d2 / (d2 - d6);
    if (bary) *bary = Vec3(1 - w, 0, w);
    return a + w * ac;
  }
  double va = d3 * d6 - d5 * d4;
  if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0) {
    double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    if (bary) *bary = Vec3(0, 1 - w, w);
    return b + w * (c - b);
  }
  double denom = 1.0 / (va + vb + vc);
  double v = vb * denom, w = vc * denom;
  if (bary) *bary = Vec3(1 - v - w, v, w);
  return a + ab * v + ac * w;
}

namespace {

SurfacePoint make_surface_point(const CanonicalMesh& mesh, int face,
                                const Vec3& p) {
  SurfacePoint sp;
  sp.face = face;
  Vec3 bary;
  sp.point = closest_point_on_triangle(p, mesh.face_vertex(face, 0),
                                       mesh.face_vertex(face, 1),
                                       mesh.face_vertex(face, 2), &bary);
  sp.bary = bary;
  sp.distance = (p - sp.point).norm();
  sp.uv = bary.x() * mesh.face_uvs[face][0] + bary.y() * mesh.face_uvs[face][1] +
          bary.z() * mesh.face_uvs[face][2];
  return sp;
}

}  // namespace

MeshIndex::MeshIndex(const CanonicalMesh& mesh) : mesh_(mesh) {
  bbox_min_ = mesh.vertices.colwise().minCoeff().transpose();
  bbox_max_ = mesh.vertices.colwise().maxCoeff().transpose();
  Vec3 extent = (bbox_max_ - bbox_min_).cwiseMax(1e-9);
  // Aim for ~2 faces per occupied cell.
  double target_cells = std::max(1.0, mesh.num_faces() / 2.0);
  cell_size_ = std::cbrt(extent.prod() / target_cells);
  cell_size_ = std::max(cell_size_, 1e-9);
  for (int d = 0; d < 3; ++d)
    dims_[d] = std::max(1, static_cast<int>(std::ceil(extent[d] / cell_size_)));
  cells_.resize(static_cast<size_t>(dims_.x()) * dims_.y() * dims_.z());
  for (int f = 0; f < mesh.num_faces(); ++f) {
    Vec3 lo = mesh.face_vertex(f, 0).cwiseMin(mesh.face_vertex(f, 1))
                  .cwiseMin(mesh.face_vertex(f, 2));
    Vec3 hi = mesh.face_vertex(f, 0).cwiseMax(mesh.face_vertex(f, 1))
                  .cwiseMax(mesh.face_vertex(f, 2));
    Eigen::Vector3i c0, c1;
    for (int d = 0; d < 3; ++d) {
      c0[d] = std::clamp(
          static_cast<int>((lo[d] - bbox_min_[d]) / cell_size_), 0, dims_[d] - 1);
      c1[d] = std::clamp(
          static_cast<int>((hi[d] - bbox_min_[d]) / cell_size_), 0, dims_[d] - 1);
    }
    for (int z = c0.z(); z <= c1.z(); ++z)
      for (int y = c0.y(); y <= c1.y(); ++y)
        for (int x = c0.x(); x <= c1.x(); ++x)
          cells_[cell_index({x, y, z})].push_back(f);
  }
}

SurfacePoint MeshIndex::closest_point_bruteforce(const Vec3& p) const {
  SurfacePoint best;
  best.distance = std::numeric_limits<double>::infinity();
  for (int f = 0; f < mesh_.num_faces(); ++f) {
    SurfacePoint sp = make_surface_point(mesh_, f, p);
    if (sp.distance < best.distance) best = sp;
  }
  return best;
}

SurfacePoint MeshIndex::closest_point(const Vec3& p) const {
  Eigen::Vector3i home;
  for (int d = 0; d < 3; ++d)
    home[d] = std::clamp(static_cast<int>((p[d] - bbox_min_[d]) / cell_size_),
                         0, dims_[d] - 1);
  SurfacePoint best;
  best.distance = std::numeric_limits<double>::infinity();
  int max_ring = dims_.maxCoeff();
  for (int ring = 0; ring <= max_ring; ++ring) {
    // Once a candidate exists, stop as soon as the next shell cannot beat it.
    if (best.face >= 0) {
      double shell_min = (ring - 1) * cell_size_;
      // Distance from p to its home cell boundary can be up to one cell,
      // so the ring lower bound is conservative by one cell size.
      if (shell_min - cell_size_ > best.distance) break;
    }
    bool any_cell = false;
    for (int z = home.z() - ring; z <= home.z() + ring; ++z) {
      if (z < 0 || z >= dims_.z()) continue;
      for (int y = home.y() - ring; y <= home.y() + ring; ++y) {
        if (y < 0 || y >= dims_.y()) continue;
        for (int x = home.x() - ring; x <= home.x() + ring; ++x) {
          if (x < 0 || x >= dims_.x()) continue;
          // Shell only: skip interior cells already visited.
          if (std::max({std::abs(x - home.x()), std::abs(y - home.y()),
                        std::abs(z - home.z())}) != ring)
            continue;
          any_cell = true;
          for (int f : cells_[cell_index({x, y, z})]) {
            SurfacePoint sp = make_surface_point(mesh_, f, p);
            if (sp.distance < best.distance ||
                (sp.distance == best.distance && sp.face < best.face))
              best = sp;
          }
        }
      }
    }
    if (!any_cell && ring > 0 && best.face >= 0) break;
  }
  return best;
}

}  // namespace handsplat
