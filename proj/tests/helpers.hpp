#pragma once

#include <random>

#include "handsplat/camera.hpp"
#include "handsplat/renderer.hpp"
#include "handsplat/types.hpp"

namespace handsplat::testing {

inline std::mt19937_64 rng(uint64_t seed) { return std::mt19937_64(seed); }

inline double uniform(std::mt19937_64& g, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(g);
}

inline Vec3 random_vec3(std::mt19937_64& g, double lo, double hi) {
  return Vec3(uniform(g, lo, hi), uniform(g, lo, hi), uniform(g, lo, hi));
}

inline Mat3 random_rotation(std::mt19937_64& g) {
  std::normal_distribution<double> n(0, 1);
  Eigen::Quaterniond q(n(g), n(g), n(g), n(g));
  q.normalize();
  return q.toRotationMatrix();
}

// Relative error with an absolute floor for near-zero references.
inline double rel_err(double got, double want, double floor = 1e-9) {
  return std::abs(got - want) / std::max({std::abs(got), std::abs(want), floor});
}

inline Camera test_camera(int w, int h, double fx = 0.0) {
  Camera c;
  c.width = w;
  c.height = h;
  c.fx = fx > 0 ? fx : 1.2 * w;
  c.fy = c.fx;
  c.cx = 0.5 * w;
  c.cy = 0.5 * h;
  c.world_to_camera = Mat4::Identity();
  return c;
}

// Random gaussians in a slab in front of the camera at the origin.
inline GaussianSet random_scene(std::mt19937_64& g, int count, bool isotropic,
                                int image_size) {
  GaussianSet s;
  s.isotropic = isotropic;
  s.positions.resize(count, 3);
  s.colors.resize(count, 3);
  s.opacities.resize(count);
  s.scales.resize(count, isotropic ? 1 : 3);
  double extent = 0.12 * image_size / 32.0;
  for (int i = 0; i < count; ++i) {
    s.positions.row(i) = Vec3(uniform(g, -extent, extent),
                              uniform(g, -extent, extent), uniform(g, 0.8, 1.6))
                             .transpose();
    s.colors.row(i) = random_vec3(g, 0.05, 0.95).transpose();
    s.opacities[i] = uniform(g, 0.1, 0.95);
    for (int c = 0; c < s.scales.cols(); ++c)
      s.scales(i, c) = uniform(g, 0.02, 0.08);
  }
  return s;
}

// Naive per-pixel compositor evaluating the forward semantics directly:
// canonical (depth, index) order, footprint predicate, alpha clamp,
// transmittance stop, background sentinel.
inline RenderOutput reference_render(const GaussianSet& g, const Camera& cam) {
  struct Splat {
    int idx;
    double mx, my, z, q00, q01, q11;
  };
  std::vector<Splat> splats;
  double max_z = 0;
  for (int i = 0; i < g.size(); ++i) {
    Vec3 xc = cam.to_camera(g.positions.row(i).transpose());
    if (xc.z() <= kDefaultZNear) continue;
    double inv_z = 1.0 / xc.z();
    Splat s;
    s.idx = i;
    s.mx = cam.fx * xc.x() * inv_z + cam.cx;
    s.my = cam.fy * xc.y() * inv_z + cam.cy;
    s.z = xc.z();
    double bx, by;
    if (g.isotropic) {
      double sigma = g.scales(i, 0) * cam.fx * inv_z;
      s.q00 = s.q11 = 1.0 / (sigma * sigma);
      s.q01 = 0;
      bx = by = kFootprintSigmas * sigma;
    } else {
      Eigen::Matrix<double, 2, 3> J;
      J << cam.fx * inv_z, 0, -cam.fx * xc.x() * inv_z * inv_z, 0,
          cam.fy * inv_z, -cam.fy * xc.y() * inv_z * inv_z;
      Mat3 body = cam.rotation();
      Vec3 s2 = g.scales.row(i).transpose().array().square();
      Eigen::Matrix2d cov = J * (body * s2.asDiagonal() * body.transpose()) *
                            J.transpose();
      double det = cov(0, 0) * cov(1, 1) - cov(0, 1) * cov(0, 1);
      if (det <= 0) continue;
      s.q00 = cov(1, 1) / det;
      s.q01 = -cov(0, 1) / det;
      s.q11 = cov(0, 0) / det;
      bx = kFootprintSigmas * std::sqrt(cov(0, 0));
      by = kFootprintSigmas * std::sqrt(cov(1, 1));
    }
    if (s.mx + bx < 0 || s.mx - bx > cam.width || s.my + by < 0 ||
        s.my - by > cam.height)
      continue;
    splats.push_back(s);
    max_z = std::max(max_z, s.z);
  }
  std::sort(splats.begin(), splats.end(), [](const Splat& a, const Splat& b) {
    if (a.z != b.z) return a.z < b.z;
    return a.idx < b.idx;
  });
  double sentinel = splats.empty() ? 1.0 : kFarSentinelFactor * max_z;

  RenderOutput out;
  out.rgb = Image(cam.width, cam.height, 3);
  out.depth = Image(cam.width, cam.height, 1, sentinel);
  out.alpha = Image(cam.width, cam.height, 1);
  out.background_depth = sentinel;
  for (int y = 0; y < cam.height; ++y) {
    for (int x = 0; x < cam.width; ++x) {
      double T = 1.0, r = 0, gg = 0, b = 0, d = 0, a = 0;
      for (const Splat& s : splats) {
        if (T < kTransmittanceStop) break;
        double dx = x + 0.5 - s.mx, dy = y + 0.5 - s.my;
        double e = s.q00 * dx * dx + 2 * s.q01 * dx * dy + s.q11 * dy * dy;
        if (e > kFootprintSigmas * kFootprintSigmas) continue;
        double alpha = std::min(kAlphaClamp, g.opacities[s.idx] * std::exp(-0.5 * e));
        double w = alpha * T;
        r += w * g.colors(s.idx, 0);
        gg += w * g.colors(s.idx, 1);
        b += w * g.colors(s.idx, 2);
        d += w * s.z;
        a += w;
        T *= 1.0 - alpha;
      }
      out.rgb.at(x, y, 0) = r;
      out.rgb.at(x, y, 1) = gg;
      out.rgb.at(x, y, 2) = b;
      out.alpha.at(x, y) = a;
      out.depth.at(x, y) = a < kAlphaBackground ? sentinel : d;
    }
  }
  return out;
}

}  // namespace handsplat::testing
