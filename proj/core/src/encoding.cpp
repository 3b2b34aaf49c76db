#include "handsplat/encoding.hpp"

#include <cmath>

#include "handsplat/errors.hpp"

namespace handsplat {

VecX positional_encode(const Vec3& uvd, int bands) {
  if (bands < 1) throw DomainError("positional encoding needs bands >= 1");
  VecX out(6 * bands);
  int k = 0;
  for (int comp = 0; comp < 3; ++comp) {
    double x = uvd[comp];
    double freq = M_PI;
    for (int band = 0; band < bands; ++band) {
      out[k++] = std::sin(freq * x);
      out[k++] = std::cos(freq * x);
      freq *= 2.0;
    }
  }
  return out;
}

namespace {

struct BilinearSetup {
  int ix0, ix1, iy0, iy1;
  double tx, ty;
};

BilinearSetup bilinear(const Grid2D& g, double x, double y) {
  BilinearSetup s;
  double gx = std::clamp(x, 0.0, 1.0) * (g.res - 1);
  double gy = std::clamp(y, 0.0, 1.0) * (g.res - 1);
  s.ix0 = std::min(static_cast<int>(gx), g.res - 2);
  s.iy0 = std::min(static_cast<int>(gy), g.res - 2);
  s.ix0 = std::max(s.ix0, 0);
  s.iy0 = std::max(s.iy0, 0);
  s.ix1 = std::min(s.ix0 + 1, g.res - 1);
  s.iy1 = std::min(s.iy0 + 1, g.res - 1);
  s.tx = gx - s.ix0;
  s.ty = gy - s.iy0;
  return s;
}

}  // namespace

VecX Grid2D::query(double x, double y) const {
  BilinearSetup s = bilinear(*this, x, y);
  VecX out = VecX::Zero(channels);
  const double w00 = (1 - s.tx) * (1 - s.ty), w10 = s.tx * (1 - s.ty);
  const double w01 = (1 - s.tx) * s.ty, w11 = s.tx * s.ty;
  for (int c = 0; c < channels; ++c) {
    out[c] = w00 * at(s.ix0, s.iy0, c) + w10 * at(s.ix1, s.iy0, c) +
             w01 * at(s.ix0, s.iy1, c) + w11 * at(s.ix1, s.iy1, c);
  }
  return out;
}

void Grid2D::scatter(double x, double y, const VecX& g) {
  BilinearSetup s = bilinear(*this, x, y);
  const double w00 = (1 - s.tx) * (1 - s.ty), w10 = s.tx * (1 - s.ty);
  const double w01 = (1 - s.tx) * s.ty, w11 = s.tx * s.ty;
  for (int c = 0; c < channels; ++c) {
    at(s.ix0, s.iy0, c) += w00 * g[c];
    at(s.ix1, s.iy0, c) += w10 * g[c];
    at(s.ix0, s.iy1, c) += w01 * g[c];
    at(s.ix1, s.iy1, c) += w11 * g[c];
  }
}

VecX FeatureTriplane::query(const Vec3& p) const {
  VecX out(feature_size());
  out.segment(0, uv.channels) = uv.query(p.x(), p.y());
  out.segment(uv.channels, vd.channels) = vd.query(p.y(), p.z());
  out.segment(uv.channels + vd.channels, ud.channels) = ud.query(p.x(), p.z());
  return out;
}

void FeatureTriplane::scatter(const Vec3& p, const VecX& g) {
  uv.scatter(p.x(), p.y(), g.segment(0, uv.channels));
  vd.scatter(p.y(), p.z(), g.segment(uv.channels, vd.channels));
  ud.scatter(p.x(), p.z(), g.segment(uv.channels + vd.channels, ud.channels));
}

NormalizedAngles normalize_angles(const PoseAngles& pose,
                                  const AngleLimits& limits,
                                  std::atomic<uint64_t>* clamp_counter) {
  NormalizedAngles out;
  auto norm_one = [&](double v, double lo, double hi) {
    double t = (v - lo) / (hi - lo);
    if (t < 0.0 || t > 1.0) {
      out.clamped++;
      if (clamp_counter) clamp_counter->fetch_add(1, std::memory_order_relaxed);
      t = std::clamp(t, 0.0, 1.0);
    }
    return t;
  };
  for (int b = 1; b < kNumJoints; ++b) {
    out.af(b - 1, 0) =
        norm_one(pose.abduction[b], limits.abduction_min[b], limits.abduction_max[b]);
    out.af(b - 1, 1) =
        norm_one(pose.flexion[b], limits.flexion_min[b], limits.flexion_max[b]);
  }
  return out;
}

MatX angular_features(const NormalizedAngles& angles,
                      const AngularPlanes& planes) {
  const int c = planes.channels();
  MatX f(kNumBones, c);
  for (int b = 1; b <= kNumBones; ++b) {
    VecX delta = planes.planes[b - 1].query(angles.af(b - 1, 0), angles.af(b - 1, 1));
    if (b <= 5) {
      f.row(b - 1) = delta.transpose();
    } else {
      f.row(b - 1) = 0.5 * (f.row(b - 5 - 1) + delta.transpose());
    }
  }
  return f;
}

void angular_features_backward(const NormalizedAngles& angles,
                               const MatX& d_features, AngularPlanes* grads) {
  MatX acc = d_features;
  // Children carry half their gradient up to the parent feature.
  for (int b = kNumBones; b >= 6; --b) acc.row(b - 5 - 1) += 0.5 * acc.row(b - 1);
  for (int b = 1; b <= kNumBones; ++b) {
    double scale = b <= 5 ? 1.0 : 0.5;
    VecX g = scale * acc.row(b - 1).transpose();
    grads->planes[b - 1].scatter(angles.af(b - 1, 0), angles.af(b - 1, 1), g);
  }
}

}  // namespace handsplat
