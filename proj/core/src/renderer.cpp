#include "handsplat/renderer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "handsplat/errors.hpp"
#include "handsplat/parallel.hpp"

namespace handsplat {

void validate_gaussians(const GaussianSet& g) {
  const int n = g.size();
  if (g.colors.rows() != n || g.opacities.size() != n || g.scales.rows() != n)
    throw DomainError("gaussian attribute counts disagree");
  int expected = g.isotropic ? 1 : 3;
  if (g.scales.cols() != expected)
    throw DomainError("scales must have " + std::to_string(expected) +
                      " column(s) in this mode");
  if ((g.scales.array() <= 0.0).any())
    throw DomainError("gaussian scales must be positive");
  if (!g.quaternions.size()) return;
  if (g.quaternions.rows() != n || g.quaternions.cols() != 4)
    throw DomainError("quaternions must be G x 4");
}

Projection project(const Camera& cam, const Vec3& position, double scale,
                   double z_near) {
  Projection p;
  Vec3 xc = cam.to_camera(position);
  if (xc.z() <= z_near) return p;
  p.z = xc.z();
  p.mu = Vec2(cam.fx * xc.x() / xc.z() + cam.cx,
              cam.fy * xc.y() / xc.z() + cam.cy);
  p.sigma_px = scale * cam.fx / xc.z();
  double r = kFootprintSigmas * p.sigma_px;
  if (p.mu.x() + r < 0 || p.mu.x() - r > cam.width || p.mu.y() + r < 0 ||
      p.mu.y() - r > cam.height)
    return p;
  p.culled = false;
  return p;
}

namespace {

Mat3 quat_to_rot(double w, double x, double y, double z) {
  Mat3 r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
      2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
      2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return r;
}

}  // namespace

// Per-splat screen-space data shared by forward and backward.
struct RenderTape {
  std::vector<uint8_t> culled;
  std::vector<double> mu_x, mu_y, z;
  std::vector<double> q00, q01, q11;     // conic (inverse 2D covariance)
  std::vector<double> bx, by;            // footprint half extents (pixels)
  std::vector<int32_t> order;            // non-culled, sorted by (z, index)
  // Per-pixel contributor lists (train mode), flattened in composite order.
  std::vector<uint32_t> pix_offset;
  std::vector<int32_t> contributors;
  double z_near = kDefaultZNear;
};

namespace {

// Projects every splat; conic and footprint cover both modes.
std::shared_ptr<RenderTape> project_all(const GaussianSet& g,
                                        const Camera& cam, int threads) {
  auto tape = std::make_shared<RenderTape>();
  const int n = g.size();
  tape->culled.assign(n, 1);
  tape->mu_x.assign(n, 0);
  tape->mu_y.assign(n, 0);
  tape->z.assign(n, 0);
  tape->q00.assign(n, 0);
  tape->q01.assign(n, 0);
  tape->q11.assign(n, 0);
  tape->bx.assign(n, 0);
  tape->by.assign(n, 0);

  parallel_for(static_cast<size_t>(n), threads, [&](size_t b, size_t e) {
    for (size_t i = b; i < e; ++i) {
      Vec3 xc = cam.to_camera(g.positions.row(i).transpose());
      if (xc.z() <= tape->z_near) continue;
      double inv_z = 1.0 / xc.z();
      double mx = cam.fx * xc.x() * inv_z + cam.cx;
      double my = cam.fy * xc.y() * inv_z + cam.cy;
      double q00, q01, q11, bx, by;
      if (g.isotropic) {
        double sigma = g.scales(i, 0) * cam.fx * inv_z;
        double inv_s2 = 1.0 / (sigma * sigma);
        q00 = inv_s2;
        q01 = 0.0;
        q11 = inv_s2;
        bx = by = kFootprintSigmas * sigma;
      } else {
        Eigen::Matrix<double, 2, 3> J;
        J << cam.fx * inv_z, 0, -cam.fx * xc.x() * inv_z * inv_z, 0,
            cam.fy * inv_z, -cam.fy * xc.y() * inv_z * inv_z;
        Mat3 rq = Mat3::Identity();
        if (g.quaternions.size())
          rq = quat_to_rot(g.quaternions(i, 0), g.quaternions(i, 1),
                           g.quaternions(i, 2), g.quaternions(i, 3));
        Mat3 body = cam.rotation() * rq;
        Vec3 s2 = g.scales.row(i).transpose().array().square();
        Mat3 cov_cam = body * s2.asDiagonal() * body.transpose();
        Eigen::Matrix2d cov2d = J * cov_cam * J.transpose();
        double det = cov2d(0, 0) * cov2d(1, 1) - cov2d(0, 1) * cov2d(0, 1);
        if (det <= 0 || cov2d(0, 0) <= 0 || cov2d(1, 1) <= 0) continue;
        double inv_det = 1.0 / det;
        q00 = cov2d(1, 1) * inv_det;
        q01 = -cov2d(0, 1) * inv_det;
        q11 = cov2d(0, 0) * inv_det;
        bx = kFootprintSigmas * std::sqrt(cov2d(0, 0));
        by = kFootprintSigmas * std::sqrt(cov2d(1, 1));
      }
      if (mx + bx < 0 || mx - bx > cam.width || my + by < 0 ||
          my - by > cam.height)
        continue;
      tape->culled[i] = 0;
      tape->mu_x[i] = mx;
      tape->mu_y[i] = my;
      tape->z[i] = xc.z();
      tape->q00[i] = q00;
      tape->q01[i] = q01;
      tape->q11[i] = q11;
      tape->bx[i] = bx;
      tape->by[i] = by;
    }
  });

  tape->order.reserve(n);
  for (int i = 0; i < n; ++i)
    if (!tape->culled[i]) tape->order.push_back(i);
  std::sort(tape->order.begin(), tape->order.end(), [&](int32_t a, int32_t b) {
    if (tape->z[a] != tape->z[b]) return tape->z[a] < tape->z[b];
    return a < b;
  });
  return tape;
}

constexpr int kTile = 16;

struct PixelAccum {
  double r = 0, g = 0, b = 0, depth = 0, alpha = 0;
};

}  // namespace

RenderOutput render(const GaussianSet& g, const Camera& cam, RenderMode mode,
                    int threads) {
  validate_gaussians(g);
  validate_camera(cam);
  const int w = cam.width, h = cam.height;

  auto tape = project_all(g, cam, threads);
  double max_z = 0.0;
  for (int32_t i : tape->order) max_z = std::max(max_z, tape->z[i]);
  const double sentinel =
      tape->order.empty() ? 1.0 : kFarSentinelFactor * max_z;

  // Bin sorted splats into tiles; bins inherit the canonical order.
  const int tiles_x = (w + kTile - 1) / kTile;
  const int tiles_y = (h + kTile - 1) / kTile;
  std::vector<std::vector<int32_t>> bins(static_cast<size_t>(tiles_x) * tiles_y);
  for (int32_t i : tape->order) {
    int x0 = std::max(0, static_cast<int>((tape->mu_x[i] - tape->bx[i]) / kTile));
    int x1 = std::min(tiles_x - 1,
                      static_cast<int>((tape->mu_x[i] + tape->bx[i]) / kTile));
    int y0 = std::max(0, static_cast<int>((tape->mu_y[i] - tape->by[i]) / kTile));
    int y1 = std::min(tiles_y - 1,
                      static_cast<int>((tape->mu_y[i] + tape->by[i]) / kTile));
    for (int ty = y0; ty <= y1; ++ty)
      for (int tx = x0; tx <= x1; ++tx)
        bins[static_cast<size_t>(ty) * tiles_x + tx].push_back(i);
  }

  RenderOutput out;
  out.rgb = Image(w, h, 3);
  out.depth = Image(w, h, 1, sentinel);
  out.alpha = Image(w, h, 1);
  out.background_depth = sentinel;

  const bool record = mode == RenderMode::Train;
  std::vector<std::vector<int32_t>> pixel_lists;
  if (record) pixel_lists.resize(static_cast<size_t>(w) * h);

  parallel_for(bins.size(), threads, [&](size_t tb, size_t te) {
    for (size_t tile = tb; tile < te; ++tile) {
      const auto& bin = bins[tile];
      if (bin.empty()) continue;
      int tx = static_cast<int>(tile % tiles_x);
      int ty = static_cast<int>(tile / tiles_x);
      int px1 = std::min(w, (tx + 1) * kTile);
      int py1 = std::min(h, (ty + 1) * kTile);
      for (int py = ty * kTile; py < py1; ++py) {
        for (int px = tx * kTile; px < px1; ++px) {
          double cx = px + 0.5, cy = py + 0.5;
          PixelAccum acc;
          double transmittance = 1.0;
          std::vector<int32_t>* list =
              record ? &pixel_lists[static_cast<size_t>(py) * w + px] : nullptr;
          for (int32_t i : bin) {
            if (transmittance < kTransmittanceStop) break;
            double dx = cx - tape->mu_x[i];
            double dy = cy - tape->mu_y[i];
            double e = tape->q00[i] * dx * dx + 2.0 * tape->q01[i] * dx * dy +
                       tape->q11[i] * dy * dy;
            if (e > kFootprintSigmas * kFootprintSigmas) continue;
            double alpha =
                std::min(kAlphaClamp, g.opacities[i] * std::exp(-0.5 * e));
            double weight = alpha * transmittance;
            acc.r += weight * g.colors(i, 0);
            acc.g += weight * g.colors(i, 1);
            acc.b += weight * g.colors(i, 2);
            acc.depth += weight * tape->z[i];
            acc.alpha += weight;
            transmittance *= 1.0 - alpha;
            if (list) list->push_back(i);
          }
          out.rgb.at(px, py, 0) = acc.r;
          out.rgb.at(px, py, 1) = acc.g;
          out.rgb.at(px, py, 2) = acc.b;
          out.alpha.at(px, py) = acc.alpha;
          out.depth.at(px, py) = acc.alpha < kAlphaBackground ? sentinel : acc.depth;
        }
      }
    }
  });

  if (record) {
    tape->pix_offset.resize(static_cast<size_t>(w) * h + 1, 0);
    size_t total = 0;
    for (size_t p = 0; p < pixel_lists.size(); ++p) {
      tape->pix_offset[p] = static_cast<uint32_t>(total);
      total += pixel_lists[p].size();
    }
    tape->pix_offset.back() = static_cast<uint32_t>(total);
    tape->contributors.resize(total);
    for (size_t p = 0; p < pixel_lists.size(); ++p)
      std::copy(pixel_lists[p].begin(), pixel_lists[p].end(),
                tape->contributors.begin() + tape->pix_offset[p]);
    out.tape = std::move(tape);
  }
  return out;
}

RenderGrads render_backward(const GaussianSet& g, const Camera& cam,
                            const RenderOutput& output, const Image& d_rgb,
                            const Image& d_depth, const Image& d_alpha,
                            int threads) {
  if (!output.tape)
    throw MissingTapeError("render_backward requires a train-mode output");
  const RenderTape& tape = *output.tape;
  const int n = g.size();
  const int w = cam.width, h = cam.height;
  if (!d_rgb.same_shape(output.rgb) || !d_depth.same_shape(output.depth) ||
      !d_alpha.same_shape(output.alpha))
    throw DomainError("upstream gradient shapes do not match the render");

  // Per-gaussian screen-space accumulators (per worker, reduced in order).
  const int workers = std::max(1, resolve_threads(threads));
  struct Accum {
    std::vector<double> mu_x, mu_y, z, q00, q01, q11, cr, cg, cb, op;
  };
  std::vector<Accum> accums(workers);
  for (auto& a : accums) {
    a.mu_x.assign(n, 0);
    a.mu_y.assign(n, 0);
    a.z.assign(n, 0);
    a.q00.assign(n, 0);
    a.q01.assign(n, 0);
    a.q11.assign(n, 0);
    a.cr.assign(n, 0);
    a.cg.assign(n, 0);
    a.cb.assign(n, 0);
    a.op.assign(n, 0);
  }

  const size_t rows = static_cast<size_t>(h);
  const size_t chunk = (rows + workers - 1) / workers;
  parallel_for(static_cast<size_t>(workers), workers, [&](size_t wb, size_t we) {
    for (size_t worker = wb; worker < we; ++worker) {
      Accum& acc = accums[worker];
      size_t y0 = worker * chunk, y1 = std::min(rows, y0 + chunk);
      std::vector<double> alphas, trans, weights;
      for (size_t py = y0; py < y1; ++py) {
        for (int px = 0; px < w; ++px) {
          size_t pix = py * w + px;
          uint32_t begin = tape.pix_offset[pix], end = tape.pix_offset[pix + 1];
          if (begin == end) continue;
          double ucr = d_rgb.at(px, static_cast<int>(py), 0);
          double ucg = d_rgb.at(px, static_cast<int>(py), 1);
          double ucb = d_rgb.at(px, static_cast<int>(py), 2);
          double ua = d_alpha.at(px, static_cast<int>(py));
          // Background pixels emit the constant sentinel, not blended depth.
          double ud = output.alpha.at(px, static_cast<int>(py)) < kAlphaBackground
                          ? 0.0
                          : d_depth.at(px, static_cast<int>(py));
          double cx = px + 0.5, cy = py + 0.5;

          size_t count = end - begin;
          alphas.resize(count);
          trans.resize(count);
          weights.resize(count);
          double transmittance = 1.0;
          for (size_t k = 0; k < count; ++k) {
            int32_t i = tape.contributors[begin + k];
            double dx = cx - tape.mu_x[i], dy = cy - tape.mu_y[i];
            double e = tape.q00[i] * dx * dx + 2.0 * tape.q01[i] * dx * dy +
                       tape.q11[i] * dy * dy;
            double alpha =
                std::min(kAlphaClamp, g.opacities[i] * std::exp(-0.5 * e));
            alphas[k] = alpha;
            trans[k] = transmittance;
            weights[k] = alpha * transmittance;
            transmittance *= 1.0 - alpha;
          }
          // Suffix accumulation of downstream weight gradients.
          double suffix = 0.0;
          for (size_t k = count; k-- > 0;) {
            int32_t i = tape.contributors[begin + k];
            double dwk = ucr * g.colors(i, 0) + ucg * g.colors(i, 1) +
                         ucb * g.colors(i, 2) + ud * tape.z[i] + ua;
            double d_alpha_k = trans[k] * dwk - suffix / (1.0 - alphas[k]);
            suffix += weights[k] * dwk;

            acc.cr[i] += ucr * weights[k];
            acc.cg[i] += ucg * weights[k];
            acc.cb[i] += ucb * weights[k];
            acc.z[i] += ud * weights[k];

            double dx = cx - tape.mu_x[i], dy = cy - tape.mu_y[i];
            double e = tape.q00[i] * dx * dx + 2.0 * tape.q01[i] * dx * dy +
                       tape.q11[i] * dy * dy;
            double raw = g.opacities[i] * std::exp(-0.5 * e);
            if (raw >= kAlphaClamp) continue;  // clamped: no shape gradient
            acc.op[i] += d_alpha_k * std::exp(-0.5 * e);
            double d_e = d_alpha_k * raw * -0.5;
            // e = q00 dx^2 + 2 q01 dx dy + q11 dy^2, d = pix - mu
            acc.q00[i] += d_e * dx * dx;
            acc.q01[i] += d_e * 2.0 * dx * dy;
            acc.q11[i] += d_e * dy * dy;
            double gx = d_e * (2.0 * tape.q00[i] * dx + 2.0 * tape.q01[i] * dy);
            double gy = d_e * (2.0 * tape.q11[i] * dy + 2.0 * tape.q01[i] * dx);
            acc.mu_x[i] -= gx;  // d e / d mu = -d e / d pixel
            acc.mu_y[i] -= gy;
          }
        }
      }
    }
  });

  for (int a = 1; a < workers; ++a) {
    for (int i = 0; i < n; ++i) {
      accums[0].mu_x[i] += accums[a].mu_x[i];
      accums[0].mu_y[i] += accums[a].mu_y[i];
      accums[0].z[i] += accums[a].z[i];
      accums[0].q00[i] += accums[a].q00[i];
      accums[0].q01[i] += accums[a].q01[i];
      accums[0].q11[i] += accums[a].q11[i];
      accums[0].cr[i] += accums[a].cr[i];
      accums[0].cg[i] += accums[a].cg[i];
      accums[0].cb[i] += accums[a].cb[i];
      accums[0].op[i] += accums[a].op[i];
    }
  }
  const Accum& acc = accums[0];

  RenderGrads grads;
  grads.d_positions = Points3::Zero(n, 3);
  grads.d_colors = Points3::Zero(n, 3);
  grads.d_opacities = VecX::Zero(n);
  grads.d_scales = MatX::Zero(g.scales.rows(), g.scales.cols());

  // Chain screen-space gradients to world-space parameters.
  parallel_for(static_cast<size_t>(n), threads, [&](size_t b, size_t e) {
    for (size_t i = b; i < e; ++i) {
      grads.d_colors(i, 0) = acc.cr[i];
      grads.d_colors(i, 1) = acc.cg[i];
      grads.d_colors(i, 2) = acc.cb[i];
      grads.d_opacities[i] = acc.op[i];
      if (tape.culled[i]) continue;

      Vec3 xc = cam.to_camera(g.positions.row(i).transpose());
      double inv_z = 1.0 / xc.z();
      Vec2 d_mu(acc.mu_x[i], acc.mu_y[i]);
      Vec3 d_xcam = Vec3::Zero();
      d_xcam.x() += d_mu.x() * cam.fx * inv_z;
      d_xcam.y() += d_mu.y() * cam.fy * inv_z;
      d_xcam.z() += -d_mu.x() * cam.fx * xc.x() * inv_z * inv_z -
                    d_mu.y() * cam.fy * xc.y() * inv_z * inv_z;
      d_xcam.z() += acc.z[i];

      if (g.isotropic) {
        double sigma = g.scales(i, 0) * cam.fx * inv_z;
        // q00 = q11 = 1/sigma^2 and q01 = 0 identically.
        double d_sigma = (acc.q00[i] + acc.q11[i]) * (-2.0 / (sigma * sigma * sigma));
        grads.d_scales(i, 0) = d_sigma * cam.fx * inv_z;
        d_xcam.z() += d_sigma * -g.scales(i, 0) * cam.fx * inv_z * inv_z;
      } else {
        // The q01 accumulator carries dL/d(scalar q01); splitting it across
        // both off-diagonal slots makes the matrix inner products below exact.
        Eigen::Matrix2d d_q;
        d_q << acc.q00[i], acc.q01[i] * 0.5, acc.q01[i] * 0.5, acc.q11[i];
        Eigen::Matrix2d q;
        q << tape.q00[i], tape.q01[i], tape.q01[i], tape.q11[i];
        // conic = cov2d^-1, so dL/dcov2d = -conic * dL/dconic * conic
        Eigen::Matrix2d d_cov = -q * d_q * q;

        Eigen::Matrix<double, 2, 3> J;
        J << cam.fx * inv_z, 0, -cam.fx * xc.x() * inv_z * inv_z, 0,
            cam.fy * inv_z, -cam.fy * xc.y() * inv_z * inv_z;
        Mat3 rq = Mat3::Identity();
        if (g.quaternions.size())
          rq = quat_to_rot(g.quaternions(i, 0), g.quaternions(i, 1),
                           g.quaternions(i, 2), g.quaternions(i, 3));
        Mat3 body = cam.rotation() * rq;  // camera-frame gaussian axes
        Eigen::Matrix<double, 2, 3> m = J * body;
        Vec3 s = g.scales.row(i).transpose();
        for (int k = 0; k < 3; ++k) {
          Vec2 mk = m.col(k);
          grads.d_scales(i, k) = 2.0 * s[k] * mk.dot(d_cov * mk);
        }
        // Through J: cov2d = J C J^T with C the camera-frame 3D covariance.
        Mat3 c3 = body * s.array().square().matrix().asDiagonal() *
                  body.transpose();
        Eigen::Matrix<double, 2, 3> jc = J * c3;
        double fx = cam.fx, fy = cam.fy;
        double x = xc.x(), y = xc.y();
        Eigen::Matrix<double, 2, 3> dj[3];
        dj[0] << 0, 0, -fx * inv_z * inv_z, 0, 0, 0;
        dj[1] << 0, 0, 0, 0, 0, -fy * inv_z * inv_z;
        dj[2] << -fx * inv_z * inv_z, 0, 2.0 * fx * x * inv_z * inv_z * inv_z,
            0, -fy * inv_z * inv_z, 2.0 * fy * y * inv_z * inv_z * inv_z;
        for (int axis = 0; axis < 3; ++axis) {
          Eigen::Matrix2d d_cov2d = dj[axis] * jc.transpose() +
                                    jc * dj[axis].transpose();
          d_xcam[axis] += (d_cov.array() * d_cov2d.array()).sum();
        }
      }
      grads.d_positions.row(i) = (cam.rotation().transpose() * d_xcam).transpose();
    }
  });
  return grads;
}

}  // namespace handsplat
