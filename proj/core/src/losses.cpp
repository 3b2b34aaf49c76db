#include "handsplat/losses.hpp"

#include <cmath>

#include "handsplat/errors.hpp"

namespace handsplat {

namespace {

constexpr double kC1 = 0.01 * 0.01;  // (K1 * L)^2 with L = 1
constexpr double kC2 = 0.03 * 0.03;

std::vector<double> gaussian_window(int size, double sigma) {
  std::vector<double> w(size);
  double sum = 0.0;
  double half = (size - 1) / 2.0;
  for (int i = 0; i < size; ++i) {
    double d = i - half;
    w[i] = std::exp(-d * d / (2.0 * sigma * sigma));
    sum += w[i];
  }
  for (double& v : w) v /= sum;
  return w;
}

// Valid-mode separable correlation of one channel.
std::vector<double> corr_valid(const Image& img, int channel,
                               const std::vector<double>& ker) {
  const int k = static_cast<int>(ker.size());
  const int w = img.width, h = img.height;
  const int vw = w - k + 1, vh = h - k + 1;
  std::vector<double> rows(static_cast<size_t>(vw) * h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < vw; ++x) {
      double s = 0.0;
      for (int i = 0; i < k; ++i) s += ker[i] * img.at(x + i, y, channel);
      rows[static_cast<size_t>(y) * vw + x] = s;
    }
  std::vector<double> out(static_cast<size_t>(vw) * vh);
  for (int y = 0; y < vh; ++y)
    for (int x = 0; x < vw; ++x) {
      double s = 0.0;
      for (int i = 0; i < k; ++i)
        s += ker[i] * rows[static_cast<size_t>(y + i) * vw + x];
      out[static_cast<size_t>(y) * vw + x] = s;
    }
  return out;
}

// Product images correlated in one pass.
std::vector<double> corr_valid_product(const Image& a, int ca, const Image& b,
                                       int cb, const std::vector<double>& ker) {
  Image prod(a.width, a.height, 1);
  for (int y = 0; y < a.height; ++y)
    for (int x = 0; x < a.width; ++x)
      prod.at(x, y) = a.at(x, y, ca) * b.at(x, y, cb);
  return corr_valid(prod, 0, ker);
}

// Adjoint of corr_valid: scatters a valid-region map back through the
// separable window onto the image grid.
void scatter_valid(const std::vector<double>& valid, int vw, int vh,
                   const std::vector<double>& ker, Image* out, int channel) {
  const int k = static_cast<int>(ker.size());
  for (int y = 0; y < vh; ++y)
    for (int x = 0; x < vw; ++x) {
      double v = valid[static_cast<size_t>(y) * vw + x];
      if (v == 0.0) continue;
      for (int i = 0; i < k; ++i) {
        double vi = v * ker[i];
        for (int j = 0; j < k; ++j)
          out->at(x + j, y + i, channel) += vi * ker[j];
      }
    }
}

}  // namespace

SsimCache ssim_forward(const Image& x, const Image& y) {
  if (!x.same_shape(y)) throw DomainError("SSIM inputs must share a shape");
  SsimCache c;
  c.window = std::min({11, x.width, x.height});
  if (c.window % 2 == 0) c.window -= 1;
  if (c.window < 1) throw DomainError("image too small for SSIM");
  auto ker = gaussian_window(c.window, 1.5);
  c.vw = x.width - c.window + 1;
  c.vh = x.height - c.window + 1;
  const int channels = x.channels;
  c.mu_x.resize(channels);
  c.mu_y.resize(channels);
  c.xx.resize(channels);
  c.yy.resize(channels);
  c.xy.resize(channels);
  double sum = 0.0;
  for (int ch = 0; ch < channels; ++ch) {
    c.mu_x[ch] = corr_valid(x, ch, ker);
    c.mu_y[ch] = corr_valid(y, ch, ker);
    c.xx[ch] = corr_valid_product(x, ch, x, ch, ker);
    c.yy[ch] = corr_valid_product(y, ch, y, ch, ker);
    c.xy[ch] = corr_valid_product(x, ch, y, ch, ker);
    for (size_t i = 0; i < c.mu_x[ch].size(); ++i) {
      double mx = c.mu_x[ch][i], my = c.mu_y[ch][i];
      double sx = c.xx[ch][i] - mx * mx;
      double sy = c.yy[ch][i] - my * my;
      double sxy = c.xy[ch][i] - mx * my;
      double a1 = 2 * mx * my + kC1, a2 = 2 * sxy + kC2;
      double b1 = mx * mx + my * my + kC1, b2 = sx + sy + kC2;
      sum += (a1 * a2) / (b1 * b2);
    }
  }
  c.mean = sum / (static_cast<double>(c.vw) * c.vh * channels);
  return c;
}

Image ssim_backward(const SsimCache& c, const Image& x, const Image& y,
                    double upstream) {
  auto ker = gaussian_window(c.window, 1.5);
  Image grad(x.width, x.height, x.channels);
  const double norm =
      upstream / (static_cast<double>(c.vw) * c.vh * x.channels);
  const size_t valid_n = static_cast<size_t>(c.vw) * c.vh;
  std::vector<double> g_mu(valid_n), g_xy_raw(valid_n), g_xx_raw(valid_n);
  for (int ch = 0; ch < x.channels; ++ch) {
    for (size_t i = 0; i < valid_n; ++i) {
      double mx = c.mu_x[ch][i], my = c.mu_y[ch][i];
      double sx = c.xx[ch][i] - mx * mx;
      double sy = c.yy[ch][i] - my * my;
      double sxy = c.xy[ch][i] - mx * my;
      double a1 = 2 * mx * my + kC1, a2 = 2 * sxy + kC2;
      double b1 = mx * mx + my * my + kC1, b2 = sx + sy + kC2;
      double inv = 1.0 / (b1 * b2);
      // m = a1 a2 / (b1 b2)
      double dm_da1 = a2 * inv;
      double dm_da2 = a1 * inv;
      double dm_db1 = -a1 * a2 * inv / b1;
      double dm_db2 = -a1 * a2 * inv / b2;
      // sigma_x^2 = xx - mu_x^2, sigma_xy = xy - mu_x mu_y
      double dm_dmux = dm_da1 * 2 * my + dm_db1 * 2 * mx +
                       dm_db2 * (-2 * mx) + dm_da2 * 2 * (-my);
      double dm_dxx = dm_db2;             // raw second moment
      double dm_dxy = dm_da2 * 2.0;       // raw cross moment
      g_mu[i] = norm * dm_dmux;
      g_xx_raw[i] = norm * dm_dxx;
      g_xy_raw[i] = norm * dm_dxy;
    }
    // d xx/d x(q) = 2 x(q) w,  d xy/d x(q) = y(q) w,  d mu_x/d x(q) = w
    scatter_valid(g_mu, c.vw, c.vh, ker, &grad, ch);
    Image tmp(x.width, x.height, 1);
    scatter_valid(g_xx_raw, c.vw, c.vh, ker, &tmp, 0);
    for (int yy_ = 0; yy_ < x.height; ++yy_)
      for (int xx_ = 0; xx_ < x.width; ++xx_)
        grad.at(xx_, yy_, ch) += 2.0 * x.at(xx_, yy_, ch) * tmp.at(xx_, yy_);
    Image tmp2(x.width, x.height, 1);
    scatter_valid(g_xy_raw, c.vw, c.vh, ker, &tmp2, 0);
    for (int yy_ = 0; yy_ < x.height; ++yy_)
      for (int xx_ = 0; xx_ < x.width; ++xx_)
        grad.at(xx_, yy_, ch) += y.at(xx_, yy_, ch) * tmp2.at(xx_, yy_);
  }
  return grad;
}

LossBreakdown compute_loss(const Image& pred_rgb, const Image& pred_alpha,
                           const Image& gt_rgb, const Image& gt_mask,
                           const Points3& dx_identity,
                           const Points3& dx_nonrigid, const MatX& scales,
                           bool isotropic, const LossWeights& weights,
                           const PerceptualHook& hook, LossGrads* grads) {
  if (!pred_rgb.same_shape(gt_rgb))
    throw DomainError("prediction/ground-truth image shape mismatch");
  if (pred_alpha.width != gt_mask.width || pred_alpha.height != gt_mask.height)
    throw DomainError("alpha/mask shape mismatch");
  if (dx_identity.rows() != dx_nonrigid.rows())
    throw DomainError("offset count mismatch");

  LossBreakdown out;
  const size_t npix = pred_rgb.data.size();
  const size_t nalpha = pred_alpha.pixel_count();
  if (grads) {
    grads->d_rgb = Image(pred_rgb.width, pred_rgb.height, pred_rgb.channels);
    grads->d_alpha = Image(pred_alpha.width, pred_alpha.height, 1);
    grads->d_dx_identity = Points3::Zero(dx_identity.rows(), 3);
    grads->d_dx_nonrigid = Points3::Zero(dx_nonrigid.rows(), 3);
    grads->d_scales = MatX::Zero(scales.rows(), scales.cols());
  }

  // L1 photometric term.
  double l1 = 0.0;
  for (size_t i = 0; i < npix; ++i) {
    double diff = pred_rgb.data[i] - gt_rgb.data[i];
    l1 += std::abs(diff);
    if (grads && diff != 0.0)
      grads->d_rgb.data[i] += weights.rgb * (diff > 0 ? 1.0 : -1.0) / npix;
  }
  out.l1 = l1 / npix;

  // Structural term.
  SsimCache ssim = ssim_forward(pred_rgb, gt_rgb);
  out.ssim = 1.0 - ssim.mean;
  if (grads && weights.ssim != 0.0) {
    Image ds = ssim_backward(ssim, pred_rgb, gt_rgb, -weights.ssim);
    for (size_t i = 0; i < npix; ++i) grads->d_rgb.data[i] += ds.data[i];
  }

  // External perceptual scorer (value only).
  out.lpips = hook ? hook(pred_rgb, gt_rgb) : 0.0;

  // Mask term.
  double mask = 0.0;
  for (size_t i = 0; i < nalpha; ++i) {
    double diff = pred_alpha.data[i] - gt_mask.data[i];
    mask += diff * diff;
    if (grads) grads->d_alpha.data[i] += weights.mask * 2.0 * diff / nalpha;
  }
  out.mask = mask / nalpha;

  // Offset regularizer: mean Euclidean norm over both offset sets.
  const long g = dx_identity.rows();
  double reg = 0.0;
  if (g > 0) {
    for (long i = 0; i < g; ++i) {
      double ni = dx_identity.row(i).norm();
      double nn = dx_nonrigid.row(i).norm();
      reg += ni + nn;
      if (grads) {
        if (ni > 0)
          grads->d_dx_identity.row(i) +=
              weights.reg / (2.0 * g) * dx_identity.row(i) / ni;
        if (nn > 0)
          grads->d_dx_nonrigid.row(i) +=
              weights.reg / (2.0 * g) * dx_nonrigid.row(i) / nn;
      }
    }
    reg /= 2.0 * g;
  }
  out.reg = reg;

  // Scale isotropy penalty (anisotropic mode only).
  double iso = 0.0;
  if (!isotropic && scales.cols() == 3 && scales.rows() > 0) {
    const long rows = scales.rows();
    for (long i = 0; i < rows; ++i) {
      double mean = scales.row(i).mean();
      Vec3 r;
      for (int k = 0; k < 3; ++k) r[k] = scales(i, k) / mean - 1.0;
      iso += r.squaredNorm() / 3.0;
      if (grads) {
        double rs = 0.0;
        for (int k = 0; k < 3; ++k) rs += r[k] * scales(i, k);
        for (int k = 0; k < 3; ++k)
          grads->d_scales(i, k) +=
              weights.iso / rows * (2.0 / 3.0) *
              (r[k] / mean - rs / (3.0 * mean * mean));
      }
    }
    iso /= rows;
  }
  out.iso = iso;

  out.total = weights.rgb * out.l1 + weights.ssim * out.ssim +
              weights.lpips * out.lpips + weights.mask * out.mask +
              weights.reg * out.reg + weights.iso * out.iso;
  return out;
}

}  // namespace handsplat
