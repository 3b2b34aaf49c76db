#pragma once

#include <functional>

#include "handsplat/types.hpp"

namespace handsplat {

// Windowed SSIM (Gaussian window, sigma 1.5, standard constants) evaluated
// over valid window positions; images must be in [0,1].
struct SsimCache {
  int window = 11;
  int vw = 0, vh = 0;  // valid-region size
  // Per channel: windowed means and raw second moments.
  std::vector<std::vector<double>> mu_x, mu_y, xx, yy, xy;
  double mean = 0.0;
};

SsimCache ssim_forward(const Image& x, const Image& y);
inline double ssim_value(const Image& x, const Image& y) {
  return ssim_forward(x, y).mean;
}

// d(mean SSIM)/d(x) scaled by `upstream`.
Image ssim_backward(const SsimCache& cache, const Image& x, const Image& y,
                    double upstream);

struct LossWeights {
  double rgb = 1.0;
  double ssim = 0.2;
  double lpips = 0.2;
  double mask = 0.2;
  double reg = 1.0;
  double iso = 0.05;
};

// Optional external perceptual scorer; contributes to the reported loss
// value only (no gradient path).
using PerceptualHook = std::function<double(const Image& pred, const Image& gt)>;

struct LossBreakdown {
  double l1 = 0, ssim = 0, lpips = 0, mask = 0, reg = 0, iso = 0;
  double total = 0;
};

struct LossGrads {
  Image d_rgb;    // w.r.t. the composited prediction
  Image d_alpha;  // w.r.t. rendered alpha
  Points3 d_dx_identity;
  Points3 d_dx_nonrigid;
  MatX d_scales;  // only nonzero in anisotropic mode (isotropy term)
};

// total = rgb*L1 + ssim*(1-SSIM) + lpips*hook + mask*L2(alpha, mask)
//       + reg*mean offset norm + iso*scale-anisotropy penalty.
LossBreakdown compute_loss(const Image& pred_rgb, const Image& pred_alpha,
                           const Image& gt_rgb, const Image& gt_mask,
                           const Points3& dx_identity,
                           const Points3& dx_nonrigid, const MatX& scales,
                           bool isotropic, const LossWeights& weights,
                           const PerceptualHook& hook = nullptr,
                           LossGrads* grads = nullptr);

}  // namespace handsplat
