#pragma once

#include "handsplat/losses.hpp"
#include "handsplat/skeleton.hpp"
#include "handsplat/types.hpp"

namespace handsplat {

// 10*log10(1/MSE) for images in [0,1], capped at 100 for identical inputs.
double psnr(const Image& a, const Image& b);

// Symmetric mean nearest-neighbor Euclidean distance between point sets.
double chamfer_l1(const Points3& a, const Points3& b);

struct ImageMetrics {
  double psnr = 0;
  double ssim = 0;
};
ImageMetrics image_metrics(const Image& pred, const Image& gt);

}  // namespace handsplat
