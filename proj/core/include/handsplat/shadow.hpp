#pragma once

#include <cstdint>
#include <vector>

#include "handsplat/types.hpp"

namespace handsplat {

// Disk sampling kernel for the screen-space occlusion estimate.
struct ShadowKernel {
  std::vector<Vec2> offsets;  // pixel offsets, |offset| <= radius
  double radius = 0.0;
  uint64_t seed = 0;
};

struct ShadowParams {
  double bias = 0.005;     // meters, ignores depth steps smaller than this
  double softness = 0.002; // meters, logistic transition width
  double strength = 0.4;   // darkening factor in [0,1]
};

void validate_shadow_params(const ShadowParams& p);

// n jittered offsets stratified along a spiral inside the disk of the given
// radius; deterministic per (radius, n, seed).
ShadowKernel build_kernel(double radius, int n, uint64_t seed);

// Occlusion response: logistic((a - b - bias)/softness) in [0,1], where a is
// the center depth and b a sampled neighbor depth.
double shadow_response(double center_depth, double sample_depth,
                       const ShadowParams& p);

// Per-pixel mean response over the kernel. Samples read the nearest pixel;
// samples outside the image or on background pixels (depth >=
// background_depth) contribute zero, and background centers get S = 0.
Image shadow_mask(const Image& depth, const ShadowKernel& kernel,
                  const ShadowParams& params, double background_depth,
                  int threads = 1);

// d(loss)/d(depth) for upstream d(loss)/d(mask).
Image shadow_mask_backward(const Image& depth, const ShadowKernel& kernel,
                           const ShadowParams& params, double background_depth,
                           const Image& d_mask, int threads = 1);

// out = rgb * (1 - strength * mask), clamped to [0,1].
Image composite_shadow(const Image& rgb, const Image& mask, double strength);

struct CompositeGrads {
  Image d_rgb;
  Image d_mask;
};
CompositeGrads composite_shadow_backward(const Image& rgb, const Image& mask,
                                         double strength, const Image& d_out);

}  // namespace handsplat
