#pragma once

#include <memory>
#include <vector>

#include "handsplat/camera.hpp"
#include "handsplat/types.hpp"

namespace handsplat {

// Splatting constants.
inline constexpr double kFootprintSigmas = 3.0;    // per-splat extent cutoff
inline constexpr double kAlphaClamp = 0.999;       // max per-splat alpha
inline constexpr double kTransmittanceStop = 1e-4; // front-to-back early out
inline constexpr double kAlphaBackground = 1e-3;   // below this: background
inline constexpr double kFarSentinelFactor = 1.1;  // of max scene depth
inline constexpr double kDefaultZNear = 0.01;

struct GaussianSet {
  Points3 positions;  // G x 3 (world, meters)
  Points3 colors;     // G x 3 in [0,1]
  VecX opacities;     // G in [0,1]
  MatX scales;        // G x 1 (isotropic) or G x 3 (anisotropic), meters
  MatX quaternions;   // empty = identity; else G x 4 (w,x,y,z), unit, fixed
  bool isotropic = true;

  int size() const { return static_cast<int>(positions.rows()); }
};

void validate_gaussians(const GaussianSet& g);

enum class RenderMode { Eval, Train };

// Isotropic pinhole projection of one splat.
struct Projection {
  bool culled = true;
  Vec2 mu = Vec2::Zero();  // pixel coordinates
  double sigma_px = 0.0;   // screen-space radius parameter
  double z = 0.0;          // camera depth
};
Projection project(const Camera& cam, const Vec3& position, double scale,
                   double z_near = kDefaultZNear);

struct RenderTape;

struct RenderOutput {
  Image rgb;    // H x W x 3
  Image depth;  // H x W, background pixels carry background_depth
  Image alpha;  // H x W
  double background_depth = 1.0;
  std::shared_ptr<const RenderTape> tape;  // populated in train mode
};

// Depth-sorted front-to-back alpha compositing of color, depth and alpha.
// Per-pixel order is canonical (depth, then input index), so the output is
// independent of input permutation for distinct depths.
RenderOutput render(const GaussianSet& gaussians, const Camera& camera,
                    RenderMode mode = RenderMode::Eval, int threads = 1);

struct RenderGrads {
  Points3 d_positions;
  Points3 d_colors;
  VecX d_opacities;
  MatX d_scales;  // same shape as the input scales
};

// Exact reverse-mode gradients of the compositing forward pass. `output`
// must come from a train-mode render of the same scene and camera. Upstream
// depth gradients on background pixels are ignored (their output depth is
// the constant sentinel).
RenderGrads render_backward(const GaussianSet& gaussians, const Camera& camera,
                            const RenderOutput& output, const Image& d_rgb,
                            const Image& d_depth, const Image& d_alpha,
                            int threads = 1);

}  // namespace handsplat
