#include "handsplat/shadow.hpp"

#include <cmath>
#include <random>

#include "handsplat/errors.hpp"
#include "handsplat/parallel.hpp"

namespace handsplat {

void validate_shadow_params(const ShadowParams& p) {
  if (p.softness <= 0) throw DomainError("shadow softness must be positive");
  if (p.bias < 0) throw DomainError("shadow bias must be non-negative");
  if (p.strength < 0 || p.strength > 1)
    throw DomainError("shadow strength must lie in [0,1]");
}

ShadowKernel build_kernel(double radius, int n, uint64_t seed) {
  if (n < 1 || radius <= 0)
    throw DomainError("shadow kernel needs n >= 1 and radius > 0");
  ShadowKernel k;
  k.radius = radius;
  k.seed = seed;
  k.offsets.reserve(n);
  std::mt19937_64 rng(seed ^ 0x8f1bbcdcULL);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  // One jittered sample per spiral stratum: area-uniform radius, golden-angle
  // sweep keeps angular coverage even for any n.
  const double golden = M_PI * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < n; ++i) {
    double r = radius * std::sqrt((i + unit(rng)) / n);
    double ang = golden * i + 2.0 * M_PI * unit(rng) / n;
    k.offsets.emplace_back(r * std::cos(ang), r * std::sin(ang));
  }
  return k;
}

double shadow_response(double center_depth, double sample_depth,
                       const ShadowParams& p) {
  double t = (center_depth - sample_depth - p.bias) / p.softness;
  return 1.0 / (1.0 + std::exp(-t));
}

namespace {

inline bool sample_pixel(const Image& depth, double x, double y, int* px,
                         int* py) {
  int ix = static_cast<int>(std::floor(x));
  int iy = static_cast<int>(std::floor(y));
  if (ix < 0 || ix >= depth.width || iy < 0 || iy >= depth.height) return false;
  *px = ix;
  *py = iy;
  return true;
}

}  // namespace

Image shadow_mask(const Image& depth, const ShadowKernel& kernel,
                  const ShadowParams& params, double background_depth,
                  int threads) {
  validate_shadow_params(params);
  Image mask(depth.width, depth.height, 1);
  const double n = static_cast<double>(kernel.offsets.size());
  parallel_for(static_cast<size_t>(depth.height), threads,
               [&](size_t y0, size_t y1) {
    for (size_t y = y0; y < y1; ++y) {
      for (int x = 0; x < depth.width; ++x) {
        double center = depth.at(x, static_cast<int>(y));
        if (center >= background_depth) continue;  // background stays unshadowed
        double sum = 0.0;
        for (const Vec2& off : kernel.offsets) {
          int sx, sy;
          if (!sample_pixel(depth, x + 0.5 + off.x(), y + 0.5 + off.y(), &sx, &sy))
            continue;
          double sample = depth.at(sx, sy);
          if (sample >= background_depth) continue;
          sum += shadow_response(center, sample, params);
        }
        mask.at(x, static_cast<int>(y)) = sum / n;
      }
    }
  });
  return mask;
}

Image shadow_mask_backward(const Image& depth, const ShadowKernel& kernel,
                           const ShadowParams& params, double background_depth,
                           const Image& d_mask, int threads) {
  validate_shadow_params(params);
  if (!d_mask.same_shape(depth) && !(d_mask.width == depth.width &&
                                     d_mask.height == depth.height &&
                                     d_mask.channels == 1))
    throw DomainError("mask gradient shape mismatch");
  const double n = static_cast<double>(kernel.offsets.size());
  const int workers = std::max(1, resolve_threads(threads));
  std::vector<Image> partial(workers);
  for (auto& img : partial) img = Image(depth.width, depth.height, 1);

  const size_t rows = static_cast<size_t>(depth.height);
  const size_t chunk = (rows + workers - 1) / workers;
  parallel_for(static_cast<size_t>(workers), workers, [&](size_t wb, size_t we) {
    for (size_t worker = wb; worker < we; ++worker) {
      Image& out = partial[worker];
      size_t y0 = worker * chunk, y1 = std::min(rows, y0 + chunk);
      for (size_t y = y0; y < y1; ++y) {
        for (int x = 0; x < depth.width; ++x) {
          double up = d_mask.at(x, static_cast<int>(y)) / n;
          if (up == 0.0) continue;
          double center = depth.at(x, static_cast<int>(y));
          if (center >= background_depth) continue;
          for (const Vec2& off : kernel.offsets) {
            int sx, sy;
            if (!sample_pixel(depth, x + 0.5 + off.x(), y + 0.5 + off.y(), &sx,
                              &sy))
              continue;
            double sample = depth.at(sx, sy);
            if (sample >= background_depth) continue;
            double f = shadow_response(center, sample, params);
            double df = f * (1.0 - f) / params.softness;
            out.at(x, static_cast<int>(y)) += up * df;
            out.at(sx, sy) -= up * df;
          }
        }
      }
    }
  });

  Image d_depth(depth.width, depth.height, 1);
  for (const Image& img : partial)
    for (size_t i = 0; i < d_depth.data.size(); ++i)
      d_depth.data[i] += img.data[i];
  return d_depth;
}

Image composite_shadow(const Image& rgb, const Image& mask, double strength) {
  if (mask.width != rgb.width || mask.height != rgb.height)
    throw DomainError("shadow mask size mismatch");
  Image out = rgb;
  for (int y = 0; y < rgb.height; ++y)
    for (int x = 0; x < rgb.width; ++x) {
      double factor = 1.0 - strength * mask.at(x, y);
      for (int c = 0; c < rgb.channels; ++c)
        out.at(x, y, c) = std::clamp(rgb.at(x, y, c) * factor, 0.0, 1.0);
    }
  return out;
}

CompositeGrads composite_shadow_backward(const Image& rgb, const Image& mask,
                                         double strength, const Image& d_out) {
  CompositeGrads g;
  g.d_rgb = Image(rgb.width, rgb.height, rgb.channels);
  g.d_mask = Image(rgb.width, rgb.height, 1);
  for (int y = 0; y < rgb.height; ++y)
    for (int x = 0; x < rgb.width; ++x) {
      double factor = 1.0 - strength * mask.at(x, y);
      for (int c = 0; c < rgb.channels; ++c) {
        double pre_clamp = rgb.at(x, y, c) * factor;
        if (pre_clamp < 0.0 || pre_clamp > 1.0) continue;  // clamp gate
        double up = d_out.at(x, y, c);
        g.d_rgb.at(x, y, c) += up * factor;
        g.d_mask.at(x, y) -= up * rgb.at(x, y, c) * strength;
      }
    }
  return g;
}

}  // namespace handsplat
