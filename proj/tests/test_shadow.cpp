#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "handsplat/shadow.hpp"
#include "helpers.hpp"

using namespace handsplat;
using namespace handsplat::testing;

namespace {

// Scalar reference: plain double loops, no parallel path.
Image reference_mask(const Image& depth, const ShadowKernel& k,
                     const ShadowParams& p, double background) {
  Image mask(depth.width, depth.height, 1);
  for (int y = 0; y < depth.height; ++y)
    for (int x = 0; x < depth.width; ++x) {
      double center = depth.at(x, y);
      if (center >= background) continue;
      double sum = 0;
      for (const Vec2& off : k.offsets) {
        int sx = static_cast<int>(std::floor(x + 0.5 + off.x()));
        int sy = static_cast<int>(std::floor(y + 0.5 + off.y()));
        if (sx < 0 || sx >= depth.width || sy < 0 || sy >= depth.height) continue;
        double b = depth.at(sx, sy);
        if (b >= background) continue;
        double t = (center - b - p.bias) / p.softness;
        sum += 1.0 / (1.0 + std::exp(-t));
      }
      mask.at(x, y) = sum / k.offsets.size();
    }
  return mask;
}

Image random_depth(std::mt19937_64& g, int size, double background,
                   double bg_fraction = 0.2) {
  Image d(size, size, 1);
  for (auto& v : d.data)
    v = uniform(g, 0, 1) < bg_fraction ? background : uniform(g, 0.5, 1.0);
  return d;
}

}  // namespace

TEST_CASE("kernel offsets stay inside the radius and are deterministic") {
  ShadowKernel k = build_kernel(5.0, 64, 7);
  CHECK(k.offsets.size() == 64);
  for (const Vec2& o : k.offsets) CHECK(o.norm() <= 5.0 + 1e-12);
  ShadowKernel k2 = build_kernel(5.0, 64, 7);
  for (size_t i = 0; i < k.offsets.size(); ++i)
    CHECK(k.offsets[i] == k2.offsets[i]);
  ShadowKernel tiny = build_kernel(1.0, 16, 1);
  for (const Vec2& o : tiny.offsets) CHECK(o.norm() <= 1.0 + 1e-12);
}

TEST_CASE("a constant depth plane is nearly shadow-free at bias = 3 softness") {
  Image depth(24, 24, 1, 0.8);
  ShadowParams p;
  p.softness = 0.002;
  p.bias = 3 * p.softness;
  ShadowKernel k = build_kernel(3.0, 64, 0);
  Image mask = shadow_mask(depth, k, p, 10.0);
  for (double v : mask.data) CHECK(v < 0.05);
}

TEST_CASE("a step occluder shades about half the kernel at the boundary") {
  // Left half much closer than the right half.
  const int n = 32;
  Image depth(n, n, 1);
  ShadowParams p;  // bias 5mm, softness 2mm
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) depth.at(x, y) = x < n / 2 ? 0.5 : 0.8;
  ShadowKernel k = build_kernel(4.0, 256, 3);
  Image mask = shadow_mask(depth, k, p, 10.0);
  Image ref = reference_mask(depth, k, p, 10.0);
  // Derived from the per-pixel summation oracle: the column just right of
  // the step sees roughly half its samples on the closer region.
  double band = ref.at(n / 2 + 1, n / 2);
  CHECK(band > 0.3);
  CHECK(band < 0.6);
  CHECK(mask.at(n / 2 + 1, n / 2) == doctest::Approx(band).epsilon(1e-12));
  // Far from the step only the flat-plane response remains
  // (logistic(-bias/softness) = logistic(-2.5) ~ 0.076 with the defaults).
  CHECK(mask.at(n - 3, n / 2) < 0.1);
}

TEST_CASE("background-only neighborhoods produce zero shadow") {
  Image depth(8, 8, 1, 5.0);  // everything at the sentinel
  ShadowKernel k = build_kernel(2.0, 32, 0);
  ShadowParams p;
  Image mask = shadow_mask(depth, k, p, 5.0);
  for (double v : mask.data) CHECK(v == 0.0);
}

TEST_CASE("mask values stay in [0,1] and match the scalar reference") {
  auto g = rng(5);
  ShadowParams p;
  ShadowKernel k = build_kernel(3.0, 64, 11);
  for (int trial = 0; trial < 5; ++trial) {
    Image depth = random_depth(g, 16, 5.0);
    Image mask = shadow_mask(depth, k, p, 5.0, 3);
    Image ref = reference_mask(depth, k, p, 5.0);
    for (size_t i = 0; i < mask.data.size(); ++i) {
      CHECK(mask.data[i] >= 0.0);
      CHECK(mask.data[i] <= 1.0);
      CHECK(std::abs(mask.data[i] - ref.data[i]) <= 1e-6);
    }
  }
}

TEST_CASE("bringing a sampled neighbor closer never lightens the center") {
  auto g = rng(9);
  ShadowParams p;
  ShadowKernel k = build_kernel(3.0, 32, 2);
  for (int trial = 0; trial < 1000; ++trial) {
    Image depth = random_depth(g, 8, 5.0, 0.0);
    int x = static_cast<int>(uniform(g, 0, 8));
    int y = static_cast<int>(uniform(g, 0, 8));
    Image closer = depth;
    closer.at(x, y) = std::max(0.01, depth.at(x, y) - uniform(g, 0, 0.3));
    Image before = shadow_mask(depth, k, p, 5.0);
    Image after = shadow_mask(closer, k, p, 5.0);
    for (int yy = 0; yy < 8; ++yy)
      for (int xx = 0; xx < 8; ++xx) {
        // The perturbed pixel's own center depth moved too; monotonicity
        // only constrains the pixels sampling it.
        if (xx == x && yy == y) continue;
        CHECK(after.at(xx, yy) >= before.at(xx, yy) - 1e-12);
      }
  }
}

TEST_CASE("shadow gradients match central finite differences") {
  auto g = rng(17);
  ShadowParams p;
  ShadowKernel k = build_kernel(3.0, 32, 4);
  const int n = 16;
  Image depth = random_depth(g, n, 5.0, 0.0);
  Image upstream(n, n, 1);
  for (auto& v : upstream.data) v = uniform(g, -1, 1);

  Image grad = shadow_mask_backward(depth, k, p, 5.0, upstream, 2);
  auto loss = [&](const Image& d) {
    Image m = shadow_mask(d, k, p, 5.0);
    double s = 0;
    for (size_t i = 0; i < m.data.size(); ++i) s += upstream.data[i] * m.data[i];
    return s;
  };
  const double h = 1e-7;
  auto check_at = [&](int x, int y) {
    Image dp = depth, dm = depth;
    dp.at(x, y) += h;
    dm.at(x, y) -= h;
    double fd = (loss(dp) - loss(dm)) / (2 * h);
    CHECK(rel_err(grad.at(x, y), fd, 1e-4) < 1e-3);
  };
  for (int t = 0; t < 40; ++t)
    check_at(static_cast<int>(uniform(g, 0, n)), static_cast<int>(uniform(g, 0, n)));
}

TEST_CASE("composite obeys its closed forms") {
  Image rgb(4, 4, 3, 0.6);
  Image zero_mask(4, 4, 1, 0.0);
  Image full_mask(4, 4, 1, 1.0);
  Image half_mask(4, 4, 1, 0.5);

  Image same = composite_shadow(rgb, zero_mask, 0.7);
  CHECK(same.data == rgb.data);

  Image black = composite_shadow(rgb, full_mask, 1.0);
  for (double v : black.data) CHECK(v == 0.0);

  Image dimmed = composite_shadow(rgb, half_mask, 0.5);
  for (double v : dimmed.data) CHECK(v == doctest::Approx(0.6 * 0.75));
}

TEST_CASE("composite gradients match finite differences") {
  auto g = rng(23);
  const int n = 6;
  Image rgb(n, n, 3);
  Image mask(n, n, 1);
  for (auto& v : rgb.data) v = uniform(g, 0.05, 0.95);
  for (auto& v : mask.data) v = uniform(g, 0.0, 1.0);
  Image upstream(n, n, 3);
  for (auto& v : upstream.data) v = uniform(g, -1, 1);

  const double ks = 0.4;
  CompositeGrads cg = composite_shadow_backward(rgb, mask, ks, upstream);
  auto loss = [&](const Image& r, const Image& m) {
    Image out = composite_shadow(r, m, ks);
    double s = 0;
    for (size_t i = 0; i < out.data.size(); ++i) s += upstream.data[i] * out.data[i];
    return s;
  };
  const double h = 1e-7;
  for (int t = 0; t < 30; ++t) {
    int x = static_cast<int>(uniform(g, 0, n));
    int y = static_cast<int>(uniform(g, 0, n));
    int c = static_cast<int>(uniform(g, 0, 3));
    Image rp = rgb, rm = rgb;
    rp.at(x, y, c) += h;
    rm.at(x, y, c) -= h;
    double fd = (loss(rp, mask) - loss(rm, mask)) / (2 * h);
    CHECK(rel_err(cg.d_rgb.at(x, y, c), fd, 1e-4) < 1e-3);
    Image mp = mask, mm = mask;
    mp.at(x, y) += h;
    mm.at(x, y) -= h;
    fd = (loss(rgb, mp) - loss(rgb, mm)) / (2 * h);
    CHECK(rel_err(cg.d_mask.at(x, y), fd, 1e-4) < 1e-3);
  }
}
