#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "handsplat/losses.hpp"
#include "handsplat/errors.hpp"
#include "handsplat/metrics.hpp"
#include "helpers.hpp"

using namespace handsplat;
using namespace handsplat::testing;

namespace {

Image random_image(std::mt19937_64& g, int w, int h, int c) {
  Image img(w, h, c);
  for (auto& v : img.data) v = uniform(g, 0.0, 1.0);
  return img;
}

// Direct windowed-statistics SSIM, O(HW win^2); no separable pass.
double naive_ssim(const Image& x, const Image& y, int win = 11) {
  win = std::min({win, x.width, x.height});
  if (win % 2 == 0) --win;
  std::vector<double> ker(win);
  double sum = 0;
  for (int i = 0; i < win; ++i) {
    double d = i - (win - 1) / 2.0;
    ker[i] = std::exp(-d * d / (2 * 1.5 * 1.5));
    sum += ker[i];
  }
  for (double& k : ker) k /= sum;
  const double c1 = 1e-4, c2 = 9e-4;
  double total = 0;
  int count = 0;
  for (int ch = 0; ch < x.channels; ++ch)
    for (int oy = 0; oy + win <= x.height; ++oy)
      for (int ox = 0; ox + win <= x.width; ++ox) {
        double mx = 0, my = 0, xx = 0, yy = 0, xy = 0;
        for (int i = 0; i < win; ++i)
          for (int j = 0; j < win; ++j) {
            double w = ker[i] * ker[j];
            double a = x.at(ox + j, oy + i, ch);
            double b = y.at(ox + j, oy + i, ch);
            mx += w * a;
            my += w * b;
            xx += w * a * a;
            yy += w * b * b;
            xy += w * a * b;
          }
        double sx = xx - mx * mx, sy = yy - my * my, sxy = xy - mx * my;
        total += ((2 * mx * my + c1) * (2 * sxy + c2)) /
                 ((mx * mx + my * my + c1) * (sx + sy + c2));
        ++count;
      }
  return total / count;
}

}  // namespace

TEST_CASE("identical prediction zeroes the photometric terms") {
  auto g = rng(1);
  Image img = random_image(g, 20, 20, 3);
  Image alpha = random_image(g, 20, 20, 1);
  Points3 zero = Points3::Zero(10, 3);
  MatX scales = MatX::Constant(10, 1, 0.002);
  LossBreakdown l = compute_loss(img, alpha, img, alpha, zero, zero, scales,
                                 true, LossWeights{});
  CHECK(l.l1 == 0.0);
  CHECK(l.ssim == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(l.reg == 0.0);
  CHECK(l.mask == 0.0);
  CHECK(l.iso == 0.0);
}

TEST_CASE("offsets of uniform norm produce that norm as the regularizer") {
  auto g = rng(2);
  Image img = random_image(g, 12, 12, 3);
  Image alpha(12, 12, 1);
  Points3 offs(6, 3);
  for (int i = 0; i < 6; ++i)
    offs.row(i) = (0.001 * random_vec3(g, -1, 1).normalized()).transpose();
  MatX scales = MatX::Constant(6, 1, 0.002);
  LossBreakdown l =
      compute_loss(img, alpha, img, alpha, offs, offs, scales, true, LossWeights{});
  CHECK(l.reg == doctest::Approx(0.001).epsilon(1e-12));
  // weighted: total includes reg * lambda_reg (= 1 by default)
  CHECK(l.total == doctest::Approx(l.reg).epsilon(1e-9));
}

TEST_CASE("total equals the weighted sum of the terms") {
  auto g = rng(3);
  Image pred = random_image(g, 16, 16, 3);
  Image gt = random_image(g, 16, 16, 3);
  Image alpha = random_image(g, 16, 16, 1);
  Image mask(16, 16, 1);
  for (auto& v : mask.data) v = uniform(g, 0, 1) < 0.5 ? 0.0 : 1.0;
  Points3 dxi(5, 3), dxn(5, 3);
  for (int i = 0; i < 5; ++i) {
    dxi.row(i) = (0.002 * random_vec3(g, -1, 1)).transpose();
    dxn.row(i) = (0.002 * random_vec3(g, -1, 1)).transpose();
  }
  MatX scales(5, 3);
  for (int i = 0; i < 5; ++i)
    scales.row(i) = random_vec3(g, 0.001, 0.004).transpose();

  LossWeights w;  // paper defaults 1, 0.2, 0.2, 0.2, 1, 0.05
  auto hook = [](const Image&, const Image&) { return 0.37; };
  LossBreakdown l = compute_loss(pred, alpha, gt, mask, dxi, dxn, scales,
                                 false, w, hook);
  double expect = w.rgb * l.l1 + w.ssim * l.ssim + w.lpips * l.lpips +
                  w.mask * l.mask + w.reg * l.reg + w.iso * l.iso;
  CHECK(l.lpips == 0.37);
  CHECK(l.total == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("separable SSIM equals the direct windowed reference") {
  auto g = rng(4);
  for (int trial = 0; trial < 3; ++trial) {
    Image x = random_image(g, 18, 14, 3);
    Image y = random_image(g, 18, 14, 3);
    CHECK(ssim_value(x, y) == doctest::Approx(naive_ssim(x, y)).epsilon(1e-10));
    CHECK(ssim_value(x, x) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("loss gradients match central finite differences") {
  auto g = rng(5);
  const int n = 14;
  Image pred = random_image(g, n, n, 3);
  Image gt = random_image(g, n, n, 3);
  Image alpha = random_image(g, n, n, 1);
  Image mask(n, n, 1);
  for (auto& v : mask.data) v = uniform(g, 0, 1) < 0.5 ? 0.0 : 1.0;
  Points3 dxi(4, 3), dxn(4, 3);
  for (int i = 0; i < 4; ++i) {
    dxi.row(i) = (0.002 * random_vec3(g, -1, 1)).transpose();
    dxn.row(i) = (0.002 * random_vec3(g, -1, 1)).transpose();
  }
  MatX scales(4, 3);
  for (int i = 0; i < 4; ++i)
    scales.row(i) = random_vec3(g, 0.001, 0.004).transpose();
  LossWeights w;

  LossGrads grads;
  compute_loss(pred, alpha, gt, mask, dxi, dxn, scales, false, w, nullptr,
               &grads);
  auto loss_of = [&](const Image& p, const Image& a, const Points3& di,
                     const Points3& dn, const MatX& s) {
    return compute_loss(p, a, gt, mask, di, dn, s, false, w).total;
  };
  const double h = 1e-6;
  for (int t = 0; t < 25; ++t) {
    int x = static_cast<int>(uniform(g, 0, n));
    int y = static_cast<int>(uniform(g, 0, n));
    int c = static_cast<int>(uniform(g, 0, 3));
    Image pp = pred, pm = pred;
    pp.at(x, y, c) += h;
    pm.at(x, y, c) -= h;
    double fd = (loss_of(pp, alpha, dxi, dxn, scales) -
                 loss_of(pm, alpha, dxi, dxn, scales)) / (2 * h);
    CHECK(rel_err(grads.d_rgb.at(x, y, c), fd, 1e-5) < 1e-3);

    Image ap = alpha, am = alpha;
    ap.at(x, y) += h;
    am.at(x, y) -= h;
    fd = (loss_of(pred, ap, dxi, dxn, scales) -
          loss_of(pred, am, dxi, dxn, scales)) / (2 * h);
    CHECK(rel_err(grads.d_alpha.at(x, y), fd, 1e-5) < 1e-3);
  }
  for (int i = 0; i < 4; ++i)
    for (int c = 0; c < 3; ++c) {
      Points3 dp = dxi, dm = dxi;
      dp(i, c) += h;
      dm(i, c) -= h;
      double fd = (loss_of(pred, alpha, dp, dxn, scales) -
                   loss_of(pred, alpha, dm, dxn, scales)) / (2 * h);
      CHECK(rel_err(grads.d_dx_identity(i, c), fd, 1e-5) < 1e-3);

      MatX sp = scales, sm = scales;
      sp(i, c) += h * 0.01;
      sm(i, c) -= h * 0.01;
      fd = (loss_of(pred, alpha, dxi, dxn, sp) -
            loss_of(pred, alpha, dxi, dxn, sm)) / (2 * h * 0.01);
      CHECK(rel_err(grads.d_scales(i, c), fd, 1e-4) < 2e-3);
    }
}

TEST_CASE("psnr caps at 100 for identical images") {
  auto g = rng(6);
  Image img = random_image(g, 8, 8, 3);
  CHECK(psnr(img, img) == 100.0);
  Image other = img;
  other.data[0] += 0.5;
  CHECK(psnr(img, other) < 100.0);
}

TEST_CASE("mpjpe of a skeleton against itself is zero") {
  CHECK(mpjpe(canonical_skeleton(), canonical_skeleton()) == 0.0);
}

TEST_CASE("chamfer distance matches an exhaustive pairing") {
  Points3 a(3, 3), b(3, 3);
  a << 0, 0, 0, 1, 0, 0, 0, 2, 0;
  b << 0.5, 0, 0, 1, 1, 0, 0, 2, 1;
  // nearest of a0 is b0 (0.5); a1 -> b0 (0.5); a2 -> b2 (1.0)
  double fwd = (0.5 + 0.5 + 1.0) / 3.0;
  // nearest of b0 is a0 or a1 (0.5); b1 -> a1 (1.0); b2 -> a2 (1.0)
  double bwd = (0.5 + 1.0 + 1.0) / 3.0;
  CHECK(chamfer_l1(a, b) == doctest::Approx(0.5 * (fwd + bwd)).epsilon(1e-12));
  CHECK_THROWS_AS(chamfer_l1(Points3(0, 3), b), DomainError);
}
