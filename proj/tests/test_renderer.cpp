#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "handsplat/errors.hpp"
#include "handsplat/renderer.hpp"
#include "helpers.hpp"

using namespace handsplat;
using namespace handsplat::testing;

TEST_CASE("project maps the optical axis to the principal point") {
  Camera cam = test_camera(64, 48, 100.0);
  Projection p = project(cam, Vec3(0, 0, 1.5), 0.01);
  CHECK(!p.culled);
  CHECK(p.mu.x() == doctest::Approx(cam.cx));
  CHECK(p.mu.y() == doctest::Approx(cam.cy));
  CHECK(p.z == doctest::Approx(1.5));
}

TEST_CASE("projected radius is scale*fx/z") {
  Camera cam = test_camera(64, 64, 200.0);
  Projection p = project(cam, Vec3(0.01, -0.02, 2.0), 0.05);
  CHECK(p.sigma_px == doctest::Approx(0.05 * 200.0 / 2.0));
}

TEST_CASE("points behind the camera are culled") {
  Camera cam = test_camera(64, 64);
  CHECK(project(cam, Vec3(0, 0, -1.0), 0.01).culled);
  CHECK(project(cam, Vec3(10.0, 0, 1.0), 0.0001).culled);  // off-image
}

namespace {

GaussianSet single_gaussian(const Vec3& pos, const Vec3& color, double opacity,
                            double scale) {
  GaussianSet g;
  g.positions.resize(1, 3);
  g.positions.row(0) = pos.transpose();
  g.colors.resize(1, 3);
  g.colors.row(0) = color.transpose();
  g.opacities = VecX::Constant(1, opacity);
  g.scales = MatX::Constant(1, 1, scale);
  g.isotropic = true;
  return g;
}

}  // namespace

TEST_CASE("single opaque gaussian composites its clamped color and depth") {
  Camera cam = test_camera(9, 9, 20.0);
  // Center the splat exactly on the middle pixel center.
  Vec3 pos((4.5 - cam.cx) / cam.fx, (4.5 - cam.cy) / cam.fy, 1.0);
  GaussianSet g = single_gaussian(pos, Vec3(0.2, 0.5, 0.8), 1.0, 0.1);
  RenderOutput out = render(g, cam);
  // alpha clamps at 0.999 by construction
  CHECK(out.alpha.at(4, 4) == doctest::Approx(kAlphaClamp).epsilon(1e-12));
  CHECK(out.rgb.at(4, 4, 1) == doctest::Approx(kAlphaClamp * 0.5).epsilon(1e-12));
  CHECK(out.depth.at(4, 4) == doctest::Approx(kAlphaClamp * 1.0).epsilon(1e-12));
}

TEST_CASE("two half-opacity gaussians blend depth front to back") {
  Camera cam = test_camera(9, 9, 20.0);
  double px = 4.5;
  Vec3 a((px - cam.cx) / cam.fx * 1.0, (px - cam.cy) / cam.fy * 1.0, 1.0);
  Vec3 b((px - cam.cx) / cam.fx * 2.0, (px - cam.cy) / cam.fy * 2.0, 2.0);
  GaussianSet g;
  g.positions.resize(2, 3);
  g.positions.row(0) = b.transpose();  // farther first: order must not matter
  g.positions.row(1) = a.transpose();
  g.colors = Points3::Zero(2, 3);
  g.opacities = VecX::Constant(2, 0.5);
  g.scales = MatX::Constant(2, 1, 0.5);  // huge footprint, exp(~0) at center
  g.isotropic = true;
  RenderOutput out = render(g, cam);
  // alpha_j == 0.5 at the shared center: depth = 0.5*1 + 0.25*2
  CHECK(out.depth.at(4, 4) == doctest::Approx(0.5 * 1.0 + 0.25 * 2.0).epsilon(1e-9));
  CHECK(out.alpha.at(4, 4) == doctest::Approx(0.75).epsilon(1e-9));
}

TEST_CASE("random scenes match the brute-force compositor") {
  for (bool iso : {true, false}) {
    auto g = rng(iso ? 11 : 13);
    for (int trial = 0; trial < 12; ++trial) {
      GaussianSet scene = random_scene(g, 1 + trial * 4, iso, 32);
      Camera cam = test_camera(32, 32);
      RenderOutput fast = render(scene, cam);
      RenderOutput ref = reference_render(scene, cam);
      double worst = 0;
      for (size_t i = 0; i < fast.rgb.data.size(); ++i)
        worst = std::max(worst, std::abs(fast.rgb.data[i] - ref.rgb.data[i]));
      for (size_t i = 0; i < fast.depth.data.size(); ++i) {
        worst = std::max(worst, std::abs(fast.depth.data[i] - ref.depth.data[i]));
        worst = std::max(worst, std::abs(fast.alpha.data[i] - ref.alpha.data[i]));
      }
      CHECK(worst <= 1e-6);
    }
  }
}

TEST_CASE("input permutation leaves output bit-identical for distinct depths") {
  auto g = rng(21);
  GaussianSet scene = random_scene(g, 24, true, 32);
  Camera cam = test_camera(32, 32);
  RenderOutput a = render(scene, cam);

  // Reverse the gaussian order.
  GaussianSet rev = scene;
  int n = scene.size();
  for (int i = 0; i < n; ++i) {
    rev.positions.row(i) = scene.positions.row(n - 1 - i);
    rev.colors.row(i) = scene.colors.row(n - 1 - i);
    rev.opacities[i] = scene.opacities[n - 1 - i];
    rev.scales.row(i) = scene.scales.row(n - 1 - i);
  }
  RenderOutput b = render(rev, cam);
  CHECK(a.rgb.data == b.rgb.data);
  CHECK(a.depth.data == b.depth.data);
  CHECK(a.alpha.data == b.alpha.data);
}

TEST_CASE("an opaque front occluder pulls pixel depth to its plane") {
  auto g = rng(33);
  GaussianSet scene = random_scene(g, 20, true, 32);
  Camera cam = test_camera(32, 32);
  RenderOutput before = render(scene, cam);

  GaussianSet with = scene;
  int n = scene.size();
  with.positions.conservativeResize(n + 1, 3);
  with.colors.conservativeResize(n + 1, 3);
  with.opacities.conservativeResize(n + 1);
  with.scales.conservativeResize(n + 1, 1);
  with.positions.row(n) = Vec3(0, 0, 0.5).transpose();  // closer than the slab
  with.colors.row(n) = Vec3(1, 1, 1).transpose();
  with.opacities[n] = 1.0;
  // Large enough that the falloff still clamps to 0.999 at the corners.
  with.scales(n, 0) = 8.0;
  RenderOutput after = render(with, cam);
  (void)before;
  // The occluder composites first with alpha 0.999: depth lands on its
  // plane up to a 1e-3 residue from what is left behind it.
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x)
      CHECK(std::abs(after.depth.at(x, y) - kAlphaClamp * 0.5) < 3e-3);
}

TEST_CASE("energy bounds hold for in-range colors") {
  auto g = rng(44);
  GaussianSet scene = random_scene(g, 60, true, 32);
  Camera cam = test_camera(32, 32);
  RenderOutput out = render(scene, cam);
  for (double a : out.alpha.data) {
    CHECK(a >= 0.0);
    CHECK(a <= 1.0 + 1e-12);
  }
  for (double v : out.rgb.data) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0 + 1e-12);
  }
}

TEST_CASE("eval-mode output refuses backward") {
  auto g = rng(55);
  GaussianSet scene = random_scene(g, 4, true, 16);
  Camera cam = test_camera(16, 16);
  RenderOutput out = render(scene, cam, RenderMode::Eval);
  Image zero3(16, 16, 3), zero1(16, 16, 1);
  CHECK_THROWS_AS(render_backward(scene, cam, out, zero3, zero1, zero1),
                  MissingTapeError);
}

TEST_CASE("zero upstream gradients give zero parameter gradients") {
  auto g = rng(66);
  GaussianSet scene = random_scene(g, 8, true, 16);
  Camera cam = test_camera(16, 16);
  RenderOutput out = render(scene, cam, RenderMode::Train);
  Image zero3(16, 16, 3), zero1(16, 16, 1);
  RenderGrads grads = render_backward(scene, cam, out, zero3, zero1, zero1);
  CHECK(grads.d_positions.cwiseAbs().maxCoeff() == 0.0);
  CHECK(grads.d_colors.cwiseAbs().maxCoeff() == 0.0);
  CHECK(grads.d_opacities.cwiseAbs().maxCoeff() == 0.0);
  CHECK(grads.d_scales.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("single-gaussian color gradient equals the pixel weight") {
  Camera cam = test_camera(9, 9, 20.0);
  Vec3 pos((4.5 - cam.cx) / cam.fx, (4.5 - cam.cy) / cam.fy, 1.0);
  GaussianSet g = single_gaussian(pos, Vec3(0.3, 0.3, 0.3), 0.7, 0.1);
  RenderOutput out = render(g, cam, RenderMode::Train);
  Image d_rgb(9, 9, 3), zero1(9, 9, 1);
  d_rgb.at(4, 4, 0) = 1.0;
  RenderGrads grads = render_backward(g, cam, out, d_rgb, zero1, zero1);
  CHECK(grads.d_colors(0, 0) == doctest::Approx(out.alpha.at(4, 4)).epsilon(1e-12));
  CHECK(grads.d_colors(0, 1) == 0.0);
}

namespace {

// Scalar loss over all outputs with fixed random upstream weights; used for
// the finite-difference checks.
struct LossProbe {
  Image w_rgb, w_depth, w_alpha;
  explicit LossProbe(std::mt19937_64& g, int size) {
    w_rgb = Image(size, size, 3);
    w_depth = Image(size, size, 1);
    w_alpha = Image(size, size, 1);
    for (auto& v : w_rgb.data) v = uniform(g, -1, 1);
    for (auto& v : w_depth.data) v = uniform(g, -1, 1);
    for (auto& v : w_alpha.data) v = uniform(g, -1, 1);
  }
  double eval(const GaussianSet& scene, const Camera& cam) const {
    RenderOutput out = render(scene, cam);
    double s = 0;
    for (size_t i = 0; i < out.rgb.data.size(); ++i)
      s += w_rgb.data[i] * out.rgb.data[i];
    for (size_t i = 0; i < out.depth.data.size(); ++i) {
      // Match backward: background pixels carry no depth gradient.
      if (out.alpha.data[i] >= kAlphaBackground)
        s += w_depth.data[i] * out.depth.data[i];
      s += w_alpha.data[i] * out.alpha.data[i];
    }
    return s;
  }
};

}  // namespace

TEST_CASE("render gradients match central finite differences") {
  for (bool iso : {true, false}) {
    auto g = rng(iso ? 77 : 78);
    const int size = 16;
    GaussianSet scene = random_scene(g, 8, iso, size);
    Camera cam = test_camera(size, size);
    LossProbe probe(g, size);

    RenderOutput out = render(scene, cam, RenderMode::Train);
    RenderGrads grads = render_backward(scene, cam, out, probe.w_rgb,
                                        probe.w_depth, probe.w_alpha);
    const double h = 1e-6;
    int checked = 0;
    for (int i = 0; i < scene.size(); ++i) {
      for (int c = 0; c < 3; ++c) {
        GaussianSet p = scene, m = scene;
        p.positions(i, c) += h;
        m.positions(i, c) -= h;
        double fd = (probe.eval(p, cam) - probe.eval(m, cam)) / (2 * h);
        if (std::abs(fd) < 1e-7 && std::abs(grads.d_positions(i, c)) < 1e-7)
          continue;
        CHECK(rel_err(grads.d_positions(i, c), fd, 1e-3) < 1e-3);
        ++checked;
      }
      for (int c = 0; c < scene.scales.cols(); ++c) {
        GaussianSet p = scene, m = scene;
        p.scales(i, c) += h;
        m.scales(i, c) -= h;
        double fd = (probe.eval(p, cam) - probe.eval(m, cam)) / (2 * h);
        if (std::abs(fd) < 1e-7 && std::abs(grads.d_scales(i, c)) < 1e-7) continue;
        CHECK(rel_err(grads.d_scales(i, c), fd, 1e-3) < 1e-3);
        ++checked;
      }
      {
        GaussianSet p = scene, m = scene;
        p.opacities[i] += h;
        m.opacities[i] -= h;
        double fd = (probe.eval(p, cam) - probe.eval(m, cam)) / (2 * h);
        if (!(std::abs(fd) < 1e-7 && std::abs(grads.d_opacities[i]) < 1e-7)) {
          CHECK(rel_err(grads.d_opacities[i], fd, 1e-3) < 1e-3);
          ++checked;
        }
        GaussianSet pc = scene, mc = scene;
        pc.colors(i, 1) += h;
        mc.colors(i, 1) -= h;
        fd = (probe.eval(pc, cam) - probe.eval(mc, cam)) / (2 * h);
        if (!(std::abs(fd) < 1e-7 && std::abs(grads.d_colors(i, 1)) < 1e-7)) {
          CHECK(rel_err(grads.d_colors(i, 1), fd, 1e-3) < 1e-3);
          ++checked;
        }
      }
    }
    CHECK(checked > 20);  // the scene must actually exercise the gradients
  }
}
