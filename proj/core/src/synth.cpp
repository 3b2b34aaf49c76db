#include "handsplat/synth.hpp"

#include <cmath>
#include <filesystem>
#include <random>

#include "handsplat/capsule_hand.hpp"
#include "handsplat/errors.hpp"

namespace handsplat {

namespace fs = std::filesystem;

Vec3 synthetic_color(const Vec3& uvd) {
  double u = uvd.x(), v = uvd.y(), d = uvd.z();
  return Vec3(0.25 + 0.5 * u + 0.15 * std::sin(2.0 * M_PI * v),
              0.25 + 0.5 * v + 0.15 * std::sin(2.0 * M_PI * u),
              0.30 + 0.40 * d + 0.20 * u * v);
}

namespace {

AngleLimits shrink_limits(const AngleLimits& limits, const PoseAngles& center,
                          double factor) {
  AngleLimits out = limits;
  for (int b = 1; b < kNumJoints; ++b) {
    out.flexion_min[b] = center.flexion[b] +
                         factor * (limits.flexion_min[b] - center.flexion[b]);
    out.flexion_max[b] = center.flexion[b] +
                         factor * (limits.flexion_max[b] - center.flexion[b]);
    out.abduction_min[b] =
        center.abduction[b] +
        factor * (limits.abduction_min[b] - center.abduction[b]);
    out.abduction_max[b] =
        center.abduction[b] +
        factor * (limits.abduction_max[b] - center.abduction[b]);
  }
  return out;
}

// A posed skeleton without the global rigid motion: palm frame and root stay
// canonical so the camera ring keeps the hand in view.
HandSkeleton sample_pose_in_place(const HandSkeleton& canonical,
                                  const AngleLimits& limits,
                                  std::mt19937_64& rng) {
  for (int attempt = 0; attempt < 100; ++attempt) {
    HandSkeleton s = sample_random_skeleton(canonical, limits, 0.0, rng);
    // Undo the random rigid motion by mapping the palm frame back.
    Mat3 q = palm_frame(canonical) * palm_frame(s).transpose();
    HandSkeleton out;
    for (int i = 0; i < kNumJoints; ++i)
      out.joints[i] = q * (s.joints[i] - s.root()) + canonical.root();
    try {
      extract_pose(out);
      return out;
    } catch (const Error&) {
      continue;
    }
  }
  throw DegenerateSkeletonError("could not sample an in-place pose");
}

}  // namespace

void generate_synthetic_dataset(const std::string& out_dir,
                                const SynthOptions& opts) {
  if (opts.n_views < 1) throw DomainError("n_views must be >= 1");
  fs::create_directories(out_dir);

  const HandSkeleton& canonical = canonical_skeleton();
  CanonicalMesh mesh = capsule_hand_mesh(canonical);
  save_obj(mesh, (fs::path(out_dir) / "mesh.obj").string());
  save_skeleton_json(canonical, (fs::path(out_dir) / "canonical.json").string());

  CanonicalTemplate tpl =
      sample_template(mesh, canonical, opts.n_per_bone, opts.seed, opts.threads);
  save_template(tpl, (fs::path(out_dir) / "template.jgtp").string());
  WeightField field =
      build_weight_field(mesh, canonical, opts.field_resolution, opts.threads);
  save_weight_field(field, (fs::path(out_dir) / "weights.jgwf").string());

  // Fixed ground-truth appearance.
  const int g = tpl.size();
  GaussianSet gt;
  gt.positions.resize(g, 3);
  gt.colors.resize(g, 3);
  gt.opacities = VecX::Constant(g, 0.85);
  gt.scales = MatX::Constant(g, 1, 0.0028);
  gt.isotropic = true;
  for (int i = 0; i < g; ++i)
    gt.colors.row(i) = synthetic_color(tpl.uvd.row(i).transpose()).transpose();

  // Camera ring around the hand centroid.
  Vec3 center = Vec3::Zero();
  for (const Vec3& j : canonical.joints) center += j;
  center /= kNumJoints;
  const double radius = 0.42;
  const double fx = 1.1 * opts.image_size;

  AngleLimits pose_limits = shrink_limits(
      default_angle_limits(), extract_pose(canonical), opts.pose_variation);
  std::mt19937_64 rng(opts.seed ^ 0xa0761d6478bd642fULL);

  std::vector<std::pair<int, std::string>> manifest;
  const Points3 zero_offsets = Points3::Zero(g, 3);
  for (int view = 0; view < opts.n_views; ++view) {
    double phi = 2.0 * M_PI * view / opts.n_views;
    Vec3 eye = center + radius * Vec3(std::sin(phi), 0.35, std::cos(phi)).normalized();
    Camera cam = look_at_camera(eye, center, Vec3(0, 1, 0), fx,
                                opts.image_size, opts.image_size);

    HandSkeleton pose = sample_pose_in_place(canonical, pose_limits, rng);
    SkeletonTransform transform = compute_transform(canonical, pose);
    LbsResult lbs = pose_gaussians(tpl, field, transform, zero_offsets,
                                   zero_offsets, opts.threads);
    GaussianSet scene = gt;
    scene.positions = lbs.posed;
    RenderOutput ro = render(scene, cam, RenderMode::Eval, opts.threads);

    Image final_rgb = ro.rgb;
    if (opts.shadow.enabled) {
      ShadowKernel kernel =
          build_kernel(std::max(1.0, opts.shadow.radius_frac * cam.height),
                       opts.shadow.samples, opts.shadow.seed);
      Image s = shadow_mask(ro.depth, kernel, opts.shadow.params,
                            ro.background_depth, opts.threads);
      final_rgb = composite_shadow(ro.rgb, s, opts.shadow.params.strength);
    }
    Image mask(cam.width, cam.height, 1);
    for (size_t i = 0; i < mask.data.size(); ++i)
      mask.data[i] = ro.alpha.data[i] > 0.5 ? 1.0 : 0.0;

    save_frame(out_dir, view, final_rgb, mask, pose, cam);
    manifest.emplace_back(view, "train");
  }
  save_manifest(out_dir, manifest);
}

}  // namespace handsplat
