#pragma once

#include <string>

#include "handsplat/appearance.hpp"
#include "handsplat/dataset.hpp"
#include "handsplat/lbs.hpp"
#include "handsplat/losses.hpp"
#include "handsplat/renderer.hpp"
#include "handsplat/shadow.hpp"

namespace handsplat {

struct ShadowSettings {
  bool enabled = true;
  bool gradients = true;      // propagate mask gradients into rendered depth
  ShadowParams params;
  int samples = 64;
  double radius_frac = 0.03;  // kernel radius as a fraction of image height
  uint64_t seed = 0;
};

struct TrainConfig {
  int epochs = 30;
  int max_steps = 0;  // 0 = epochs * frames
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  uint64_t seed = 0;
  int threads = 1;
  LossWeights weights;
  ShadowSettings shadow;
  PerceptualHook lpips_hook;  // value-only external scorer
};

// Immutable scene context shared by training, evaluation and rendering.
struct SceneAssets {
  CanonicalTemplate tpl;
  WeightField field;
  HandSkeleton canonical;
  AngleLimits limits;
};

GaussianSet make_gaussian_set(const AppearanceModel& model,
                              const Points3& positions,
                              const AppearanceForward& app);

struct PipelineForward {
  SkeletonTransform transform;
  PoseAngles pose;
  AppearanceForward app;
  LbsResult lbs;
  GaussianSet gaussians;
  RenderOutput render_out;
  Image shadow_img;  // empty when shadows are disabled
  Image final_rgb;
};

// Full per-frame pipeline: kinematics -> decode -> skinning -> render ->
// shadow -> composite. Throws the kinematics degeneracy errors for bad
// skeletons.
PipelineForward forward_frame(const AppearanceModel& model,
                              const SceneAssets& assets, const MatX& posenc,
                              const HandSkeleton& target, const Camera& camera,
                              const ShadowSettings& shadow, RenderMode mode,
                              int threads);

// Reverse pass for one frame; accumulates parameter gradients into `grads`
// and returns the loss breakdown.
LossBreakdown backward_frame(const AppearanceModel& model,
                             const SceneAssets& assets, const MatX& posenc,
                             const FrameRecord& frame,
                             const PipelineForward& fwd,
                             const TrainConfig& cfg, AppearanceGrads* grads);

struct TrainLogRow {
  int step = 0;
  int epoch = 0;
  int frame_id = 0;
  LossBreakdown loss;
  double psnr = 0;
};

struct TrainResult {
  AppearanceModel model;
  std::vector<TrainLogRow> log;
  int skipped_frames = 0;
};

// Adam over all trainable tensors; frames shuffled per epoch with the run
// seed. Frames with degenerate skeletons are skipped with a warning.
TrainResult train(const Dataset& dataset, const SceneAssets& assets,
                  const AppearanceConfig& appearance_cfg,
                  const TrainConfig& cfg);

void write_train_log_csv(const std::vector<TrainLogRow>& log,
                         const std::string& path);

struct EvalRow {
  int frame_id = 0;
  double psnr = 0;
  double ssim = 0;
};

struct EvalResult {
  std::vector<EvalRow> rows;
  double mean_psnr = 0;
  double mean_ssim = 0;
};

// Renders every frame and reports image metrics; writes %06d_rgb.png per
// frame into out_dir when non-empty. Throws DomainError on an empty dataset.
EvalResult evaluate(const AppearanceModel& model, const SceneAssets& assets,
                    const Dataset& dataset, const ShadowSettings& shadow,
                    const std::string& out_dir = "", int threads = 1);

}  // namespace handsplat
