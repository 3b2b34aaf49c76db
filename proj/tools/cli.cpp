#include "cli.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <random>

#include <CLI11.hpp>

#include "handsplat/appearance.hpp"
#include "handsplat/capsule_hand.hpp"
#include "handsplat/errors.hpp"
#include "handsplat/image_io.hpp"
#include "handsplat/run_config.hpp"
#include "handsplat/synth.hpp"
#include "handsplat/trainer.hpp"

namespace handsplat {

namespace fs = std::filesystem;

namespace {

SceneAssets load_assets(const std::string& template_path,
                        const std::string& weights_path,
                        const std::string& canonical_path,
                        const std::string& limits_path) {
  SceneAssets assets;
  assets.tpl = load_template(template_path);
  assets.field = load_weight_field(weights_path);
  assets.canonical = canonical_path.empty() ? canonical_skeleton()
                                            : load_skeleton_json(canonical_path);
  assets.limits = limits_path.empty() ? default_angle_limits()
                                      : load_angle_limits_json(limits_path);
  return assets;
}

int cmd_pose(const std::string& canonical_path, const std::string& target_path,
             const std::string& out_path) {
  HandSkeleton canonical = load_skeleton_json(canonical_path);
  HandSkeleton target = load_skeleton_json(target_path);
  SkeletonTransform t = compute_transform(canonical, target);
  HandSkeleton posed = apply_transform(t, canonical);
  save_skeleton_json(posed, out_path);
  double err = mpjpe(posed, target);
  std::printf("mpjpe %.3e m\n", err);
  return err <= 1e-6 ? 0 : 1;
}

int cmd_validate_transform(int trials, uint64_t seed,
                           const std::string& limits_path) {
  if (trials < 1) throw IoError("--trials must be >= 1");
  const AngleLimits& limits = limits_path.empty()
                                  ? default_angle_limits()
                                  : load_angle_limits_json(limits_path);
  const HandSkeleton& canonical = canonical_skeleton();
  std::mt19937_64 rng(seed);
  double max_err = 0.0;
  auto start = std::chrono::steady_clock::now();
  for (int i = 0; i < trials; ++i) {
    HandSkeleton target = sample_random_skeleton(canonical, limits, 0.3, rng);
    SkeletonTransform t = compute_transform(canonical, target);
    max_err = std::max(max_err, mpjpe(apply_transform(t, canonical), target));
  }
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                              start).count();
  std::printf("trials %d  max mpjpe %.3e m  elapsed %.3f s\n", trials, max_err,
              secs);
  return max_err <= 1e-6 ? 0 : 1;
}

int cmd_render(const RunConfig& cfg, const std::string& skeleton_path,
               const std::string& out_dir, bool shadow_on, int threads) {
  SceneAssets assets = load_assets(cfg.paths.template_file, cfg.paths.weights,
                                   cfg.paths.canonical, cfg.paths.limits);
  Camera camera = load_camera_json(cfg.paths.camera);
  HandSkeleton target = load_skeleton_json(skeleton_path);

  AppearanceModel model =
      cfg.paths.checkpoint.empty()
          ? AppearanceModel::create(cfg.appearance, assets.tpl.size(), cfg.seed)
          : load_appearance(cfg.paths.checkpoint);
  if (model.num_gaussians() != assets.tpl.size())
    throw VersionError("checkpoint gaussian count does not match the template");

  ShadowSettings shadow = cfg.shadow;
  shadow.enabled = shadow_on;
  MatX posenc = encode_template_uvd(assets.tpl, model.cfg.posenc_bands);
  PipelineForward fwd = forward_frame(model, assets, posenc, target, camera,
                                      shadow, RenderMode::Eval, threads);

  fs::create_directories(out_dir);
  save_png(fwd.final_rgb, (fs::path(out_dir) / "rgb.png").string());
  save_pfm(fwd.render_out.depth, (fs::path(out_dir) / "depth.pfm").string());
  save_png(fwd.render_out.alpha, (fs::path(out_dir) / "alpha.png").string());
  if (shadow_on)
    save_png(fwd.shadow_img, (fs::path(out_dir) / "shadow.png").string());
  double coverage = 0.0;
  for (double a : fwd.render_out.alpha.data) coverage += a > 0.5 ? 1.0 : 0.0;
  std::printf("alpha coverage %.1f%%\n",
              100.0 * coverage / fwd.render_out.alpha.pixel_count());
  return 0;
}

int cmd_train(const RunConfig& cfg, const std::string& out_dir) {
  SceneAssets assets = load_assets(cfg.paths.template_file, cfg.paths.weights,
                                   cfg.paths.canonical, cfg.paths.limits);
  Dataset dataset = load_dataset(cfg.paths.dataset);
  TrainResult result = train(dataset, assets, cfg.appearance, cfg.train);
  fs::create_directories(out_dir);
  save_appearance(result.model, (fs::path(out_dir) / "checkpoint.jgck").string());
  write_train_log_csv(result.log, (fs::path(out_dir) / "train_log.csv").string());
  if (!result.log.empty())
    std::printf("steps %zu  final total %.6f  final psnr %.2f\n",
                result.log.size(), result.log.back().loss.total,
                result.log.back().psnr);
  return 0;
}

int cmd_eval(const RunConfig& cfg, const std::string& out_dir, int threads) {
  SceneAssets assets = load_assets(cfg.paths.template_file, cfg.paths.weights,
                                   cfg.paths.canonical, cfg.paths.limits);
  Dataset dataset = load_dataset(cfg.paths.dataset);
  AppearanceModel model = load_appearance(cfg.paths.checkpoint);
  EvalResult res =
      evaluate(model, assets, dataset, cfg.shadow, out_dir, threads);
  for (const EvalRow& r : res.rows)
    std::printf("frame %06d  psnr %.3f  ssim %.4f\n", r.frame_id, r.psnr, r.ssim);
  std::printf("mean  psnr %.3f  ssim %.4f\n", res.mean_psnr, res.mean_ssim);
  return 0;
}

int cmd_shadow_debug(const std::string& depth_path, const std::string& out_path,
                     double radius, int samples, const ShadowParams& params,
                     uint64_t seed, double background, int threads) {
  Image depth = load_pfm(depth_path);
  if (background <= 0) {
    background = 0.0;
    for (double d : depth.data) background = std::max(background, d);
  }
  ShadowKernel kernel =
      build_kernel(radius > 0 ? radius : 0.03 * depth.height, samples, seed);
  Image mask = shadow_mask(depth, kernel, params, background, threads);
  save_png(mask, out_path);
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"joint-driven gaussian hand avatar toolkit"};
  app.require_subcommand(1);
  app.fallthrough();  // parent options may follow the subcommand

  std::string config_path;
  app.add_option("--config", config_path, "JSON config file");

  // pose
  auto* pose = app.add_subcommand("pose", "apply the canonical->target transform");
  std::string pose_canonical, pose_target, pose_out;
  pose->add_option("canonical", pose_canonical)->required();
  pose->add_option("target", pose_target)->required();
  pose->add_option("out", pose_out)->required();

  // render
  auto* render_cmd = app.add_subcommand("render", "render one posed frame");
  std::string r_template, r_weights, r_canonical, r_limits, r_skeleton,
      r_camera, r_checkpoint, r_out = "render_out";
  std::string r_shadow = "on";
  uint64_t r_seed = 0;
  int r_threads = 0;
  bool r_aniso = false;
  render_cmd->add_option("--template", r_template, "template .jgtp");
  render_cmd->add_option("--weights", r_weights, "weight field .jgwf");
  render_cmd->add_option("--canonical", r_canonical, "canonical skeleton JSON");
  render_cmd->add_option("--limits", r_limits, "angle limits JSON");
  render_cmd->add_option("--skeleton", r_skeleton, "target skeleton JSON");
  render_cmd->add_option("--camera", r_camera, "camera JSON");
  render_cmd->add_option("--checkpoint", r_checkpoint, "appearance checkpoint");
  render_cmd->add_option("--out", r_out, "output directory");
  render_cmd->add_option("--shadow", r_shadow, "on|off")
      ->check(CLI::IsMember({"on", "off"}));
  render_cmd->add_option("--seed", r_seed);
  render_cmd->add_option("--threads", r_threads);
  render_cmd->add_flag("--aniso{true},--iso{false}", r_aniso,
                       "gaussian mode for a fresh appearance");

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  std::string s_out = "synth_out";
  int s_views = 8, s_size = 128, s_npb = 150, s_threads = 0;
  uint64_t s_seed = 0;
  synth->add_option("--out", s_out);
  synth->add_option("--views", s_views);
  synth->add_option("--size", s_size);
  synth->add_option("--seed", s_seed);
  synth->add_option("--n-per-bone", s_npb);
  synth->add_option("--threads", s_threads);

  // validate-transform
  auto* validate = app.add_subcommand("validate-transform",
                                      "randomized zero-error check");
  int v_trials = 1000;
  uint64_t v_seed = 0;
  std::string v_limits;
  validate->add_option("--trials", v_trials);
  validate->add_option("--seed", v_seed);
  validate->add_option("--limits", v_limits);

  // train
  auto* train_cmd = app.add_subcommand("train", "fit appearance to a dataset");
  std::string t_dataset, t_template, t_weights, t_canonical, t_limits,
      t_out = "train_out";
  std::string t_shadow = "on";
  int t_epochs = -1, t_max_steps = -1, t_threads = 0, t_width = -1;
  double t_lr = -1;
  uint64_t t_seed = 0;
  bool t_aniso = false;
  train_cmd->add_option("--dataset", t_dataset);
  train_cmd->add_option("--template", t_template);
  train_cmd->add_option("--weights", t_weights);
  train_cmd->add_option("--canonical", t_canonical);
  train_cmd->add_option("--limits", t_limits);
  train_cmd->add_option("--out", t_out);
  train_cmd->add_option("--epochs", t_epochs);
  train_cmd->add_option("--max-steps", t_max_steps);
  train_cmd->add_option("--lr", t_lr);
  train_cmd->add_option("--seed", t_seed);
  train_cmd->add_option("--threads", t_threads);
  train_cmd->add_option("--hidden-width", t_width);
  train_cmd->add_option("--shadow", t_shadow)->check(CLI::IsMember({"on", "off"}));
  train_cmd->add_flag("--aniso{true},--iso{false}", t_aniso);

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  std::string e_dataset, e_template, e_weights, e_canonical, e_limits,
      e_checkpoint, e_out;
  int e_threads = 0;
  eval_cmd->add_option("--dataset", e_dataset);
  eval_cmd->add_option("--template", e_template);
  eval_cmd->add_option("--weights", e_weights);
  eval_cmd->add_option("--canonical", e_canonical);
  eval_cmd->add_option("--limits", e_limits);
  eval_cmd->add_option("--checkpoint", e_checkpoint);
  eval_cmd->add_option("--out", e_out, "directory for rendered images");
  eval_cmd->add_option("--threads", e_threads);

  // shadow-debug
  auto* shadow_cmd = app.add_subcommand("shadow-debug",
                                        "shadow mask from a depth image");
  std::string sd_depth, sd_out = "shadow.png";
  double sd_radius = 0, sd_bias = 0.005, sd_soft = 0.002, sd_background = 0;
  int sd_samples = 64, sd_threads = 0;
  uint64_t sd_seed = 0;
  shadow_cmd->add_option("--depth", sd_depth)->required();
  shadow_cmd->add_option("--out", sd_out);
  shadow_cmd->add_option("--radius", sd_radius, "pixels (default 3% of height)");
  shadow_cmd->add_option("--samples", sd_samples);
  shadow_cmd->add_option("--bias", sd_bias);
  shadow_cmd->add_option("--softness", sd_soft);
  shadow_cmd->add_option("--background", sd_background,
                         "background depth (default: image max)");
  shadow_cmd->add_option("--seed", sd_seed);
  shadow_cmd->add_option("--threads", sd_threads);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    RunConfig cfg;
    if (!config_path.empty()) cfg = load_run_config(config_path);

    if (*pose) return cmd_pose(pose_canonical, pose_target, pose_out);

    if (*validate) {
      if (validate->count("--trials") && v_trials < 1)
        throw IoError("--trials must be >= 1");
      return cmd_validate_transform(v_trials, v_seed, v_limits);
    }

    if (*synth) {
      SynthOptions opts;
      opts.n_views = s_views;
      opts.image_size = s_size;
      opts.seed = s_seed;
      opts.n_per_bone = s_npb;
      opts.threads = s_threads;
      generate_synthetic_dataset(s_out, opts);
      std::printf("wrote %d frames to %s\n", s_views, s_out.c_str());
      return 0;
    }

    if (*render_cmd) {
      if (!r_template.empty()) cfg.paths.template_file = r_template;
      if (!r_weights.empty()) cfg.paths.weights = r_weights;
      if (!r_canonical.empty()) cfg.paths.canonical = r_canonical;
      if (!r_limits.empty()) cfg.paths.limits = r_limits;
      if (!r_camera.empty()) cfg.paths.camera = r_camera;
      if (!r_checkpoint.empty()) cfg.paths.checkpoint = r_checkpoint;
      if (render_cmd->count("--seed")) cfg.seed = r_seed;
      if (render_cmd->count("--aniso") || render_cmd->count("--iso"))
        cfg.appearance.isotropic = !r_aniso;
      if (cfg.paths.template_file.empty() || cfg.paths.weights.empty() ||
          r_skeleton.empty() || cfg.paths.camera.empty())
        throw IoError("render requires --template, --weights, --skeleton, --camera");
      return cmd_render(cfg, r_skeleton, r_out, r_shadow == "on", r_threads);
    }

    if (*train_cmd) {
      if (!t_dataset.empty()) cfg.paths.dataset = t_dataset;
      if (!t_template.empty()) cfg.paths.template_file = t_template;
      if (!t_weights.empty()) cfg.paths.weights = t_weights;
      if (!t_canonical.empty()) cfg.paths.canonical = t_canonical;
      if (!t_limits.empty()) cfg.paths.limits = t_limits;
      if (t_epochs >= 0) cfg.train.epochs = t_epochs;
      if (t_max_steps >= 0) cfg.train.max_steps = t_max_steps;
      if (t_lr > 0) cfg.train.lr = t_lr;
      if (train_cmd->count("--seed")) cfg.train.seed = t_seed;
      if (t_width > 0) cfg.appearance.hidden_width = t_width;
      if (train_cmd->count("--threads")) cfg.train.threads = t_threads;
      if (train_cmd->count("--shadow")) cfg.train.shadow.enabled = t_shadow == "on";
      if (train_cmd->count("--aniso") || train_cmd->count("--iso"))
        cfg.appearance.isotropic = !t_aniso;
      if (cfg.paths.dataset.empty() || cfg.paths.template_file.empty() ||
          cfg.paths.weights.empty())
        throw IoError("train requires --dataset, --template, --weights");
      return cmd_train(cfg, t_out);
    }

    if (*eval_cmd) {
      if (!e_dataset.empty()) cfg.paths.dataset = e_dataset;
      if (!e_template.empty()) cfg.paths.template_file = e_template;
      if (!e_weights.empty()) cfg.paths.weights = e_weights;
      if (!e_canonical.empty()) cfg.paths.canonical = e_canonical;
      if (!e_limits.empty()) cfg.paths.limits = e_limits;
      if (!e_checkpoint.empty()) cfg.paths.checkpoint = e_checkpoint;
      if (cfg.paths.dataset.empty() || cfg.paths.template_file.empty() ||
          cfg.paths.weights.empty() || cfg.paths.checkpoint.empty())
        throw IoError("eval requires --dataset, --template, --weights, --checkpoint");
      return cmd_eval(cfg, e_out, e_threads);
    }

    if (*shadow_cmd) {
      ShadowParams params;
      params.bias = sd_bias;
      params.softness = sd_soft;
      return cmd_shadow_debug(sd_depth, sd_out, sd_radius, sd_samples, params,
                              sd_seed, sd_background, sd_threads);
    }
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace handsplat
