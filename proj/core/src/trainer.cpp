#include "handsplat/trainer.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>

#include "handsplat/errors.hpp"
#include "handsplat/image_io.hpp"
#include "handsplat/metrics.hpp"

namespace handsplat {

GaussianSet make_gaussian_set(const AppearanceModel& model,
                              const Points3& positions,
                              const AppearanceForward& app) {
  GaussianSet g;
  g.positions = positions;
  g.colors = app.colors;
  g.opacities = app.opacities;
  g.scales = model.scales();
  g.isotropic = model.cfg.isotropic;
  return g;
}

PipelineForward forward_frame(const AppearanceModel& model,
                              const SceneAssets& assets, const MatX& posenc,
                              const HandSkeleton& target, const Camera& camera,
                              const ShadowSettings& shadow, RenderMode mode,
                              int threads) {
  PipelineForward f;
  f.transform = compute_transform(assets.canonical, target);
  f.pose = extract_pose(target);
  f.app = decode_all(model, assets.tpl, posenc, f.pose, assets.limits);
  f.lbs = pose_gaussians(assets.tpl, assets.field, f.transform,
                         f.app.dx_identity, f.app.dx_nonrigid, threads);
  f.gaussians = make_gaussian_set(model, f.lbs.posed, f.app);
  f.render_out = render(f.gaussians, camera, mode, threads);
  if (shadow.enabled) {
    ShadowKernel kernel = build_kernel(
        std::max(1.0, shadow.radius_frac * camera.height), shadow.samples,
        shadow.seed);
    f.shadow_img = shadow_mask(f.render_out.depth, kernel, shadow.params,
                               f.render_out.background_depth, threads);
    f.final_rgb =
        composite_shadow(f.render_out.rgb, f.shadow_img, shadow.params.strength);
  } else {
    f.final_rgb = f.render_out.rgb;
  }
  return f;
}

LossBreakdown backward_frame(const AppearanceModel& model,
                             const SceneAssets& assets, const MatX& posenc,
                             const FrameRecord& frame,
                             const PipelineForward& fwd,
                             const TrainConfig& cfg, AppearanceGrads* grads) {
  (void)posenc;
  LossGrads loss_grads;
  LossBreakdown loss = compute_loss(
      fwd.final_rgb, fwd.render_out.alpha, frame.image, frame.mask,
      fwd.app.dx_identity, fwd.app.dx_nonrigid, fwd.gaussians.scales,
      model.cfg.isotropic, cfg.weights, cfg.lpips_hook, &loss_grads);

  Image d_render_rgb;
  Image d_depth(frame.camera.width, frame.camera.height, 1);
  if (cfg.shadow.enabled) {
    CompositeGrads cg = composite_shadow_backward(
        fwd.render_out.rgb, fwd.shadow_img, cfg.shadow.params.strength,
        loss_grads.d_rgb);
    d_render_rgb = std::move(cg.d_rgb);
    if (cfg.shadow.gradients) {
      ShadowKernel kernel = build_kernel(
          std::max(1.0, cfg.shadow.radius_frac * frame.camera.height),
          cfg.shadow.samples, cfg.shadow.seed);
      d_depth = shadow_mask_backward(fwd.render_out.depth, kernel,
                                     cfg.shadow.params,
                                     fwd.render_out.background_depth,
                                     cg.d_mask, cfg.threads);
    }
  } else {
    d_render_rgb = std::move(loss_grads.d_rgb);
  }

  RenderGrads rg =
      render_backward(fwd.gaussians, frame.camera, fwd.render_out, d_render_rgb,
                      d_depth, loss_grads.d_alpha, cfg.threads);

  LbsGrads lg = lbs_backward(fwd.lbs, assets.field, fwd.transform,
                             rg.d_positions, cfg.threads);

  Points3 d_dx_identity = lg.d_identity + loss_grads.d_dx_identity;
  Points3 d_dx_nonrigid = lg.d_nonrigid + loss_grads.d_dx_nonrigid;
  appearance_backward(model, assets.tpl, fwd.app, d_dx_identity, rg.d_colors,
                      rg.d_opacities, d_dx_nonrigid, grads);
  MatX d_scales = rg.d_scales + loss_grads.d_scales;
  scale_backward(model, d_scales, grads);
  return loss;
}

namespace {

struct Adam {
  double lr, b1, b2, eps;
  long t = 0;
  std::vector<VecX> m, v;

  void step(const std::vector<TensorView>& params,
            const std::vector<TensorView>& grads) {
    if (m.empty()) {
      for (const TensorView& p : params) {
        m.emplace_back(VecX::Zero(static_cast<long>(p.size)));
        v.emplace_back(VecX::Zero(static_cast<long>(p.size)));
      }
    }
    ++t;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(t));
    for (size_t k = 0; k < params.size(); ++k) {
      double* p = params[k].data;
      const double* g = grads[k].data;
      VecX& mk = m[k];
      VecX& vk = v[k];
      for (size_t i = 0; i < params[k].size; ++i) {
        mk[i] = b1 * mk[i] + (1.0 - b1) * g[i];
        vk[i] = b2 * vk[i] + (1.0 - b2) * g[i] * g[i];
        p[i] -= lr * (mk[i] / bc1) / (std::sqrt(vk[i] / bc2) + eps);
      }
    }
  }
};

bool is_degenerate_error(const Error& e) {
  return dynamic_cast<const DegenerateSkeletonError*>(&e) ||
         dynamic_cast<const DegeneratePalmError*>(&e) ||
         dynamic_cast<const GimbalDegenerateError*>(&e);
}

}  // namespace

TrainResult train(const Dataset& dataset, const SceneAssets& assets,
                  const AppearanceConfig& appearance_cfg,
                  const TrainConfig& cfg) {
  if (dataset.frames.empty()) throw DomainError("training needs a non-empty dataset");
  if (cfg.epochs < 1) throw DomainError("epochs must be >= 1");
  if (cfg.lr <= 0) throw DomainError("learning rate must be positive");

  TrainResult result;
  result.model =
      AppearanceModel::create(appearance_cfg, assets.tpl.size(), cfg.seed);
  MatX posenc = encode_template_uvd(assets.tpl, appearance_cfg.posenc_bands);

  Adam adam{cfg.lr, cfg.beta1, cfg.beta2, cfg.eps};
  std::mt19937_64 shuffle_rng(cfg.seed ^ 0xc2b2ae3d27d4eb4fULL);
  std::vector<size_t> order(dataset.frames.size());
  std::iota(order.begin(), order.end(), 0);

  const long total_steps =
      cfg.max_steps > 0
          ? cfg.max_steps
          : static_cast<long>(cfg.epochs) * static_cast<long>(order.size());
  long step = 0;
  for (int epoch = 0; step < total_steps; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    for (size_t idx : order) {
      if (step >= total_steps) break;
      const FrameRecord& frame = dataset.frames[idx];
      PipelineForward fwd;
      try {
        fwd = forward_frame(result.model, assets, posenc, frame.skeleton,
                            frame.camera, cfg.shadow, RenderMode::Train,
                            cfg.threads);
      } catch (const Error& e) {
        if (is_degenerate_error(e)) {
          std::cerr << "warning: skipping frame " << frame.id << ": " << e.what()
                    << "\n";
          ++result.skipped_frames;
          continue;
        }
        throw;
      }
      AppearanceGrads grads = AppearanceGrads::zeros_like(result.model);
      LossBreakdown loss =
          backward_frame(result.model, assets, posenc, frame, fwd, cfg, &grads);

      auto params = parameter_views(result.model);
      auto gviews = gradient_views(grads);
      adam.step(params, gviews);

      TrainLogRow row;
      row.step = static_cast<int>(step);
      row.epoch = epoch;
      row.frame_id = frame.id;
      row.loss = loss;
      row.psnr = psnr(fwd.final_rgb, frame.image);
      result.log.push_back(row);
      ++step;
    }
    if (order.empty()) break;
  }
  return result;
}

void write_train_log_csv(const std::vector<TrainLogRow>& log,
                         const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write training log: " + path);
  out << "step,epoch,frame,l1,ssim,lpips,mask,reg,iso,total,psnr\n";
  char buf[256];
  for (const TrainLogRow& r : log) {
    std::snprintf(buf, sizeof buf,
                  "%d,%d,%d,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n", r.step,
                  r.epoch, r.frame_id, r.loss.l1, r.loss.ssim, r.loss.lpips,
                  r.loss.mask, r.loss.reg, r.loss.iso, r.loss.total, r.psnr);
    out << buf;
  }
}

EvalResult evaluate(const AppearanceModel& model, const SceneAssets& assets,
                    const Dataset& dataset, const ShadowSettings& shadow,
                    const std::string& out_dir, int threads) {
  if (dataset.frames.empty()) throw DomainError("evaluation needs a non-empty dataset");
  if (model.num_gaussians() != assets.tpl.size())
    throw VersionError("checkpoint gaussian count does not match the template");
  MatX posenc = encode_template_uvd(assets.tpl, model.cfg.posenc_bands);
  if (!out_dir.empty()) std::filesystem::create_directories(out_dir);

  EvalResult res;
  for (const FrameRecord& frame : dataset.frames) {
    PipelineForward fwd =
        forward_frame(model, assets, posenc, frame.skeleton, frame.camera,
                      shadow, RenderMode::Eval, threads);
    EvalRow row;
    row.frame_id = frame.id;
    ImageMetrics m = image_metrics(fwd.final_rgb, frame.image);
    row.psnr = m.psnr;
    row.ssim = m.ssim;
    res.rows.push_back(row);
    res.mean_psnr += m.psnr;
    res.mean_ssim += m.ssim;
    if (!out_dir.empty()) {
      char name[32];
      std::snprintf(name, sizeof name, "%06d_rgb.png", frame.id);
      save_png(fwd.final_rgb,
               (std::filesystem::path(out_dir) / name).string());
    }
  }
  res.mean_psnr /= res.rows.size();
  res.mean_ssim /= res.rows.size();
  return res;
}

}  // namespace handsplat
