#pragma once

#include <string>

#include "handsplat/decoder.hpp"
#include "handsplat/encoding.hpp"
#include "handsplat/hand_template.hpp"

namespace handsplat {

struct AppearanceConfig {
  int triplane_res = 64;
  int triplane_channels = 16;
  int angular_res = 16;
  int angular_channels = 8;
  int posenc_bands = 6;
  int hidden_width = 128;
  int hidden_layers = 3;
  double max_offset = 0.005;   // offset squash bound (meters)
  double init_scale = 0.0028;  // initial gaussian radius (meters)
  double grid_init_std = 0.01;
  bool isotropic = true;
};

// All trainable state: the identity triplane, per-bone angular planes, the
// two decoders, and per-gaussian log scales.
struct AppearanceModel {
  AppearanceConfig cfg;
  FeatureTriplane triplane;
  AngularPlanes planes;
  Mlp identity_mlp;  // 3C -> (offset 3, color 3, opacity 1)
  Mlp nonrigid_mlp;  // 6L + C_a -> offset 3
  VecX log_scales;   // G (isotropic) or 3G laid out per gaussian

  static AppearanceModel create(const AppearanceConfig& cfg, int num_gaussians,
                                uint64_t seed);

  int num_gaussians() const {
    return static_cast<int>(cfg.isotropic ? log_scales.size()
                                          : log_scales.size() / 3);
  }
  int scale_components() const { return cfg.isotropic ? 1 : 3; }
  // exp(log_scales) as (G x 1) or (G x 3).
  MatX scales() const;
};

// Positional encodings of every template uvd, one row per gaussian.
MatX encode_template_uvd(const CanonicalTemplate& tpl, int bands);

struct AppearanceForward {
  NormalizedAngles angles;
  MatX bone_features;  // 20 x C_a
  Mlp::Forward id_fwd;
  Mlp::Forward nr_fwd;
  Points3 dx_identity;  // bounded offsets (meters)
  Points3 dx_nonrigid;
  Points3 colors;  // rows in [0,1]^3
  VecX opacities;  // in [0,1]
};

// Decodes offsets, colors and opacities for every gaussian of the template.
// `posenc` must come from encode_template_uvd with cfg.posenc_bands.
AppearanceForward decode_all(const AppearanceModel& model,
                             const CanonicalTemplate& tpl, const MatX& posenc,
                             const PoseAngles& pose, const AngleLimits& limits);

struct AppearanceGrads {
  FeatureTriplane triplane;
  AngularPlanes planes;
  Mlp::Grads identity_mlp;
  Mlp::Grads nonrigid_mlp;
  VecX log_scales;

  static AppearanceGrads zeros_like(const AppearanceModel& model);
};

// Accumulates parameter gradients for upstream gradients on the decoded
// quantities. d_scales (G x components) is chained through exp() into
// log_scales by the caller via scale_backward.
void appearance_backward(const AppearanceModel& model,
                         const CanonicalTemplate& tpl,
                         const AppearanceForward& fwd,
                         const Points3& d_dx_identity, const Points3& d_colors,
                         const VecX& d_opacities,
                         const Points3& d_dx_nonrigid, AppearanceGrads* grads);

// d log_scales += d_scales * scales (elementwise chain through exp).
void scale_backward(const AppearanceModel& model, const MatX& d_scales,
                    AppearanceGrads* grads);

// Single-point conveniences mirroring the batched path.
struct IdentityDecode {
  Vec3 offset;
  Vec3 color;
  double opacity;
};
IdentityDecode decode_identity(const FeatureTriplane& triplane, const Mlp& mlp,
                               const Vec3& uvd, double max_offset);
Vec3 decode_nonrigid(const VecX& uvd_encoding, const VecX& bone_feature,
                     const Mlp& mlp, double max_offset);

// Checkpoint I/O ("JGCK" container).
void save_appearance(const AppearanceModel& model, const std::string& path);
AppearanceModel load_appearance(const std::string& path);

// Deterministic flat views over all trainable tensors; the same order is
// used by the optimizer and the checkpoint writer.
struct TensorView {
  std::string name;
  double* data;
  size_t size;
};
std::vector<TensorView> parameter_views(AppearanceModel& model);
std::vector<TensorView> gradient_views(AppearanceGrads& grads);

}  // namespace handsplat
