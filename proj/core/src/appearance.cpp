#include "handsplat/appearance.hpp"

#include <cmath>

#include "handsplat/checkpoint.hpp"
#include "handsplat/errors.hpp"

namespace handsplat {

namespace {

void init_grid(Grid2D* g, int res, int channels, double std,
               std::mt19937_64& rng) {
  g->init(res, channels);
  std::normal_distribution<double> gauss(0.0, std);
  for (long i = 0; i < g->data.size(); ++i) g->data[i] = gauss(rng);
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

AppearanceModel AppearanceModel::create(const AppearanceConfig& cfg,
                                        int num_gaussians, uint64_t seed) {
  AppearanceModel m;
  m.cfg = cfg;
  std::mt19937_64 rng(seed ^ 0x5f3759df9e3779b9ULL);
  init_grid(&m.triplane.uv, cfg.triplane_res, cfg.triplane_channels,
            cfg.grid_init_std, rng);
  init_grid(&m.triplane.vd, cfg.triplane_res, cfg.triplane_channels,
            cfg.grid_init_std, rng);
  init_grid(&m.triplane.ud, cfg.triplane_res, cfg.triplane_channels,
            cfg.grid_init_std, rng);
  m.planes.planes.assign(kNumBones, {});
  for (auto& p : m.planes.planes)
    init_grid(&p, cfg.angular_res, cfg.angular_channels, cfg.grid_init_std, rng);
  m.identity_mlp = Mlp::create(3 * cfg.triplane_channels, cfg.hidden_width, 7,
                               cfg.hidden_layers, rng);
  m.nonrigid_mlp = Mlp::create(6 * cfg.posenc_bands + cfg.angular_channels,
                               cfg.hidden_width, 3, cfg.hidden_layers, rng);
  int comps = cfg.isotropic ? 1 : 3;
  m.log_scales =
      VecX::Constant(static_cast<long>(num_gaussians) * comps,
                     std::log(cfg.init_scale));
  return m;
}

MatX AppearanceModel::scales() const {
  int comps = scale_components();
  int g = num_gaussians();
  MatX s(g, comps);
  for (int i = 0; i < g; ++i)
    for (int c = 0; c < comps; ++c)
      s(i, c) = std::exp(log_scales[static_cast<long>(i) * comps + c]);
  return s;
}

MatX encode_template_uvd(const CanonicalTemplate& tpl, int bands) {
  MatX out(tpl.size(), 6 * bands);
  for (int i = 0; i < tpl.size(); ++i)
    out.row(i) = positional_encode(tpl.uvd.row(i).transpose(), bands).transpose();
  return out;
}

AppearanceForward decode_all(const AppearanceModel& model,
                             const CanonicalTemplate& tpl, const MatX& posenc,
                             const PoseAngles& pose, const AngleLimits& limits) {
  const int g = tpl.size();
  if (posenc.rows() != g || posenc.cols() != 6 * model.cfg.posenc_bands)
    throw DomainError("positional encoding shape mismatch");

  AppearanceForward f;
  f.angles = normalize_angles(pose, limits);
  f.bone_features = angular_features(f.angles, model.planes);

  MatX id_in(g, model.triplane.feature_size());
  for (int i = 0; i < g; ++i)
    id_in.row(i) = model.triplane.query(tpl.uvd.row(i).transpose()).transpose();
  f.id_fwd = model.identity_mlp.forward(id_in);

  const int ca = model.cfg.angular_channels;
  MatX nr_in(g, posenc.cols() + ca);
  nr_in.leftCols(posenc.cols()) = posenc;
  for (int i = 0; i < g; ++i)
    nr_in.row(i).tail(ca) = f.bone_features.row(tpl.bone_label[i] - 1);
  f.nr_fwd = model.nonrigid_mlp.forward(nr_in);

  const double mo = model.cfg.max_offset;
  f.dx_identity.resize(g, 3);
  f.colors.resize(g, 3);
  f.opacities.resize(g);
  f.dx_nonrigid.resize(g, 3);
  for (int i = 0; i < g; ++i) {
    for (int c = 0; c < 3; ++c) {
      f.dx_identity(i, c) = mo * std::tanh(f.id_fwd.out(i, c));
      f.colors(i, c) = sigmoid(f.id_fwd.out(i, 3 + c));
      f.dx_nonrigid(i, c) = mo * std::tanh(f.nr_fwd.out(i, c));
    }
    f.opacities[i] = sigmoid(f.id_fwd.out(i, 6));
  }
  return f;
}

AppearanceGrads AppearanceGrads::zeros_like(const AppearanceModel& model) {
  AppearanceGrads g;
  g.triplane.init(model.cfg.triplane_res, model.cfg.triplane_channels);
  g.planes.init(model.cfg.angular_res, model.cfg.angular_channels);
  g.identity_mlp = model.identity_mlp.zero_grads();
  g.nonrigid_mlp = model.nonrigid_mlp.zero_grads();
  g.log_scales = VecX::Zero(model.log_scales.size());
  return g;
}

void appearance_backward(const AppearanceModel& model,
                         const CanonicalTemplate& tpl,
                         const AppearanceForward& fwd,
                         const Points3& d_dx_identity, const Points3& d_colors,
                         const VecX& d_opacities,
                         const Points3& d_dx_nonrigid, AppearanceGrads* grads) {
  const int g = tpl.size();
  const double mo = model.cfg.max_offset;

  // Through the output activations.
  MatX d_id_raw = MatX::Zero(g, 7);
  MatX d_nr_raw = MatX::Zero(g, 3);
  for (int i = 0; i < g; ++i) {
    for (int c = 0; c < 3; ++c) {
      double t_id = fwd.dx_identity(i, c) / mo;
      d_id_raw(i, c) = d_dx_identity(i, c) * mo * (1.0 - t_id * t_id);
      double s = fwd.colors(i, c);
      d_id_raw(i, 3 + c) = d_colors(i, c) * s * (1.0 - s);
      double t_nr = fwd.dx_nonrigid(i, c) / mo;
      d_nr_raw(i, c) = d_dx_nonrigid(i, c) * mo * (1.0 - t_nr * t_nr);
    }
    double o = fwd.opacities[i];
    d_id_raw(i, 6) = d_opacities[i] * o * (1.0 - o);
  }

  Mlp::Grads id_g = model.identity_mlp.backward(fwd.id_fwd, d_id_raw);
  Mlp::Grads nr_g = model.nonrigid_mlp.backward(fwd.nr_fwd, d_nr_raw);

  for (int i = 0; i < g; ++i)
    grads->triplane.scatter(tpl.uvd.row(i).transpose(),
                            id_g.dX.row(i).transpose());

  const int ca = model.cfg.angular_channels;
  MatX d_bone = MatX::Zero(kNumBones, ca);
  for (int i = 0; i < g; ++i)
    d_bone.row(tpl.bone_label[i] - 1) += nr_g.dX.row(i).tail(ca);
  angular_features_backward(fwd.angles, d_bone, &grads->planes);

  Mlp::add_grads(&grads->identity_mlp, id_g);
  Mlp::add_grads(&grads->nonrigid_mlp, nr_g);
}

void scale_backward(const AppearanceModel& model, const MatX& d_scales,
                    AppearanceGrads* grads) {
  const int comps = model.scale_components();
  const int g = model.num_gaussians();
  for (int i = 0; i < g; ++i)
    for (int c = 0; c < comps; ++c) {
      long k = static_cast<long>(i) * comps + c;
      grads->log_scales[k] += d_scales(i, c) * std::exp(model.log_scales[k]);
    }
}

IdentityDecode decode_identity(const FeatureTriplane& triplane, const Mlp& mlp,
                               const Vec3& uvd, double max_offset) {
  MatX in = triplane.query(uvd).transpose();
  MatX out = mlp.forward(in).out;
  IdentityDecode d;
  for (int c = 0; c < 3; ++c) {
    d.offset[c] = max_offset * std::tanh(out(0, c));
    d.color[c] = sigmoid(out(0, 3 + c));
  }
  d.opacity = sigmoid(out(0, 6));
  return d;
}

Vec3 decode_nonrigid(const VecX& uvd_encoding, const VecX& bone_feature,
                     const Mlp& mlp, double max_offset) {
  MatX in(1, uvd_encoding.size() + bone_feature.size());
  in.row(0).head(uvd_encoding.size()) = uvd_encoding.transpose();
  in.row(0).tail(bone_feature.size()) = bone_feature.transpose();
  MatX out = mlp.forward(in).out;
  return max_offset * out.row(0).array().tanh().matrix().transpose();
}

std::vector<TensorView> parameter_views(AppearanceModel& m) {
  std::vector<TensorView> v;
  v.push_back({"triplane_uv", m.triplane.uv.data.data(),
               static_cast<size_t>(m.triplane.uv.data.size())});
  v.push_back({"triplane_vd", m.triplane.vd.data.data(),
               static_cast<size_t>(m.triplane.vd.data.size())});
  v.push_back({"triplane_ud", m.triplane.ud.data.data(),
               static_cast<size_t>(m.triplane.ud.data.size())});
  for (int b = 0; b < kNumBones; ++b) {
    char name[32];
    std::snprintf(name, sizeof name, "angular_plane_%02d", b);
    v.push_back({name, m.planes.planes[b].data.data(),
                 static_cast<size_t>(m.planes.planes[b].data.size())});
  }
  auto add_mlp = [&v](const char* prefix, Mlp& mlp) {
    for (size_t l = 0; l < mlp.W.size(); ++l) {
      v.push_back({std::string(prefix) + "_w" + std::to_string(l),
                   mlp.W[l].data(), static_cast<size_t>(mlp.W[l].size())});
      v.push_back({std::string(prefix) + "_b" + std::to_string(l),
                   mlp.b[l].data(), static_cast<size_t>(mlp.b[l].size())});
    }
  };
  add_mlp("identity", m.identity_mlp);
  add_mlp("nonrigid", m.nonrigid_mlp);
  v.push_back({"log_scales", m.log_scales.data(),
               static_cast<size_t>(m.log_scales.size())});
  return v;
}

std::vector<TensorView> gradient_views(AppearanceGrads& g) {
  std::vector<TensorView> v;
  v.push_back({"triplane_uv", g.triplane.uv.data.data(),
               static_cast<size_t>(g.triplane.uv.data.size())});
  v.push_back({"triplane_vd", g.triplane.vd.data.data(),
               static_cast<size_t>(g.triplane.vd.data.size())});
  v.push_back({"triplane_ud", g.triplane.ud.data.data(),
               static_cast<size_t>(g.triplane.ud.data.size())});
  for (int b = 0; b < kNumBones; ++b) {
    char name[32];
    std::snprintf(name, sizeof name, "angular_plane_%02d", b);
    v.push_back({name, g.planes.planes[b].data.data(),
                 static_cast<size_t>(g.planes.planes[b].data.size())});
  }
  auto add_mlp = [&v](const char* prefix, Mlp::Grads& mg) {
    for (size_t l = 0; l < mg.dW.size(); ++l) {
      v.push_back({std::string(prefix) + "_w" + std::to_string(l),
                   mg.dW[l].data(), static_cast<size_t>(mg.dW[l].size())});
      v.push_back({std::string(prefix) + "_b" + std::to_string(l),
                   mg.db[l].data(), static_cast<size_t>(mg.db[l].size())});
    }
  };
  add_mlp("identity", g.identity_mlp);
  add_mlp("nonrigid", g.nonrigid_mlp);
  v.push_back({"log_scales", g.log_scales.data(),
               static_cast<size_t>(g.log_scales.size())});
  return v;
}

void save_appearance(const AppearanceModel& model, const std::string& path) {
  AppearanceModel copy = model;
  std::vector<NamedTensor> tensors;
  NamedTensor cfg;
  cfg.name = "config";
  cfg.shape = {12};
  const AppearanceConfig& c = model.cfg;
  cfg.data = {static_cast<float>(c.triplane_res),
              static_cast<float>(c.triplane_channels),
              static_cast<float>(c.angular_res),
              static_cast<float>(c.angular_channels),
              static_cast<float>(c.posenc_bands),
              static_cast<float>(c.hidden_width),
              static_cast<float>(c.hidden_layers),
              static_cast<float>(c.max_offset),
              static_cast<float>(c.init_scale),
              static_cast<float>(c.grid_init_std),
              c.isotropic ? 1.0f : 0.0f,
              static_cast<float>(model.num_gaussians())};
  tensors.push_back(std::move(cfg));
  for (const TensorView& view : parameter_views(copy)) {
    NamedTensor t;
    t.name = view.name;
    t.shape = {static_cast<uint32_t>(view.size)};
    t.data.resize(view.size);
    for (size_t i = 0; i < view.size; ++i)
      t.data[i] = static_cast<float>(view.data[i]);
    tensors.push_back(std::move(t));
  }
  save_checkpoint(tensors, path);
}

AppearanceModel load_appearance(const std::string& path) {
  std::vector<NamedTensor> tensors = load_checkpoint(path);
  const NamedTensor& cfg_t = find_tensor(tensors, "config");
  if (cfg_t.data.size() != 12)
    throw VersionError("unexpected config tensor size in checkpoint");
  AppearanceConfig cfg;
  cfg.triplane_res = static_cast<int>(cfg_t.data[0]);
  cfg.triplane_channels = static_cast<int>(cfg_t.data[1]);
  cfg.angular_res = static_cast<int>(cfg_t.data[2]);
  cfg.angular_channels = static_cast<int>(cfg_t.data[3]);
  cfg.posenc_bands = static_cast<int>(cfg_t.data[4]);
  cfg.hidden_width = static_cast<int>(cfg_t.data[5]);
  cfg.hidden_layers = static_cast<int>(cfg_t.data[6]);
  cfg.max_offset = cfg_t.data[7];
  cfg.init_scale = cfg_t.data[8];
  cfg.grid_init_std = cfg_t.data[9];
  cfg.isotropic = cfg_t.data[10] != 0.0f;
  int g = static_cast<int>(cfg_t.data[11]);

  AppearanceModel model = AppearanceModel::create(cfg, g, 0);
  for (const TensorView& view : parameter_views(model)) {
    const NamedTensor& t = find_tensor(tensors, view.name);
    if (t.data.size() != view.size)
      throw VersionError("checkpoint tensor " + view.name +
                         " has unexpected size");
    for (size_t i = 0; i < view.size; ++i) view.data[i] = t.data[i];
  }
  return model;
}

}  // namespace handsplat
