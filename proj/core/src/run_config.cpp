#include "handsplat/run_config.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "handsplat/errors.hpp"

namespace handsplat {

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const std::set<std::string>& known,
                    const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    if (!known.count(key))
      throw IoError("unknown config key \"" + key + "\" in " + where);
  }
}

void check_exists(const std::string& path, const std::string& key) {
  if (!path.empty() && !std::filesystem::exists(path))
    throw IoError("config path \"" + key + "\" does not exist: " + path);
}

}  // namespace

RunConfig parse_run_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed config JSON: ") + e.what());
  }
  RunConfig cfg;
  reject_unknown(doc,
                 {"paths", "template", "appearance", "loss", "train", "shadow",
                  "seed", "threads", "isotropic"},
                 "config root");

  if (doc.contains("paths")) {
    const json& p = doc["paths"];
    reject_unknown(p,
                   {"template", "weights", "mesh", "canonical", "camera",
                    "dataset", "checkpoint", "limits", "output"},
                   "paths");
    cfg.paths.template_file = p.value("template", "");
    cfg.paths.weights = p.value("weights", "");
    cfg.paths.mesh = p.value("mesh", "");
    cfg.paths.canonical = p.value("canonical", "");
    cfg.paths.camera = p.value("camera", "");
    cfg.paths.dataset = p.value("dataset", "");
    cfg.paths.checkpoint = p.value("checkpoint", "");
    cfg.paths.limits = p.value("limits", "");
    cfg.paths.output = p.value("output", "");
    check_exists(cfg.paths.template_file, "template");
    check_exists(cfg.paths.weights, "weights");
    check_exists(cfg.paths.mesh, "mesh");
    check_exists(cfg.paths.canonical, "canonical");
    check_exists(cfg.paths.camera, "camera");
    check_exists(cfg.paths.dataset, "dataset");
    check_exists(cfg.paths.checkpoint, "checkpoint");
    check_exists(cfg.paths.limits, "limits");
  }

  if (doc.contains("template")) {
    const json& t = doc["template"];
    reject_unknown(t, {"n_per_bone", "field_resolution"}, "template");
    cfg.n_per_bone = t.value("n_per_bone", cfg.n_per_bone);
    if (t.contains("field_resolution")) {
      const json& r = t["field_resolution"];
      if (!r.is_array() || r.size() != 3)
        throw IoError("field_resolution must be [nx, ny, nz]");
      for (int d = 0; d < 3; ++d) cfg.field_resolution[d] = r[d].get<int>();
    }
  }

  if (doc.contains("appearance")) {
    const json& a = doc["appearance"];
    reject_unknown(a,
                   {"triplane_res", "triplane_channels", "angular_res",
                    "angular_channels", "posenc_bands", "hidden_width",
                    "hidden_layers", "max_offset", "init_scale"},
                   "appearance");
    cfg.appearance.triplane_res = a.value("triplane_res", cfg.appearance.triplane_res);
    cfg.appearance.triplane_channels =
        a.value("triplane_channels", cfg.appearance.triplane_channels);
    cfg.appearance.angular_res = a.value("angular_res", cfg.appearance.angular_res);
    cfg.appearance.angular_channels =
        a.value("angular_channels", cfg.appearance.angular_channels);
    cfg.appearance.posenc_bands = a.value("posenc_bands", cfg.appearance.posenc_bands);
    cfg.appearance.hidden_width = a.value("hidden_width", cfg.appearance.hidden_width);
    cfg.appearance.hidden_layers = a.value("hidden_layers", cfg.appearance.hidden_layers);
    cfg.appearance.max_offset = a.value("max_offset", cfg.appearance.max_offset);
    cfg.appearance.init_scale = a.value("init_scale", cfg.appearance.init_scale);
  }

  if (doc.contains("loss")) {
    const json& l = doc["loss"];
    reject_unknown(l, {"rgb", "ssim", "lpips", "mask", "reg", "iso"}, "loss");
    cfg.loss.rgb = l.value("rgb", cfg.loss.rgb);
    cfg.loss.ssim = l.value("ssim", cfg.loss.ssim);
    cfg.loss.lpips = l.value("lpips", cfg.loss.lpips);
    cfg.loss.mask = l.value("mask", cfg.loss.mask);
    cfg.loss.reg = l.value("reg", cfg.loss.reg);
    cfg.loss.iso = l.value("iso", cfg.loss.iso);
  }

  if (doc.contains("train")) {
    const json& t = doc["train"];
    reject_unknown(t,
                   {"epochs", "max_steps", "lr", "beta1", "beta2", "eps",
                    "shadow_gradients"},
                   "train");
    cfg.train.epochs = t.value("epochs", cfg.train.epochs);
    cfg.train.max_steps = t.value("max_steps", cfg.train.max_steps);
    cfg.train.lr = t.value("lr", cfg.train.lr);
    cfg.train.beta1 = t.value("beta1", cfg.train.beta1);
    cfg.train.beta2 = t.value("beta2", cfg.train.beta2);
    cfg.train.eps = t.value("eps", cfg.train.eps);
    cfg.shadow.gradients = t.value("shadow_gradients", cfg.shadow.gradients);
  }

  if (doc.contains("shadow")) {
    const json& s = doc["shadow"];
    reject_unknown(s,
                   {"enabled", "samples", "radius_frac", "bias", "softness",
                    "strength", "seed"},
                   "shadow");
    cfg.shadow.enabled = s.value("enabled", cfg.shadow.enabled);
    cfg.shadow.samples = s.value("samples", cfg.shadow.samples);
    cfg.shadow.radius_frac = s.value("radius_frac", cfg.shadow.radius_frac);
    cfg.shadow.params.bias = s.value("bias", cfg.shadow.params.bias);
    cfg.shadow.params.softness = s.value("softness", cfg.shadow.params.softness);
    cfg.shadow.params.strength = s.value("strength", cfg.shadow.params.strength);
    cfg.shadow.seed = s.value("seed", cfg.shadow.seed);
  }

  cfg.seed = doc.value("seed", cfg.seed);
  cfg.threads = doc.value("threads", cfg.threads);
  cfg.isotropic = doc.value("isotropic", cfg.isotropic);
  cfg.appearance.isotropic = cfg.isotropic;
  cfg.train.seed = cfg.seed;
  cfg.train.weights = cfg.loss;
  cfg.train.shadow = cfg.shadow;
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

}  // namespace handsplat
