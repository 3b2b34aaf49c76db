#include "handsplat/dataset.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "handsplat/errors.hpp"
#include "handsplat/image_io.hpp"

namespace handsplat {

namespace fs = std::filesystem;
using nlohmann::json;

std::string frame_path(const std::string& dir, const char* kind, int id,
                       const char* ext) {
  char name[32];
  std::snprintf(name, sizeof name, "%06d.%s", id, ext);
  return (fs::path(dir) / kind / name).string();
}

Dataset load_dataset(const std::string& dir) {
  fs::path manifest = fs::path(dir) / "manifest.json";
  std::ifstream in(manifest);
  if (!in) throw IoError("cannot open dataset manifest: " + manifest.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed manifest: ") + e.what());
  }
  if (!doc.contains("frames") || !doc["frames"].is_array())
    throw IoError("manifest must list frames");

  Dataset ds;
  ds.root = dir;
  for (const auto& entry : doc["frames"]) {
    FrameRecord f;
    f.id = entry.at("id").get<int>();
    f.split = entry.value("split", "train");
    f.image = load_png(frame_path(dir, "frames", f.id, "png"));
    f.mask = load_png(frame_path(dir, "masks", f.id, "png"));
    f.skeleton = load_skeleton_json(frame_path(dir, "skeletons", f.id, "json"));
    f.camera = load_camera_json(frame_path(dir, "cameras", f.id, "json"));
    if (f.image.width != f.camera.width || f.image.height != f.camera.height)
      throw IoError("frame " + std::to_string(f.id) +
                    " image size disagrees with its camera");
    if (f.mask.width != f.camera.width || f.mask.height != f.camera.height)
      throw IoError("frame " + std::to_string(f.id) +
                    " mask size disagrees with its camera");
    if (f.mask.channels != 1)
      throw IoError("frame " + std::to_string(f.id) + " mask must be grayscale");
    ds.frames.push_back(std::move(f));
  }
  return ds;
}

void save_frame(const std::string& dir, int id, const Image& image,
                const Image& mask, const HandSkeleton& skeleton,
                const Camera& camera) {
  for (const char* kind : {"frames", "masks", "skeletons", "cameras"})
    fs::create_directories(fs::path(dir) / kind);
  save_png(image, frame_path(dir, "frames", id, "png"));
  save_png(mask, frame_path(dir, "masks", id, "png"));
  save_skeleton_json(skeleton, frame_path(dir, "skeletons", id, "json"));
  save_camera_json(camera, frame_path(dir, "cameras", id, "json"));
}

void save_manifest(const std::string& dir,
                   const std::vector<std::pair<int, std::string>>& entries) {
  json frames = json::array();
  for (const auto& [id, split] : entries)
    frames.push_back({{"id", id}, {"split", split}});
  json doc;
  doc["frames"] = frames;
  std::ofstream out(fs::path(dir) / "manifest.json");
  if (!out) throw IoError("cannot write manifest in " + dir);
  out << doc.dump(2) << "\n";
}

}  // namespace handsplat
