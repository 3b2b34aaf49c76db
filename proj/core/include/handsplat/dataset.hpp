#pragma once

#include <string>
#include <vector>

#include "handsplat/camera.hpp"
#include "handsplat/skeleton.hpp"
#include "handsplat/types.hpp"

namespace handsplat {

struct FrameRecord {
  int id = 0;
  std::string split = "train";
  Image image;  // RGB in [0,1]
  Image mask;   // single channel {0,1}
  HandSkeleton skeleton;
  Camera camera;
};

struct Dataset {
  std::string root;
  std::vector<FrameRecord> frames;
};

// Directory layout: frames/%06d.png, masks/%06d.png, skeletons/%06d.json,
// cameras/%06d.json and manifest.json listing {"id", "split"} per frame.
Dataset load_dataset(const std::string& dir);

// Writers used by the synthetic generator; create the directory layout.
void save_frame(const std::string& dir, int id, const Image& image,
                const Image& mask, const HandSkeleton& skeleton,
                const Camera& camera);
void save_manifest(const std::string& dir,
                   const std::vector<std::pair<int, std::string>>& entries);

std::string frame_path(const std::string& dir, const char* kind, int id,
                       const char* ext);

}  // namespace handsplat
