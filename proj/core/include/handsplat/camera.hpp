#pragma once

#include <string>

#include "handsplat/types.hpp"

namespace handsplat {

// Pinhole camera; world_to_camera maps world points into a +z-forward
// camera frame.
struct Camera {
  double fx = 0, fy = 0, cx = 0, cy = 0;
  int width = 0, height = 0;
  Mat4 world_to_camera = Mat4::Identity();

  Mat3 rotation() const { return world_to_camera.block<3, 3>(0, 0); }
  Vec3 translation() const { return world_to_camera.block<3, 1>(0, 3); }
  Vec3 to_camera(const Vec3& p) const { return rotation() * p + translation(); }
};

void validate_camera(const Camera& c);

// JSON: {"fx","fy","cx","cy","width","height","world_to_camera":[16 row-major]}
Camera load_camera_json(const std::string& path);
void save_camera_json(const Camera& c, const std::string& path);
Camera parse_camera_json(const std::string& text);
std::string camera_to_json(const Camera& c);

// Camera at `eye` looking at `target` with the given up hint.
Camera look_at_camera(const Vec3& eye, const Vec3& target, const Vec3& up,
                      double fx, int width, int height);

}  // namespace handsplat
