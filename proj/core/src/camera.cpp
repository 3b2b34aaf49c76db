#include "handsplat/camera.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "handsplat/errors.hpp"

namespace handsplat {

using nlohmann::json;

void validate_camera(const Camera& c) {
  if (c.fx <= 0 || c.fy <= 0) throw DomainError("camera focal lengths must be positive");
  if (c.width < 1 || c.height < 1) throw DomainError("camera image size must be positive");
  Mat3 r = c.rotation();
  if ((r * r.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-6)
    throw DomainError("world_to_camera rotation block is not orthonormal");
}

Camera parse_camera_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed camera JSON: ") + e.what());
  }
  Camera c;
  try {
    c.fx = doc.at("fx").get<double>();
    c.fy = doc.at("fy").get<double>();
    c.cx = doc.at("cx").get<double>();
    c.cy = doc.at("cy").get<double>();
    c.width = doc.at("width").get<int>();
    c.height = doc.at("height").get<int>();
    const auto& m = doc.at("world_to_camera");
    if (!m.is_array() || m.size() != 16)
      throw IoError("world_to_camera must hold 16 row-major values");
    for (int r = 0; r < 4; ++r)
      for (int col = 0; col < 4; ++col)
        c.world_to_camera(r, col) = m[4 * r + col].get<double>();
  } catch (const json::exception& e) {
    throw IoError(std::string("camera JSON missing field: ") + e.what());
  }
  validate_camera(c);
  return c;
}

std::string camera_to_json(const Camera& c) {
  json doc;
  doc["fx"] = c.fx;
  doc["fy"] = c.fy;
  doc["cx"] = c.cx;
  doc["cy"] = c.cy;
  doc["width"] = c.width;
  doc["height"] = c.height;
  json m = json::array();
  for (int r = 0; r < 4; ++r)
    for (int col = 0; col < 4; ++col) m.push_back(c.world_to_camera(r, col));
  doc["world_to_camera"] = m;
  return doc.dump(2);
}

Camera load_camera_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open camera file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_camera_json(ss.str());
}

void save_camera_json(const Camera& c, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write camera file: " + path);
  out << camera_to_json(c) << "\n";
}

Camera look_at_camera(const Vec3& eye, const Vec3& target, const Vec3& up,
                      double fx, int width, int height) {
  Vec3 fwd = (target - eye).normalized();
  Vec3 right = fwd.cross(up).normalized();
  Vec3 down = fwd.cross(right);
  Mat3 r;
  r.row(0) = right.transpose();
  r.row(1) = down.transpose();
  r.row(2) = fwd.transpose();
  Camera c;
  c.fx = fx;
  c.fy = fx;
  c.cx = 0.5 * width;
  c.cy = 0.5 * height;
  c.width = width;
  c.height = height;
  c.world_to_camera = Mat4::Identity();
  c.world_to_camera.block<3, 3>(0, 0) = r;
  c.world_to_camera.block<3, 1>(0, 3) = -r * eye;
  validate_camera(c);
  return c;
}

}  // namespace handsplat
