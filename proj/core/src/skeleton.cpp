#include "handsplat/skeleton.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "handsplat/errors.hpp"

namespace handsplat {

using nlohmann::json;

void validate_skeleton(const HandSkeleton& s) {
  for (int i = 0; i < kNumJoints; ++i) {
    if (!s.joints[i].allFinite())
      throw DegenerateSkeletonError("skeleton joint " + std::to_string(i) +
                                    " has non-finite coordinates");
  }
  for (int i = 1; i < kNumJoints; ++i) {
    double len = (s.joints[i] - s.joints[joint_parent(i)]).norm();
    if (len <= 1e-9)
      throw DegenerateSkeletonError("bone " + std::to_string(i) +
                                    " has zero length");
  }
}

BoneVectors bone_vectors(const HandSkeleton& s) {
  validate_skeleton(s);
  BoneVectors bv;
  bv.bones[0].setZero();
  bv.lengths[0] = 0.0;
  for (int i = 1; i < kNumJoints; ++i) {
    bv.bones[i] = s.joints[i] - s.joints[joint_parent(i)];
    bv.lengths[i] = bv.bones[i].norm();
  }
  return bv;
}

const HandSkeleton& canonical_skeleton() {
  static const HandSkeleton s = [] {
    HandSkeleton c;
    const double j[kNumJoints][3] = {
        {0, 0, 0},
        {0.029999999999999999, 0.028000000000000004, 0.0079999999999999984},
        {0.024000000000000007, 0.087999999999999995, 0.0030000000000000001},
        {0.0030000000000000001, 0.091999999999999998, 7.9257663296155849e-20},
        {-0.016999999999999998, 0.086999999999999994, -0.0019999999999999992},
        {-0.03599999999999999, 0.076999999999999999, -0.0059999999999999975},
        {0.056760040342804935, 0.05965115382237518, 0.014790044371268692},
        {0.030987524166424071, 0.12940693099546483, 0.0038003571455626837},
        {-7.5007799013042994e-05, 0.1378947914718302, -0.00046091516923253754},
        {-0.028756283080564944, 0.12624035933003985, -0.0037274280821430069},
        {-0.052277497347679371, 0.10440449857671727, -0.0088348788078137629},
        {0.072752176211896002, 0.087131902802587258, 0.01840391014507704},
        {0.031206302527924383, 0.15440583029631974, 0.0037156826260495109},
        {-0.0065753747353619833, 0.16614696540050441, -0.0012091784897039076},
        {-0.04043146467180038, 0.15050676473530894, -0.0056849018415596649},
        {-0.06499090762530331, 0.11966913361302475, -0.011150071309775576},
        {0.082442953498040886, 0.11119072788224693, 0.02020994762438829},
        {0.028573677516872731, 0.17624258348666327, 0.0032408187979819456},
        {-0.014925542892838485, 0.18862886956322061, -0.0021249715669378658},
        {-0.052915972492946356, 0.1696973296063625, -0.0078892803012689978},
        {-0.078804602903337295, 0.13245723150354163, -0.013728127769238549},
    };
    for (int i = 0; i < kNumJoints; ++i)
      c.joints[i] = Vec3(j[i][0], j[i][1], j[i][2]);
    return c;
  }();
  return s;
}

HandSkeleton parse_skeleton_json(
    const std::string& text,
    const std::optional<std::array<int, kNumJoints>>& order) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed skeleton JSON: ") + e.what());
  }
  if (!doc.is_object() || doc.value("format", "") != "jg21")
    throw IoError("skeleton JSON missing format \"jg21\"");
  if (doc.value("units", "m") != "m")
    throw IoError("skeleton JSON units must be \"m\"");
  if (!doc.contains("joints") || !doc["joints"].is_array() ||
      doc["joints"].size() != kNumJoints)
    throw IoError("skeleton JSON must contain 21 joints");

  std::array<int, kNumJoints> perm;
  for (int i = 0; i < kNumJoints; ++i) perm[i] = i;
  if (doc.contains("joint_order")) {
    const auto& jo = doc["joint_order"];
    if (!jo.is_array() || jo.size() != kNumJoints)
      throw IoError("joint_order must list 21 indices");
    for (int i = 0; i < kNumJoints; ++i) perm[i] = jo[i].get<int>();
  } else if (order) {
    perm = *order;
  }
  std::array<bool, kNumJoints> seen{};
  for (int p : perm) {
    if (p < 0 || p >= kNumJoints || seen[p])
      throw IoError("joint_order is not a permutation of 0..20");
    seen[p] = true;
  }

  HandSkeleton s;
  for (int k = 0; k < kNumJoints; ++k) {
    const auto& row = doc["joints"][k];
    if (!row.is_array() || row.size() != 3)
      throw IoError("each joint must be [x,y,z]");
    s.joints[perm[k]] =
        Vec3(row[0].get<double>(), row[1].get<double>(), row[2].get<double>());
  }
  validate_skeleton(s);
  return s;
}

std::string skeleton_to_json(const HandSkeleton& s) {
  json doc;
  doc["format"] = "jg21";
  doc["units"] = "m";
  json joints = json::array();
  for (int i = 0; i < kNumJoints; ++i)
    joints.push_back({s.joints[i].x(), s.joints[i].y(), s.joints[i].z()});
  doc["joints"] = joints;
  return doc.dump(2);
}

HandSkeleton load_skeleton_json(
    const std::string& path,
    const std::optional<std::array<int, kNumJoints>>& order) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open skeleton file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_skeleton_json(ss.str(), order);
}

void save_skeleton_json(const HandSkeleton& s, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write skeleton file: " + path);
  out << skeleton_to_json(s) << "\n";
}

double mpjpe(const HandSkeleton& a, const HandSkeleton& b) {
  double sum = 0.0;
  for (int i = 0; i < kNumJoints; ++i) sum += (a.joints[i] - b.joints[i]).norm();
  return sum / kNumJoints;
}

}  // namespace handsplat
