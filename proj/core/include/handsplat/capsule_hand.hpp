#pragma once

#include "handsplat/mesh.hpp"
#include "handsplat/skeleton.hpp"

namespace handsplat {

struct CapsuleHandOptions {
  int segments = 10;       // vertices around each capsule
  int cylinder_rings = 4;  // quad rings along the shaft
  int cap_rings = 3;       // latitude rings per hemisphere
  double radius_scale = 1.0;
};

// Per-bone capsule radii for a plausible hand (meters).
double capsule_radius(int bone);

// Closed capsule mesh per bone; the union is represented as one mesh whose
// components overlap at the joints (the winding-number interior test treats
// the overlap as inside). Each capsule occupies the u-strip
// [(bone-1)/20, bone/20]; v wraps around the shaft with the seam duplicated
// in per-face UVs.
CanonicalMesh capsule_hand_mesh(const HandSkeleton& skeleton,
                                const CapsuleHandOptions& opts = {});

}  // namespace handsplat
