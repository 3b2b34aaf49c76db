#pragma once

#include <vector>

#include "handsplat/hand_template.hpp"
#include "handsplat/kinematics.hpp"
#include "handsplat/weight_field.hpp"

namespace handsplat {

// Posing result with the intermediates the backward pass needs. Skinning
// weights are queried at the identity-offset position (p_c + dx_identity),
// so the identity offset also moves the blend.
struct LbsResult {
  Points3 posed;        // G x 3
  Points3 query_points; // G x 3, p_c + dx_identity
  MatX weights;         // G x 21
};

LbsResult pose_gaussians(const CanonicalTemplate& tpl, const WeightField& field,
                         const SkeletonTransform& transform,
                         const Points3& identity_offsets,
                         const Points3& nonrigid_offsets, int threads = 1);

struct LbsGrads {
  Points3 d_identity;  // via the blended transform and the weight query
  Points3 d_nonrigid;  // pass-through
};

LbsGrads lbs_backward(const LbsResult& fwd, const WeightField& field,
                      const SkeletonTransform& transform,
                      const Points3& d_posed, int threads = 1);

}  // namespace handsplat
