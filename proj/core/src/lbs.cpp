#include "handsplat/lbs.hpp"

#include "handsplat/errors.hpp"
#include "handsplat/parallel.hpp"

namespace handsplat {

namespace {

using Affine34 = Eigen::Matrix<double, 3, 4>;

std::array<Affine34, kNumJoints> affine_rows(const SkeletonTransform& t) {
  std::array<Affine34, kNumJoints> a;
  for (int j = 0; j < kNumJoints; ++j) a[j] = t.per_joint[j].topRows<3>();
  return a;
}

}  // namespace

LbsResult pose_gaussians(const CanonicalTemplate& tpl, const WeightField& field,
                         const SkeletonTransform& transform,
                         const Points3& identity_offsets,
                         const Points3& nonrigid_offsets, int threads) {
  const int g = tpl.size();
  if (identity_offsets.rows() != g || nonrigid_offsets.rows() != g)
    throw DomainError("offset count does not match template size");
  if (!identity_offsets.allFinite() || !nonrigid_offsets.allFinite())
    throw DomainError("offsets must be finite");

  LbsResult out;
  out.posed.resize(g, 3);
  out.query_points = tpl.positions + identity_offsets;
  out.weights.resize(g, kNumJoints);

  const auto bones = affine_rows(transform);
  parallel_for(static_cast<size_t>(g), threads, [&](size_t begin, size_t end) {
    for (size_t i = begin; i < end; ++i) {
      Vec3 q = out.query_points.row(i).transpose();
      JointWeights w = query_weights(field, q);
      out.weights.row(i) = w.transpose();
      Affine34 blended = Affine34::Zero();
      for (int j = 0; j < kNumJoints; ++j)
        if (w[j] != 0.0) blended += w[j] * bones[j];
      Vec3 posed = blended.leftCols<3>() * q + blended.col(3) +
                   nonrigid_offsets.row(i).transpose();
      out.posed.row(i) = posed;
    }
  });
  return out;
}

LbsGrads lbs_backward(const LbsResult& fwd, const WeightField& field,
                      const SkeletonTransform& transform,
                      const Points3& d_posed, int threads) {
  const int g = static_cast<int>(fwd.posed.rows());
  if (d_posed.rows() != g) throw DomainError("gradient shape mismatch");

  LbsGrads grads;
  grads.d_identity.resize(g, 3);
  grads.d_nonrigid = d_posed;

  const auto bones = affine_rows(transform);
  parallel_for(static_cast<size_t>(g), threads, [&](size_t begin, size_t end) {
    for (size_t i = begin; i < end; ++i) {
      Vec3 q = fwd.query_points.row(i).transpose();
      Vec3 up = d_posed.row(i).transpose();
      JointWeightsGrad dw;
      query_weights_grad(field, q, &dw);

      // x = sum_j w_j(q) (A_j q + b_j) + dx_nr
      // dx/dq = sum_j w_j A_j + sum_j (A_j q + b_j) (dw_j/dq)^T
      Mat3 lin = Mat3::Zero();
      Vec3 dq = Vec3::Zero();
      for (int j = 0; j < kNumJoints; ++j) {
        double w = fwd.weights(i, j);
        if (w != 0.0) lin += w * bones[j].leftCols<3>();
        Vec3 mapped = bones[j].leftCols<3>() * q + bones[j].col(3);
        dq += up.dot(mapped) * dw.row(j).transpose();
      }
      dq += lin.transpose() * up;
      grads.d_identity.row(i) = dq;
    }
  });
  return grads;
}

}  // namespace handsplat
