#include "handsplat/metrics.hpp"

#include <cmath>
#include <limits>

#include "handsplat/errors.hpp"

namespace handsplat {

double psnr(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw DomainError("PSNR inputs must share a shape");
  double mse = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    double d = a.data[i] - b.data[i];
    mse += d * d;
  }
  mse /= a.data.size();
  if (mse <= 1e-10) return 100.0;
  return std::min(100.0, 10.0 * std::log10(1.0 / mse));
}

double chamfer_l1(const Points3& a, const Points3& b) {
  if (a.rows() == 0 || b.rows() == 0)
    throw DomainError("chamfer distance needs non-empty point sets");
  auto one_way = [](const Points3& from, const Points3& to) {
    double sum = 0.0;
    for (long i = 0; i < from.rows(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (long j = 0; j < to.rows(); ++j)
        best = std::min(best, (from.row(i) - to.row(j)).norm());
      sum += best;
    }
    return sum / from.rows();
  };
  return 0.5 * (one_way(a, b) + one_way(b, a));
}

ImageMetrics image_metrics(const Image& pred, const Image& gt) {
  ImageMetrics m;
  m.psnr = psnr(pred, gt);
  m.ssim = ssim_value(pred, gt);
  return m;
}

}  // namespace handsplat
