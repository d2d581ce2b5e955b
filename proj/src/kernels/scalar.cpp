#include "bsc/kernels.hpp"

#include <algorithm>
#include <limits>

namespace bsc::kernels::scalar {

void quad_forms(MatrixView p, const double* center, PointsView pts, double* out) {
  const int n = pts.dim;
  for (std::size_t k = 0; k < pts.count; ++k) {
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
      const double di = pts.data[i * pts.count + k] - center[i];
      double row = 0.0;
      for (int j = 0; j < n; ++j) row += p(i, j) * (pts.data[j * pts.count + k] - center[j]);
      acc += di * row;
    }
    out[k] = acc;
  }
}

void min_facet_slack(MatrixView a, const double* b, PointsView pts, double* out) {
  for (std::size_t k = 0; k < pts.count; ++k) {
    double best = std::numeric_limits<double>::infinity();
    for (int j = 0; j < a.rows; ++j) {
      double s = b[j];
      for (int i = 0; i < a.cols; ++i) s -= a(j, i) * pts.data[i * pts.count + k];
      best = std::min(best, s);
    }
    out[k] = best;
  }
}

}  // namespace bsc::kernels::scalar
