#include <immintrin.h>

#include <limits>

#include "bsc/kernels.hpp"

namespace bsc::kernels::avx2 {
namespace {
constexpr int kMaxDim = 16;
}

void quad_forms(MatrixView p, const double* center, PointsView pts, double* out) {
  const int n = pts.dim;
  if (n > kMaxDim) return scalar::quad_forms(p, center, pts, out);
  const std::size_t vec_end = pts.count - pts.count % 4;
  __m256d d[kMaxDim];
  for (std::size_t k = 0; k < vec_end; k += 4) {
    for (int i = 0; i < n; ++i)
      d[i] = _mm256_sub_pd(_mm256_loadu_pd(pts.data + i * pts.count + k), _mm256_set1_pd(center[i]));
    __m256d acc = _mm256_setzero_pd();
    for (int i = 0; i < n; ++i) {
      __m256d row = _mm256_setzero_pd();
      for (int j = 0; j < n; ++j) row = _mm256_fmadd_pd(_mm256_set1_pd(p(i, j)), d[j], row);
      acc = _mm256_fmadd_pd(d[i], row, acc);
    }
    _mm256_storeu_pd(out + k, acc);
  }
  if (vec_end < pts.count) {
    // Tail through the reference path on a shifted view.
    const std::size_t tail = pts.count - vec_end;
    double buf[kMaxDim * 3];
    for (int i = 0; i < n; ++i)
      for (std::size_t t = 0; t < tail; ++t) buf[i * tail + t] = pts.data[i * pts.count + vec_end + t];
    scalar::quad_forms(p, center, PointsView{buf, tail, n}, out + vec_end);
  }
}

void min_facet_slack(MatrixView a, const double* b, PointsView pts, double* out) {
  const int n = pts.dim;
  if (n > kMaxDim) return scalar::min_facet_slack(a, b, pts, out);
  const std::size_t vec_end = pts.count - pts.count % 4;
  __m256d x[kMaxDim];
  for (std::size_t k = 0; k < vec_end; k += 4) {
    for (int i = 0; i < n; ++i) x[i] = _mm256_loadu_pd(pts.data + i * pts.count + k);
    __m256d best = _mm256_set1_pd(std::numeric_limits<double>::infinity());
    for (int j = 0; j < a.rows; ++j) {
      __m256d s = _mm256_set1_pd(b[j]);
      for (int i = 0; i < n; ++i) s = _mm256_fnmadd_pd(_mm256_set1_pd(a(j, i)), x[i], s);
      best = _mm256_min_pd(best, s);
    }
    _mm256_storeu_pd(out + k, best);
  }
  if (vec_end < pts.count) {
    const std::size_t tail = pts.count - vec_end;
    double buf[kMaxDim * 3];
    for (int i = 0; i < n; ++i)
      for (std::size_t t = 0; t < tail; ++t) buf[i * tail + t] = pts.data[i * pts.count + vec_end + t];
    scalar::min_facet_slack(a, b, PointsView{buf, tail, n}, out + vec_end);
  }
}

}  // namespace bsc::kernels::avx2
