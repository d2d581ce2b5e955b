#pragma once

// Batched point-set kernels used by the sampled certificate checks.
//
// Points are passed structure-of-arrays: an (N x n) column-major matrix, so
// coordinate i of every point is contiguous. Each kernel has a scalar
// reference and an AVX2/FMA variant; the variant is chosen once at runtime
// from CPUID and can be pinned with set_isa() or BSC_KERNELS=scalar.

#include <cstddef>
#include <span>

#include <Eigen/Core>

namespace bsc::kernels {

enum class Isa { scalar, avx2 };

const char* isa_name(Isa isa);
bool isa_available(Isa isa);
Isa active_isa();
/// Throws std::invalid_argument when the ISA is not available on this host.
void set_isa(Isa isa);

struct PointsView {
  const double* data;  // coordinate i of point k at data[i * count + k]
  std::size_t count;
  int dim;
};

struct MatrixView {
  const double* data;  // column-major rows x cols
  int rows;
  int cols;
  double operator()(int r, int c) const { return data[static_cast<std::size_t>(c) * rows + r]; }
};

// Raw per-ISA entry points; out has `pts.count` entries.
namespace scalar {
void quad_forms(MatrixView p, const double* center, PointsView pts, double* out);
void min_facet_slack(MatrixView a, const double* b, PointsView pts, double* out);
}  // namespace scalar

namespace avx2 {
void quad_forms(MatrixView p, const double* center, PointsView pts, double* out);
void min_facet_slack(MatrixView a, const double* b, PointsView pts, double* out);
}  // namespace avx2

/// out[k] = (x_k - c)^T P (x_k - c)
void quad_forms(const Eigen::MatrixXd& p, const Eigen::VectorXd& center, const Eigen::MatrixXd& points,
                std::span<double> out);
/// out[k] = min_j (b_j - a_j^T x_k)
void min_facet_slack(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, const Eigen::MatrixXd& points,
                     std::span<double> out);

}  // namespace bsc::kernels
