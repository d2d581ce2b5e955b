#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string_view>

#include "bsc/errors.hpp"
#include "bsc/kernels.hpp"

#ifndef BSC_HAVE_AVX2_TU
namespace bsc::kernels::avx2 {
void quad_forms(MatrixView p, const double* center, PointsView pts, double* out) {
  scalar::quad_forms(p, center, pts, out);
}
void min_facet_slack(MatrixView a, const double* b, PointsView pts, double* out) {
  scalar::min_facet_slack(a, b, pts, out);
}
}  // namespace bsc::kernels::avx2
#endif

namespace bsc::kernels {
namespace {

bool cpu_has_avx2() {
#if defined(BSC_HAVE_AVX2_TU) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Isa initial_isa() {
  if (const char* env = std::getenv("BSC_KERNELS"); env != nullptr && std::string_view(env) == "scalar")
    return Isa::scalar;
  return cpu_has_avx2() ? Isa::avx2 : Isa::scalar;
}

std::atomic<Isa>& current() {
  static std::atomic<Isa> isa{initial_isa()};
  return isa;
}

PointsView view_of(const Eigen::MatrixXd& points, int dim) {
  if (points.cols() != dim) throw DimensionError("point batch has wrong dimension");
  return PointsView{points.data(), static_cast<std::size_t>(points.rows()), dim};
}

MatrixView view_of(const Eigen::MatrixXd& m) {
  return MatrixView{m.data(), static_cast<int>(m.rows()), static_cast<int>(m.cols())};
}

}  // namespace

const char* isa_name(Isa isa) { return isa == Isa::avx2 ? "avx2" : "scalar"; }

bool isa_available(Isa isa) { return isa == Isa::scalar || cpu_has_avx2(); }

Isa active_isa() { return current().load(std::memory_order_relaxed); }

void set_isa(Isa isa) {
  if (!isa_available(isa)) throw std::invalid_argument(std::string("ISA not available: ") + isa_name(isa));
  current().store(isa, std::memory_order_relaxed);
}

void quad_forms(const Eigen::MatrixXd& p, const Eigen::VectorXd& center, const Eigen::MatrixXd& points,
                std::span<double> out) {
  const int n = static_cast<int>(p.rows());
  if (p.cols() != n || center.size() != n) throw DimensionError("quad_forms: shape mismatch");
  const PointsView pts = view_of(points, n);
  if (out.size() != pts.count) throw DimensionError("quad_forms: output size mismatch");
  if (active_isa() == Isa::avx2)
    avx2::quad_forms(view_of(p), center.data(), pts, out.data());
  else
    scalar::quad_forms(view_of(p), center.data(), pts, out.data());
}

void min_facet_slack(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, const Eigen::MatrixXd& points,
                     std::span<double> out) {
  if (a.rows() != b.size()) throw DimensionError("min_facet_slack: shape mismatch");
  const PointsView pts = view_of(points, static_cast<int>(a.cols()));
  if (out.size() != pts.count) throw DimensionError("min_facet_slack: output size mismatch");
  if (active_isa() == Isa::avx2)
    avx2::min_facet_slack(view_of(a), b.data(), pts, out.data());
  else
    scalar::min_facet_slack(view_of(a), b.data(), pts, out.data());
}

}  // namespace bsc::kernels
