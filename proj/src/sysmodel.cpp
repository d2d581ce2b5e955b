#include "bsc/sysmodel.hpp"

#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <unsupported/Eigen/MatrixFunctions>

#include "bsc/errors.hpp"

namespace bsc {
namespace {

bool is_symmetric_psd(const MatrixXd& m) {
  if (m.rows() != m.cols()) return false;
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale) return false;
  if (m.size() == 0) return true;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff() >= -1e-12 * scale;
}

std::string shape(const MatrixXd& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace

void LinearPlant::validate() const {
  const auto n = phi.rows();
  if (phi.cols() != n || n == 0) throw DimensionError("phi must be square and non-empty, got " + shape(phi));
  if (gamma.rows() != n) throw DimensionError("gamma must have " + std::to_string(n) + " rows, got " + shape(gamma));
  if (c_out.cols() != n) throw DimensionError("C must have " + std::to_string(n) + " columns, got " + shape(c_out));
  const auto m = c_out.rows();
  if (q_w.rows() != n || q_w.cols() != n) throw DimensionError("q_w must be n x n, got " + shape(q_w));
  if (r_v.rows() != m || r_v.cols() != m) throw DimensionError("r_v must be m x m, got " + shape(r_v));
  if (x_ref.size() != n) throw DimensionError("x_ref must have n entries");
  if (u_ref.size() != gamma.cols()) throw DimensionError("u_ref must have p entries");
  if (!is_symmetric_psd(q_w)) throw DomainError("q_w is not symmetric PSD");
  if (!is_symmetric_psd(r_v)) throw DomainError("r_v is not symmetric PSD");
}

DiscreteLoop DiscreteLoop::with_poc(const MatrixXd& gain) const {
  if (gain.rows() != b.cols() || gain.cols() != a.rows())
    throw DimensionError("POC gain must be p x n, got " + shape(gain));
  const double rho = spectral_radius(a - b * gain);
  if (!(rho < 1.0)) throw DomainError("POC gain is not stabilizing, spectral radius " + std::to_string(rho));
  DiscreteLoop out = *this;
  out.poc_gain = gain;
  return out;
}

DiscreteLoop DiscreteLoop::with_kalman(const MatrixXd& gain) const {
  if (gain.rows() != a.rows()) throw DimensionError("observer gain must have n rows, got " + shape(gain));
  DiscreteLoop out = *this;
  out.kalman_gain = gain;
  return out;
}

Polytope::Polytope(MatrixXd a_mat, VectorXd b_vec, VectorXd center)
    : a_(std::move(a_mat)), b_(std::move(b_vec)), center_(std::move(center)) {
  if (a_.rows() != b_.size()) throw DimensionError("polytope: A has " + std::to_string(a_.rows()) +
                                                   " rows but b has " + std::to_string(b_.size()));
  if (a_.cols() != center_.size()) throw DimensionError("polytope: center dimension mismatch");
  if (a_.rows() == 0) throw GeometryError("polytope has no facets (unbounded)");
  for (Eigen::Index j = 0; j < a_.rows(); ++j) {
    if (a_.row(j).norm() == 0.0) throw GeometryError("polytope facet " + std::to_string(j) + " has a zero normal");
  }
  const VectorXd s = slacks(center_);
  if (!(s.minCoeff() > 0.0)) throw GeometryError("polytope center is not strictly interior");
}

Polytope Polytope::box(const VectorXd& lo, const VectorXd& hi) {
  const VectorXd zero = VectorXd::Zero(lo.size());
  const bool origin_inside = (lo.array() < 0.0).all() && (hi.array() > 0.0).all();
  return box(lo, hi, origin_inside ? zero : VectorXd(0.5 * (lo + hi)));
}

Polytope Polytope::box(const VectorXd& lo, const VectorXd& hi, const VectorXd& center) {
  const auto n = lo.size();
  if (hi.size() != n) throw DimensionError("box: lo/hi dimension mismatch");
  if (!((hi - lo).array() > 0.0).all()) throw GeometryError("box: every hi must exceed lo");
  MatrixXd a = MatrixXd::Zero(2 * n, n);
  VectorXd b(2 * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    a(2 * i, i) = 1.0;
    b(2 * i) = hi(i);
    a(2 * i + 1, i) = -1.0;
    b(2 * i + 1) = -lo(i);
  }
  return Polytope(std::move(a), std::move(b), center);
}

VectorXd Polytope::slacks(const VectorXd& x) const {
  if (x.size() != a_.cols()) throw DimensionError("polytope: point dimension mismatch");
  return b_ - a_ * x;
}

bool Polytope::is_box() const {
  for (Eigen::Index j = 0; j < a_.rows(); ++j) {
    if ((a_.row(j).array() != 0.0).count() != 1) return false;
  }
  return true;
}

std::pair<VectorXd, VectorXd> Polytope::box_bounds() const {
  if (!is_box()) throw GeometryError("polytope is not an axis-aligned box");
  const auto n = a_.cols();
  VectorXd lo = VectorXd::Constant(n, -INFINITY);
  VectorXd hi = VectorXd::Constant(n, INFINITY);
  for (Eigen::Index j = 0; j < a_.rows(); ++j) {
    Eigen::Index i = 0;
    a_.row(j).cwiseAbs().maxCoeff(&i);
    const double bound = b_(j) / a_(j, i);
    if (a_(j, i) > 0.0)
      hi(i) = std::min(hi(i), bound);
    else
      lo(i) = std::max(lo(i), bound);
  }
  if (!lo.allFinite() || !hi.allFinite()) throw GeometryError("polytope is unbounded along some axis");
  return {lo, hi};
}

std::vector<VectorXd> Polytope::vertices() const {
  if (!is_box()) return general_vertices();
  const auto [lo, hi] = box_bounds();
  const auto n = static_cast<int>(lo.size());
  std::vector<VectorXd> out;
  out.reserve(std::size_t{1} << n);
  for (unsigned mask = 0; mask < (1u << n); ++mask) {
    VectorXd v(n);
    for (int i = 0; i < n; ++i) v(i) = (mask >> i) & 1u ? hi(i) : lo(i);
    out.push_back(std::move(v));
  }
  return out;
}

// Brute force over n-subsets of facets; fine for the small regions used here.
std::vector<VectorXd> Polytope::general_vertices() const {
  const int n = dim();
  const int m = facets();
  std::vector<int> pick(n);
  for (int i = 0; i < n; ++i) pick[i] = i;
  std::vector<VectorXd> out;
  const double tol = 1e-9 * std::max(1.0, b_.cwiseAbs().maxCoeff());
  long combos = 0;
  while (n <= m) {
    if (++combos > 2'000'000) throw GeometryError("polytope has too many facets for vertex enumeration");
    MatrixXd sub(n, n);
    VectorXd rhs(n);
    for (int i = 0; i < n; ++i) {
      sub.row(i) = a_.row(pick[i]);
      rhs(i) = b_(pick[i]);
    }
    Eigen::FullPivLU<MatrixXd> lu(sub);
    if (lu.isInvertible()) {
      const VectorXd v = lu.solve(rhs);
      if (slacks(v).minCoeff() >= -tol) {
        bool dup = false;
        for (const auto& w : out) dup = dup || (w - v).norm() <= tol;
        if (!dup) out.push_back(v);
      }
    }
    int i = n - 1;
    while (i >= 0 && pick[i] == m - n + i) --i;
    if (i < 0) break;
    ++pick[i];
    for (int k = i + 1; k < n; ++k) pick[k] = pick[k - 1] + 1;
  }
  if (out.size() < static_cast<std::size_t>(n) + 1) throw GeometryError("polytope is unbounded or degenerate");
  // Cheap partial boundedness check: every axis direction must hit some facet.
  for (int i = 0; i < n; ++i) {
    for (double sgn : {1.0, -1.0}) {
      const VectorXd dir = sgn * VectorXd::Unit(n, i);
      if (!((a_ * dir).array() > 0.0).any()) throw GeometryError("polytope is unbounded");
    }
  }
  return out;
}

Ellipsoid::Ellipsoid(MatrixXd p_mat, double level, VectorXd center)
    : p_(std::move(p_mat)), level_(level), center_(std::move(center)) {
  if (p_.rows() != p_.cols() || p_.rows() != center_.size())
    throw DimensionError("ellipsoid: shape/center dimension mismatch");
  if (!is_spd(p_)) throw DomainError("ellipsoid shape matrix is not SPD");
  if (!(level_ > 0.0)) throw DomainError("ellipsoid level must be positive");
}

double Ellipsoid::value(const VectorXd& x) const {
  const VectorXd d = x - center_;
  return d.dot(p_ * d);
}

std::pair<VectorXd, VectorXd> bounding_box(const Polytope& poly) {
  if (poly.is_box()) return poly.box_bounds();
  const auto verts = poly.vertices();
  VectorXd lo = verts.front(), hi = verts.front();
  for (const auto& v : verts) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  return {lo, hi};
}

Polytope rescale(const Polytope& poly, const VectorXd& scale) {
  if (scale.size() != poly.dim()) throw DimensionError("scale has the wrong dimension");
  if (!(scale.array() > 0.0).all()) throw DomainError("scale entries must be positive");
  return Polytope(poly.a() * scale.asDiagonal(), poly.b(), poly.center().cwiseQuotient(scale));
}

DiscreteLoop discretize(const LinearPlant& plant, double h) {
  if (!(h > 0.0)) throw DomainError("sampling period must be positive");
  plant.validate();
  const int n = plant.states();
  const int p = plant.inputs();
  // exp([[phi, gamma], [0, 0]] h) = [[A, B], [0, I]]
  MatrixXd aug = MatrixXd::Zero(n + p, n + p);
  aug.topLeftCorner(n, n) = plant.phi * h;
  aug.topRightCorner(n, p) = plant.gamma * h;
  const MatrixXd e = aug.exp();
  if (!e.allFinite()) throw NumericError("matrix exponential produced non-finite entries");
  DiscreteLoop loop;
  loop.a = e.topLeftCorner(n, n);
  loop.b = e.topRightCorner(n, p);
  loop.h = h;
  return loop;
}

NormExtrema boundary_norm_extrema(const Polytope& poly) {
  const VectorXd slack = poly.slacks(poly.center());
  double min_norm = INFINITY;
  for (int j = 0; j < poly.facets(); ++j) min_norm = std::min(min_norm, slack(j) / poly.a().row(j).norm());
  double max_norm = 0.0;
  for (const auto& v : poly.vertices()) max_norm = std::max(max_norm, (v - poly.center()).norm());
  return {min_norm, max_norm};
}

bool contains(const Polytope& poly, const VectorXd& x) {
  return (poly.slacks(x).array() >= -kContainsTol).all();
}

bool ellipsoid_contains(const Ellipsoid& e, const VectorXd& x) {
  if (x.size() != e.center().size()) throw DimensionError("ellipsoid: point dimension mismatch");
  return e.value(x) <= e.level() + kContainsTol;
}

double spectral_radius(const MatrixXd& m) {
  if (m.size() == 0) return 0.0;
  Eigen::EigenSolver<MatrixXd> es(m, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

bool is_spd(const MatrixXd& m) {
  if (m.rows() != m.cols() || m.size() == 0) return false;
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale) return false;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff() > 0.0;
}

}  // namespace bsc
