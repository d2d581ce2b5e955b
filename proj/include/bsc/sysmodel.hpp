#pragma once

#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace bsc {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Continuous-time linearized plant  dx/dt = phi x + gamma u + w,  y = C x + v.
/// States, inputs and outputs are deviations from (x_ref, u_ref).
struct LinearPlant {
  MatrixXd phi;
  MatrixXd gamma;
  MatrixXd c_out;
  MatrixXd q_w;
  MatrixXd r_v;
  VectorXd x_ref;
  VectorXd u_ref;

  int states() const { return static_cast<int>(phi.rows()); }
  int inputs() const { return static_cast<int>(gamma.cols()); }
  int outputs() const { return static_cast<int>(c_out.rows()); }

  /// Throws DimensionError / DomainError when dimensions disagree or the
  /// noise covariances are not symmetric PSD.
  void validate() const;
};

/// Sampled loop at period h:  x[k+1] = a x[k] + b u[k].
struct DiscreteLoop {
  MatrixXd a;
  MatrixXd b;
  double h = 0.0;
  std::optional<MatrixXd> poc_gain;
  std::optional<MatrixXd> kalman_gain;

  int states() const { return static_cast<int>(a.rows()); }
  int inputs() const { return static_cast<int>(b.cols()); }

  // Attaches a primary-controller gain; throws DomainError unless a - b K is
  // Schur stable.
  DiscreteLoop with_poc(const MatrixXd& gain) const;
  DiscreteLoop with_kalman(const MatrixXd& gain) const;
};

/// Bounded H-polytope {x : a_j^T x <= b_j} with a strictly interior center.
class Polytope {
 public:
  Polytope(MatrixXd a_mat, VectorXd b_vec, VectorXd center);

  /// Axis-aligned box lo <= x <= hi. The center defaults to the origin when it
  /// is interior, otherwise to the box midpoint.
  static Polytope box(const VectorXd& lo, const VectorXd& hi);
  static Polytope box(const VectorXd& lo, const VectorXd& hi, const VectorXd& center);

  const MatrixXd& a() const { return a_; }
  const VectorXd& b() const { return b_; }
  const VectorXd& center() const { return center_; }
  int dim() const { return static_cast<int>(a_.cols()); }
  int facets() const { return static_cast<int>(a_.rows()); }

  /// Slack b_j - a_j^T x per facet.
  VectorXd slacks(const VectorXd& x) const;
  bool is_box() const;
  /// Lower/upper bounds of an axis-aligned box; GeometryError otherwise
  /// (including a box missing a bound on some axis, i.e. unbounded).
  std::pair<VectorXd, VectorXd> box_bounds() const;
  /// Corners of a box (2^n), or brute-force enumeration for other polytopes.
  std::vector<VectorXd> vertices() const;

 private:
  std::vector<VectorXd> general_vertices() const;
  MatrixXd a_;
  VectorXd b_;
  VectorXd center_;
};

/// {x : (x - center)^T P (x - center) <= level}
class Ellipsoid {
 public:
  Ellipsoid(MatrixXd p_mat, double level, VectorXd center);

  const MatrixXd& p() const { return p_; }
  double level() const { return level_; }
  const VectorXd& center() const { return center_; }
  double value(const VectorXd& x) const;

 private:
  MatrixXd p_;
  double level_;
  VectorXd center_;
};

/// Axis-aligned bounds of the vertex set.
std::pair<VectorXd, VectorXd> bounding_box(const Polytope& poly);

/// The same set in coordinates z = x ./ scale.
Polytope rescale(const Polytope& poly, const VectorXd& scale);

DiscreteLoop discretize(const LinearPlant& plant, double h);

struct NormExtrema {
  double min_norm;
  double max_norm;
};

/// min: smallest center-to-facet distance; max: largest center-to-vertex norm.
NormExtrema boundary_norm_extrema(const Polytope& poly);

inline constexpr double kContainsTol = 1e-12;

bool contains(const Polytope& poly, const VectorXd& x);
bool ellipsoid_contains(const Ellipsoid& e, const VectorXd& x);

double spectral_radius(const MatrixXd& m);
/// True when m is symmetric within 1e-9 (relative) and its smallest
/// eigenvalue is positive.
bool is_spd(const MatrixXd& m);

}  // namespace bsc
