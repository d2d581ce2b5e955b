#pragma once

// Small dense semidefinite programs:
//
//   maximize   c^T x + sum_l w_l logdet G_l(x)
//   subject to F_k(x) >= 0          (linear matrix inequalities)
//              ||v_r(x)|| <= s_r(x)  (second-order cones)
//
// with every F, G, v, s affine in the scalar decision vector x. Matrix-valued
// decision variables are declared on the problem and expand to slices of x.

#include <map>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace bsc::sdp {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// C0 + sum_k x_k C_k, with only the nonzero C_k stored.
class Affine {
 public:
  Affine() = default;
  Affine(int rows, int cols);
  static Affine constant(const MatrixXd& c);
  static Affine identity(int n) { return constant(MatrixXd::Identity(n, n)); }

  int rows() const { return static_cast<int>(constant_.rows()); }
  int cols() const { return static_cast<int>(constant_.cols()); }
  const MatrixXd& constant_part() const { return constant_; }
  const std::map<int, MatrixXd>& terms() const { return terms_; }
  void add_term(int index, const MatrixXd& coeff);

  MatrixXd eval(const VectorXd& x) const;
  Affine transpose() const;
  Affine row(int r) const;
  /// Coefficient matrices all symmetric (within 1e-12).
  bool is_symmetric() const;

  Affine& operator+=(const Affine& rhs);
  Affine& operator-=(const Affine& rhs);
  Affine& operator*=(double s);
  friend Affine operator+(Affine lhs, const Affine& rhs) { return lhs += rhs; }
  friend Affine operator-(Affine lhs, const Affine& rhs) { return lhs -= rhs; }
  friend Affine operator-(Affine a) { return a *= -1.0; }
  friend Affine operator*(double s, Affine a) { return a *= s; }
  friend Affine operator*(const MatrixXd& left, const Affine& a);
  friend Affine operator*(const Affine& a, const MatrixXd& right);

  /// [[tl, tr], [bl, br]]
  static Affine blocks(const Affine& tl, const Affine& tr, const Affine& bl, const Affine& br);

 private:
  MatrixXd constant_;
  std::map<int, MatrixXd> terms_;
};

struct MatrixVar {
  std::string name;
  int rows = 0;
  int cols = 0;
  bool symmetric = false;
  int offset = 0;  // first scalar index in x
  int count = 0;   // scalars owned
  Affine expr;     // the variable as an affine expression of x
};

/// Writes `value` into the slice of x owned by `var` (symmetric variables
/// read the upper triangle).
void pack(const MatrixVar& var, const MatrixXd& value, VectorXd& x);

struct PsdConstraint {
  Affine expr;
  std::string label;
};

struct SocConstraint {
  Affine v;  // column k x 1
  Affine s;  // 1 x 1
  std::string label;
};

struct LogdetTerm {
  Affine g;
  double weight = 1.0;
};

class SdpProblem {
 public:
  MatrixVar add_symmetric(const std::string& name, int n);
  MatrixVar add_matrix(const std::string& name, int rows, int cols);

  /// Throws DimensionError unless `expr` is square with symmetric coefficients.
  void add_psd(Affine expr, std::string label);
  void add_soc(Affine v, Affine s, std::string label);
  void add_logdet_objective(Affine g, double weight = 1.0);
  void add_linear_objective(int index, double coeff);

  int num_scalars() const { return num_scalars_; }
  const std::vector<MatrixVar>& variables() const { return vars_; }
  const std::vector<PsdConstraint>& psd_constraints() const { return psd_; }
  const std::vector<SocConstraint>& soc_constraints() const { return soc_; }
  const std::vector<LogdetTerm>& logdet_terms() const { return logdet_; }
  const std::map<int, double>& linear_objective() const { return linear_; }

  MatrixXd value(const MatrixVar& var, const VectorXd& x) const { return var.expr.eval(x); }
  double objective(const VectorXd& x) const;
  /// Largest violation over all PSD/SOC constraints at x, scaled by 1 + |F|.
  double max_violation(const VectorXd& x) const;

 private:
  void check_index_range(const Affine& e) const;

  int num_scalars_ = 0;
  std::vector<MatrixVar> vars_;
  std::vector<PsdConstraint> psd_;
  std::vector<SocConstraint> soc_;
  std::vector<LogdetTerm> logdet_;
  std::map<int, double> linear_;
};

enum class SolveStatus { optimal, infeasible, numerical_failure };
const char* to_string(SolveStatus s);

struct SolverReport {
  SolveStatus status = SolveStatus::numerical_failure;
  double objective_value = 0.0;
  double solve_time = 0.0;  // seconds
  double residuals = 0.0;
  int newton_steps = 0;
  std::string message;
};

struct SolveResult {
  SolverReport report;
  VectorXd x;
};

struct SolverOptions {
  double gap_tol = 1e-7;       // terminate when (barrier parameter count) / t < gap_tol
  double accept_gap = 1e-4;    // a path stalled by round-off is accepted below this bound
  double box_radius = 1e4;     // |x_i| < R keeps both phases bounded
  double mu = 20.0;            // barrier parameter growth
  int max_newton_steps = 4000;
  bool feasibility_only = false;
  /// Phase I stops once every constraint holds with this margin.
  double feasibility_margin = 1e-3;
};

/// Abstract conic backend (PSD cones, second-order cones, logdet objective).
class ConicSolver {
 public:
  virtual ~ConicSolver() = default;
  virtual std::string name() const = 0;
  virtual SolveResult solve(const SdpProblem& problem, const SolverOptions& options) const = 0;
};

/// Primal log-barrier interior-point method with a phase-I feasibility search.
/// Intended for the tiny dense problems here (tens of scalars, blocks <= 2n).
class BarrierSolver final : public ConicSolver {
 public:
  std::string name() const override { return "barrier"; }
  SolveResult solve(const SdpProblem& problem, const SolverOptions& options) const override;
};

std::unique_ptr<ConicSolver> default_solver();

}  // namespace bsc::sdp
