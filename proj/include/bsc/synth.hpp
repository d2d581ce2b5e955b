#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bsc/decay.hpp"
#include "bsc/sdp.hpp"
#include "bsc/sysmodel.hpp"

namespace bsc {

/// A certified backup safe controller for one sampling period.
///
/// Control law u = -gain (x - center); QLF V(x) = (x - center)^T qlf (x - center);
/// safe forward-invariant region {V(x) <= level}; barrier B(x) = V(x) - level.
struct BackupController {
  MatrixXd gain;
  MatrixXd qlf;
  double level = 0.0;
  double alpha = 0.0;
  double h = 0.0;
  double wcet = 0.0;
  VectorXd center;

  double lyapunov(const VectorXd& x) const {
    const VectorXd d = x - center;
    return d.dot(qlf * d);
  }
  double barrier(const VectorXd& x) const { return lyapunov(x) - level; }
  VectorXd control(const VectorXd& x) const { return -gain * (x - center); }
  Ellipsoid sfir() const { return Ellipsoid(qlf, level, center); }
};

enum class AlphaSearch { fixed, maximize };

struct SynthOptions {
  double eps = 1e-6;
  AlphaSearch alpha_search = AlphaSearch::fixed;
  double alpha_resolution = 1e-3;
  double wcet = 0.005;
  VectorXd norm_scale;  // per-axis units for the decay target; empty: plain Euclidean
  const sdp::ConicSolver* solver = nullptr;  // null: default barrier solver
};

struct SynthesisResult {
  std::optional<BackupController> controller;
  sdp::SolverReport report;
  std::string diagnostic;
  bool feasible() const { return controller.has_value(); }
};

/// Emits  [[Pbar, A Pbar - B Z], [(A Pbar - B Z)^T, (1 - alpha) Pbar]] - eps I >= 0.
void build_recovery_lmi(sdp::SdpProblem& problem, const DiscreteLoop& loop, double alpha, double eps,
                        const sdp::MatrixVar& pbar, const sdp::MatrixVar& z);

/// Emits  [[Pbar, Ubar], [Ubar^T, I]] >= 0  and, per facet j,
/// ||Ubar a_j|| + a_j^T d <= b_j.
void build_safety_constraints(sdp::SdpProblem& problem, const Polytope& sor, const sdp::MatrixVar& pbar,
                              const sdp::MatrixVar& ubar);

/// Per facet j:  a_j^T Pbar a_j <= (b_j - a_j^T d)^2, i.e. {x^T Pbar^-1 x <= 1}
/// lies in the polytope. Keeps the synthesis problem bounded.
void build_qlf_containment(sdp::SdpProblem& problem, const Polytope& sor, const sdp::MatrixVar& pbar);

/// Variables and problem for one backup-controller synthesis at fixed alpha.
struct BscProblem {
  sdp::SdpProblem problem;
  sdp::MatrixVar pbar;
  sdp::MatrixVar z;
  sdp::MatrixVar ubar;
};
BscProblem assemble_bsc_problem(const DiscreteLoop& loop, const Polytope& sor, double alpha, double eps);

/// Largest c with {(x-d)^T P (x-d) <= c} inside the polytope:
/// c = min_j (b_j - a_j^T d)^2 / (a_j^T P^-1 a_j).
double calibrate_level_set(const MatrixXd& p_mat, const Polytope& sor);

struct CertificateReport {
  bool decay_ok = false;
  double decay_residual = 0.0;  // lambda_max(M^T P M - (1 - alpha) P) / |P|_2
  bool level_ok = false;
  double calibrated_level = 0.0;
  bool stable = false;
  double spectral_radius = 0.0;
  bool passed() const { return decay_ok && level_ok && stable; }
};

inline constexpr double kDecayTol = 1e-7;
inline constexpr double kLevelTol = 1e-9;

/// Independent re-check of a controller against its loop and SOR.
CertificateReport verify_certificate(const BackupController& bsc, const DiscreteLoop& loop, const Polytope& sor);

struct ContainmentAudit {
  std::size_t samples = 0;
  std::size_t violations = 0;  // boundary points with a negative facet slack
  double min_slack = 0.0;
  double max_level_error = 0.0;  // |V(x) - c| / c over the sampled points
};

/// Samples the SFIR boundary {V = c}: `random_samples` uniformly distributed
/// directions plus the tangent point toward every facet normal, and checks
/// each point against the SOR with the batched kernels.
ContainmentAudit audit_containment(const BackupController& bsc, const Polytope& sor, std::size_t random_samples,
                                   std::uint64_t seed);

SynthesisResult solve_bsc(const DiscreteLoop& loop, const Polytope& sor, const DecayTarget& target,
                          const SynthOptions& options = {});

struct PeriodOutcome {
  double h = 0.0;
  bool feasible = false;
  double alpha_ref = 0.0;
  double alpha = 0.0;
  std::string diagnostic;
};

struct SweepResult {
  std::vector<BackupController> controllers;  // ascending period
  std::vector<PeriodOutcome> outcomes;
  std::optional<std::string> advice;  // set when nothing is feasible
};

/// Tries every period m*h0 <= h_max.
SweepResult sweep_periods(const LinearPlant& plant, const Polytope& sor, const Polytope& por, double delta_t,
                          double h0, double h_max, const SynthOptions& options = {});

/// Discrete LQR gain by Riccati fixed-point iteration.
MatrixXd synth_poc(const DiscreteLoop& loop, const MatrixXd& q_cost, const MatrixXd& r_cost);

/// Steady-state predictor-form Kalman gain L for
/// xhat[k+1] = A xhat[k] + B u[k] + L (y[k] - C xhat[k]).
MatrixXd synth_kalman(const DiscreteLoop& loop, const MatrixXd& c_out, const MatrixXd& q_w, const MatrixXd& r_v);

}  // namespace bsc
