#include "bsc/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "bsc/errors.hpp"
#include "bsc/kernels.hpp"

namespace bsc {

using sdp::Affine;

void build_recovery_lmi(sdp::SdpProblem& problem, const DiscreteLoop& loop, double alpha, double eps,
                        const sdp::MatrixVar& pbar, const sdp::MatrixVar& z) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("decay alpha must lie in (0, 1)");
  if (!(eps > 0.0)) throw DomainError("eps must be positive");
  const int n = loop.states();
  const Affine closed = loop.a * pbar.expr - loop.b * z.expr;
  Affine lmi = Affine::blocks(pbar.expr, closed, closed.transpose(), (1.0 - alpha) * pbar.expr);
  lmi -= Affine::constant(eps * MatrixXd::Identity(2 * n, 2 * n));
  problem.add_psd(std::move(lmi), "recovery");
}

void build_safety_constraints(sdp::SdpProblem& problem, const Polytope& sor, const sdp::MatrixVar& pbar,
                              const sdp::MatrixVar& ubar) {
  const int n = sor.dim();
  problem.add_psd(Affine::blocks(pbar.expr, ubar.expr, ubar.expr.transpose(), Affine::identity(n)), "coupling");
  for (int j = 0; j < sor.facets(); ++j) {
    const MatrixXd aj = sor.a().row(j);
    const double rhs = sor.b()(j) - sor.a().row(j).dot(sor.center());
    problem.add_soc(aj * ubar.expr, Affine::constant(MatrixXd::Constant(1, 1, rhs)), "facet" + std::to_string(j));
  }
}

void build_qlf_containment(sdp::SdpProblem& problem, const Polytope& sor, const sdp::MatrixVar& pbar) {
  for (int j = 0; j < sor.facets(); ++j) {
    const MatrixXd aj = sor.a().row(j);
    const double off = sor.b()(j) - sor.a().row(j).dot(sor.center());
    Affine row = Affine::constant(MatrixXd::Constant(1, 1, off * off)) - aj * pbar.expr * aj.transpose();
    problem.add_psd(std::move(row), "contain" + std::to_string(j));
  }
}

BscProblem assemble_bsc_problem(const DiscreteLoop& loop, const Polytope& sor, double alpha, double eps) {
  const int n = loop.states();
  const int p = loop.inputs();
  if (sor.dim() != n) throw DimensionError("SOR dimension does not match the loop");
  BscProblem out;
  out.pbar = out.problem.add_symmetric("Pbar", n);
  out.z = out.problem.add_matrix("Z", p, n);
  out.ubar = out.problem.add_symmetric("Ubar", n);
  build_recovery_lmi(out.problem, loop, alpha, eps, out.pbar, out.z);
  build_safety_constraints(out.problem, sor, out.pbar, out.ubar);
  build_qlf_containment(out.problem, sor, out.pbar);
  out.problem.add_logdet_objective(out.ubar.expr);
  return out;
}

double calibrate_level_set(const MatrixXd& p_mat, const Polytope& sor) {
  if (!is_spd(p_mat)) throw DomainError("calibrate_level_set: P is not SPD");
  if (p_mat.rows() != sor.dim()) throw DimensionError("calibrate_level_set: dimension mismatch");
  const Eigen::LLT<MatrixXd> llt(p_mat);
  const VectorXd off = sor.slacks(sor.center());
  double c = INFINITY;
  for (int j = 0; j < sor.facets(); ++j) {
    const VectorXd aj = sor.a().row(j).transpose();
    c = std::min(c, off(j) * off(j) / aj.dot(llt.solve(aj)));
  }
  return c;
}

CertificateReport verify_certificate(const BackupController& bsc, const DiscreteLoop& loop, const Polytope& sor) {
  CertificateReport r;
  const MatrixXd m = loop.a - loop.b * bsc.gain;
  const MatrixXd gap = m.transpose() * bsc.qlf * m - (1.0 - bsc.alpha) * bsc.qlf;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (gap + gap.transpose()), Eigen::EigenvaluesOnly);
  Eigen::SelfAdjointEigenSolver<MatrixXd> ep(0.5 * (bsc.qlf + bsc.qlf.transpose()), Eigen::EigenvaluesOnly);
  const double p_norm = ep.eigenvalues().cwiseAbs().maxCoeff();
  r.decay_residual = es.eigenvalues().maxCoeff() / p_norm;
  r.decay_ok = r.decay_residual <= kDecayTol;
  if (is_spd(bsc.qlf)) {
    r.calibrated_level = calibrate_level_set(bsc.qlf, sor);
    r.level_ok = r.calibrated_level >= bsc.level - kLevelTol && bsc.level > 0.0;
  }
  r.spectral_radius = spectral_radius(m);
  r.stable = r.spectral_radius < 1.0;
  return r;
}

namespace {

// Diagonal conditioning transform x = d + T z.
VectorXd conditioning_scale(const Polytope& sor) {
  if (!sor.is_box()) return VectorXd::Ones(sor.dim());
  const auto [lo, hi] = sor.box_bounds();
  return 0.5 * (hi - lo);
}

struct ScaledData {
  DiscreteLoop loop;
  Polytope sor;
  VectorXd scale;
};

ScaledData scaled(const DiscreteLoop& loop, const Polytope& sor) {
  const VectorXd s = conditioning_scale(sor);
  const VectorXd inv = s.cwiseInverse();
  DiscreteLoop z = loop;
  z.a = inv.asDiagonal() * loop.a * s.asDiagonal();
  z.b = inv.asDiagonal() * loop.b;
  MatrixXd a = sor.a() * s.asDiagonal();
  VectorXd b = sor.slacks(sor.center());
  return {std::move(z), Polytope(std::move(a), std::move(b), VectorXd::Zero(sor.dim())), s};
}

struct Attempt {
  sdp::SolveResult result;
  MatrixXd pbar, z;
};

Attempt attempt(const ScaledData& sd, double alpha, double eps, const sdp::ConicSolver& solver, bool feas_only) {
  BscProblem bp = assemble_bsc_problem(sd.loop, sd.sor, alpha, eps);
  sdp::SolverOptions opt;
  opt.feasibility_only = feas_only;
  Attempt a;
  a.result = solver.solve(bp.problem, opt);
  if (a.result.x.size() == bp.problem.num_scalars()) {
    a.pbar = bp.problem.value(bp.pbar, a.result.x);
    a.z = bp.problem.value(bp.z, a.result.x);
  }
  return a;
}

}  // namespace

ContainmentAudit audit_containment(const BackupController& bsc, const Polytope& sor, std::size_t random_samples,
                                   std::uint64_t seed) {
  const int n = sor.dim();
  if (bsc.qlf.rows() != n || bsc.center.size() != n) throw DimensionError("controller and SOR dimensions differ");
  const Eigen::LLT<MatrixXd> llt(bsc.qlf);
  if (llt.info() != Eigen::Success) throw DomainError("QLF matrix is not positive definite");
  const MatrixXd p_inv = llt.solve(MatrixXd::Identity(n, n));
  const double r = std::sqrt(bsc.level);

  const std::size_t facets = static_cast<std::size_t>(sor.facets());
  const std::size_t total = random_samples + 2 * facets;
  MatrixXd pts(static_cast<Eigen::Index>(total), n);

  // x = d + sqrt(c) L^-T z with P = L L^T and |z| = 1 gives V(x) = c.
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const auto upper = llt.matrixU();
  for (std::size_t k = 0; k < random_samples; ++k) {
    VectorXd z(n);
    do {
      for (int i = 0; i < n; ++i) z(i) = gauss(rng);
    } while (z.norm() < 1e-12);
    const VectorXd x = bsc.center + r * upper.solve(z / z.norm());
    pts.row(static_cast<Eigen::Index>(k)) = x.transpose();
  }
  for (std::size_t j = 0; j < facets; ++j) {
    const VectorXd a = sor.a().row(static_cast<Eigen::Index>(j)).transpose();
    const VectorXd dir = p_inv * a / std::sqrt(a.dot(p_inv * a));
    pts.row(static_cast<Eigen::Index>(random_samples + 2 * j)) = (bsc.center + r * dir).transpose();
    pts.row(static_cast<Eigen::Index>(random_samples + 2 * j + 1)) = (bsc.center - r * dir).transpose();
  }

  std::vector<double> slack(total), level(total);
  kernels::min_facet_slack(sor.a(), sor.b(), pts, slack);
  kernels::quad_forms(bsc.qlf, bsc.center, pts, level);

  ContainmentAudit out;
  out.samples = total;
  out.min_slack = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < total; ++k) {
    if (slack[k] < -kLevelTol) ++out.violations;
    out.min_slack = std::min(out.min_slack, slack[k]);
    out.max_level_error = std::max(out.max_level_error, std::abs(level[k] - bsc.level) / bsc.level);
  }
  return out;
}

SynthesisResult solve_bsc(const DiscreteLoop& loop, const Polytope& sor, const DecayTarget& target,
                          const SynthOptions& options) {
  if (std::abs(loop.h - target.h) > 1e-12 * std::max(1.0, target.h))
    throw PreconditionError("loop period does not match the decay target period");
  if (!(options.wcet > 0.0 && options.wcet < loop.h))
    throw SchedulabilityError("wcet must lie in (0, h)");
  const auto fallback = sdp::default_solver();
  const sdp::ConicSolver& solver = options.solver != nullptr ? *options.solver : *fallback;
  const ScaledData sd = scaled(loop, sor);

  SynthesisResult out;
  double alpha = target.alpha_ref;
  Attempt best = attempt(sd, alpha, options.eps, solver, false);
  out.report = best.result.report;
  if (best.result.report.status == sdp::SolveStatus::infeasible) {
    out.diagnostic = "recovery/safety LMIs infeasible at alpha_ref=" + std::to_string(alpha) + " (" + best.result.report.message + ")";
    return out;
  }
  if (best.result.report.status != sdp::SolveStatus::optimal) {
    out.diagnostic = "solver failure: " + best.result.report.message;
    return out;
  }

  if (options.alpha_search == AlphaSearch::maximize) {
    double lo = alpha, hi = 1.0;
    while (hi - lo > options.alpha_resolution) {
      const double mid = 0.5 * (lo + hi);
      const Attempt probe = attempt(sd, mid, options.eps, solver, true);
      if (probe.result.report.status == sdp::SolveStatus::optimal)
        lo = mid;
      else
        hi = mid;
    }
    if (lo > alpha) {
      Attempt at_lo = attempt(sd, lo, options.eps, solver, false);
      if (at_lo.result.report.status == sdp::SolveStatus::optimal) {
        best = std::move(at_lo);
        alpha = lo;
        out.report = best.result.report;
      }
    }
  }

  const Eigen::LLT<MatrixXd> llt(best.pbar);
  if (llt.info() != Eigen::Success) {
    out.report.status = sdp::SolveStatus::numerical_failure;
    out.diagnostic = "solver returned a non-definite Pbar";
    return out;
  }
  const int n = loop.states();
  const MatrixXd p_z = llt.solve(MatrixXd::Identity(n, n));
  const MatrixXd k_z = best.z * p_z;
  const VectorXd inv = sd.scale.cwiseInverse();

  BackupController bsc;
  bsc.qlf = inv.asDiagonal() * p_z * inv.asDiagonal();
  bsc.qlf = 0.5 * (bsc.qlf + bsc.qlf.transpose()).eval();
  bsc.gain = k_z * inv.asDiagonal();
  bsc.alpha = alpha;
  bsc.h = loop.h;
  bsc.wcet = options.wcet;
  bsc.center = sor.center();
  bsc.level = calibrate_level_set(bsc.qlf, sor);

  const CertificateReport cert = verify_certificate(bsc, loop, sor);
  if (!cert.passed()) {
    std::ostringstream msg;
    msg << "certificate check failed (decay residual " << cert.decay_residual << ", spectral radius "
        << cert.spectral_radius << ")";
    out.report.status = sdp::SolveStatus::numerical_failure;
    out.diagnostic = msg.str();
    return out;
  }
  out.controller = std::move(bsc);
  return out;
}

SweepResult sweep_periods(const LinearPlant& plant, const Polytope& sor, const Polytope& por, double delta_t,
                          double h0, double h_max, const SynthOptions& options) {
  if (!(h0 > 0.0)) throw DomainError("base period must be positive");
  if (!(h_max >= h0)) throw DomainError("h_max must be at least h0");
  SweepResult out;
  for (int m = 1; m * h0 <= h_max * (1.0 + 1e-12); ++m) {
    const double h = m * h0;
    PeriodOutcome po;
    po.h = h;
    try {
      const DecayTarget target = alpha_ref(sor, por, delta_t, h, options.norm_scale);
      po.alpha_ref = target.alpha_ref;
      SynthOptions opt = options;
      if (!(opt.wcet < h)) throw SchedulabilityError("wcet exceeds period");
      const SynthesisResult res = solve_bsc(discretize(plant, h), sor, target, opt);
      if (res.feasible()) {
        po.feasible = true;
        po.alpha = res.controller->alpha;
        out.controllers.push_back(*res.controller);
      } else {
        po.diagnostic = res.diagnostic;
      }
    } catch (const Error& e) {
      po.diagnostic = e.kind() + ": " + e.what();
    }
    out.outcomes.push_back(std::move(po));
  }
  if (out.controllers.empty()) {
    out.advice = "no period in [" + std::to_string(h0) + ", " + std::to_string(h_max) +
                 "] s admits a backup controller for deadline " + std::to_string(delta_t) +
                 " s; extend the recovery deadline to lower the required decay rate";
  }
  return out;
}

namespace {

bool converged(const MatrixXd& next, const MatrixXd& prev) {
  return (next - prev).norm() <= 1e-10 * std::max(1.0, next.norm());
}

}  // namespace

MatrixXd synth_poc(const DiscreteLoop& loop, const MatrixXd& q_cost, const MatrixXd& r_cost) {
  const MatrixXd& a = loop.a;
  const MatrixXd& b = loop.b;
  if (q_cost.rows() != a.rows() || r_cost.rows() != b.cols()) throw DimensionError("LQR cost dimensions");
  MatrixXd p = q_cost;
  for (int it = 0; it < 10000; ++it) {
    const MatrixXd s = r_cost + b.transpose() * p * b;
    const MatrixXd bpa = b.transpose() * p * a;
    MatrixXd next = q_cost + a.transpose() * p * a - bpa.transpose() * s.ldlt().solve(bpa);
    next = 0.5 * (next + next.transpose()).eval();
    if (!next.allFinite()) break;
    if (converged(next, p)) {
      const MatrixXd k = (r_cost + b.transpose() * next * b).ldlt().solve(b.transpose() * next * a);
      if (!(spectral_radius(a - b * k) < 1.0)) throw ConvergenceError("LQR gain is not stabilizing");
      return k;
    }
    p = std::move(next);
  }
  throw ConvergenceError("discrete Riccati iteration did not converge in 10^4 iterations");
}

MatrixXd synth_kalman(const DiscreteLoop& loop, const MatrixXd& c_out, const MatrixXd& q_w, const MatrixXd& r_v) {
  const MatrixXd& a = loop.a;
  if (c_out.cols() != a.rows() || q_w.rows() != a.rows() || r_v.rows() != c_out.rows())
    throw DimensionError("Kalman dimensions");
  MatrixXd sigma = q_w;
  for (int it = 0; it < 10000; ++it) {
    const MatrixXd s = c_out * sigma * c_out.transpose() + r_v;
    const MatrixXd gain = a * sigma * c_out.transpose() * s.inverse();
    MatrixXd next = a * sigma * a.transpose() + q_w - gain * c_out * sigma * a.transpose();
    next = 0.5 * (next + next.transpose()).eval();
    if (!next.allFinite()) break;
    if (converged(next, sigma)) {
      const MatrixXd s_final = c_out * next * c_out.transpose() + r_v;
      const MatrixXd l = a * next * c_out.transpose() * s_final.inverse();
      if (!(spectral_radius(a - l * c_out) < 1.0)) throw ConvergenceError("observer gain is not stabilizing");
      return l;
    }
    sigma = std::move(next);
  }
  throw ConvergenceError("dual Riccati iteration did not converge in 10^4 iterations");
}

}  // namespace bsc
