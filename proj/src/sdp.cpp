#include "bsc/sdp.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <optional>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "bsc/errors.hpp"

namespace bsc::sdp {

// ---------------------------------------------------------------------------
// Affine expressions

Affine::Affine(int rows, int cols) : constant_(MatrixXd::Zero(rows, cols)) {}

Affine Affine::constant(const MatrixXd& c) {
  Affine a(static_cast<int>(c.rows()), static_cast<int>(c.cols()));
  a.constant_ = c;
  return a;
}

void Affine::add_term(int index, const MatrixXd& coeff) {
  if (coeff.rows() != rows() || coeff.cols() != cols()) throw DimensionError("affine term shape mismatch");
  auto [it, inserted] = terms_.try_emplace(index, coeff);
  if (!inserted) it->second += coeff;
}

MatrixXd Affine::eval(const VectorXd& x) const {
  MatrixXd out = constant_;
  for (const auto& [k, c] : terms_) out += x(k) * c;
  return out;
}

Affine Affine::transpose() const {
  Affine out = constant(constant_.transpose());
  for (const auto& [k, c] : terms_) out.terms_.emplace(k, c.transpose());
  return out;
}

Affine Affine::row(int r) const {
  Affine out = constant(constant_.row(r));
  for (const auto& [k, c] : terms_) out.terms_.emplace(k, c.row(r));
  return out;
}

bool Affine::is_symmetric() const {
  if (rows() != cols()) return false;
  if ((constant_ - constant_.transpose()).cwiseAbs().maxCoeff() > 1e-12) return false;
  for (const auto& [k, c] : terms_) {
    if ((c - c.transpose()).cwiseAbs().maxCoeff() > 1e-12) return false;
  }
  return true;
}

Affine& Affine::operator+=(const Affine& rhs) {
  if (rhs.rows() != rows() || rhs.cols() != cols()) throw DimensionError("affine sum shape mismatch");
  constant_ += rhs.constant_;
  for (const auto& [k, c] : rhs.terms_) add_term(k, c);
  return *this;
}

Affine& Affine::operator-=(const Affine& rhs) {
  if (rhs.rows() != rows() || rhs.cols() != cols()) throw DimensionError("affine difference shape mismatch");
  constant_ -= rhs.constant_;
  for (const auto& [k, c] : rhs.terms_) add_term(k, -c);
  return *this;
}

Affine& Affine::operator*=(double s) {
  constant_ *= s;
  for (auto& [k, c] : terms_) c *= s;
  return *this;
}

Affine operator*(const MatrixXd& left, const Affine& a) {
  if (left.cols() != a.rows()) throw DimensionError("affine left-product shape mismatch");
  Affine out = Affine::constant(left * a.constant_);
  for (const auto& [k, c] : a.terms_) out.terms_.emplace(k, left * c);
  return out;
}

Affine operator*(const Affine& a, const MatrixXd& right) {
  if (a.cols() != right.rows()) throw DimensionError("affine right-product shape mismatch");
  Affine out = Affine::constant(a.constant_ * right);
  for (const auto& [k, c] : a.terms_) out.terms_.emplace(k, c * right);
  return out;
}

Affine Affine::blocks(const Affine& tl, const Affine& tr, const Affine& bl, const Affine& br) {
  if (tl.rows() != tr.rows() || bl.rows() != br.rows() || tl.cols() != bl.cols() || tr.cols() != br.cols())
    throw DimensionError("block expression shapes do not tile");
  const int r0 = tl.rows(), r1 = bl.rows(), c0 = tl.cols(), c1 = tr.cols();
  Affine out(r0 + r1, c0 + c1);
  auto place = [&](const Affine& part, int r, int c) {
    out.constant_.block(r, c, part.rows(), part.cols()) = part.constant_;
    for (const auto& [k, coeff] : part.terms_) {
      MatrixXd full = MatrixXd::Zero(r0 + r1, c0 + c1);
      full.block(r, c, part.rows(), part.cols()) = coeff;
      out.add_term(k, full);
    }
  };
  place(tl, 0, 0);
  place(tr, 0, c0);
  place(bl, r0, 0);
  place(br, r0, c0);
  return out;
}

// ---------------------------------------------------------------------------
// Problem

MatrixVar SdpProblem::add_symmetric(const std::string& name, int n) {
  MatrixVar v{name, n, n, true, num_scalars_, n * (n + 1) / 2, Affine(n, n)};
  int k = num_scalars_;
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i <= j; ++i, ++k) {
      MatrixXd e = MatrixXd::Zero(n, n);
      e(i, j) = 1.0;
      e(j, i) = 1.0;
      v.expr.add_term(k, e);
    }
  }
  num_scalars_ += v.count;
  vars_.push_back(v);
  return v;
}

MatrixVar SdpProblem::add_matrix(const std::string& name, int rows, int cols) {
  MatrixVar v{name, rows, cols, false, num_scalars_, rows * cols, Affine(rows, cols)};
  int k = num_scalars_;
  for (int j = 0; j < cols; ++j) {
    for (int i = 0; i < rows; ++i, ++k) {
      MatrixXd e = MatrixXd::Zero(rows, cols);
      e(i, j) = 1.0;
      v.expr.add_term(k, e);
    }
  }
  num_scalars_ += v.count;
  vars_.push_back(v);
  return v;
}

void pack(const MatrixVar& var, const MatrixXd& value, VectorXd& x) {
  if (value.rows() != var.rows || value.cols() != var.cols) throw DimensionError("pack: shape mismatch for " + var.name);
  if (x.size() < var.offset + var.count) throw DimensionError("pack: decision vector too short");
  int k = var.offset;
  for (int j = 0; j < var.cols; ++j) {
    const int top = var.symmetric ? j + 1 : var.rows;
    for (int i = 0; i < top; ++i, ++k) x(k) = value(i, j);
  }
}

void SdpProblem::check_index_range(const Affine& e) const {
  for (const auto& [k, c] : e.terms()) {
    if (k < 0 || k >= num_scalars_) throw DimensionError("expression references an undeclared variable");
  }
}

void SdpProblem::add_psd(Affine expr, std::string label) {
  if (!expr.is_symmetric()) throw DimensionError("PSD constraint '" + label + "' is not symmetric");
  check_index_range(expr);
  psd_.push_back({std::move(expr), std::move(label)});
}

void SdpProblem::add_soc(Affine v, Affine s, std::string label) {
  if (v.cols() != 1) v = v.transpose();
  if (v.cols() != 1 || s.rows() != 1 || s.cols() != 1)
    throw DimensionError("SOC constraint '" + label + "' needs a vector and a scalar");
  check_index_range(v);
  check_index_range(s);
  soc_.push_back({std::move(v), std::move(s), std::move(label)});
}

void SdpProblem::add_logdet_objective(Affine g, double weight) {
  if (!g.is_symmetric()) throw DimensionError("logdet objective argument must be symmetric");
  if (!(weight > 0.0)) throw DomainError("logdet objective weight must be positive");
  check_index_range(g);
  logdet_.push_back({std::move(g), weight});
}

void SdpProblem::add_linear_objective(int index, double coeff) {
  if (index < 0 || index >= num_scalars_) throw DimensionError("objective references an undeclared variable");
  linear_[index] += coeff;
}

double SdpProblem::objective(const VectorXd& x) const {
  double f = 0.0;
  for (const auto& [k, c] : linear_) f += c * x(k);
  for (const auto& term : logdet_) {
    Eigen::LLT<MatrixXd> llt(term.g.eval(x));
    if (llt.info() != Eigen::Success) return -std::numeric_limits<double>::infinity();
    f += term.weight * 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  }
  return f;
}

double SdpProblem::max_violation(const VectorXd& x) const {
  double worst = 0.0;
  for (const auto& c : psd_) {
    const MatrixXd f = c.expr.eval(x);
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(f, Eigen::EigenvaluesOnly);
    worst = std::max(worst, -es.eigenvalues().minCoeff() / (1.0 + f.norm()));
  }
  for (const auto& c : soc_) {
    const double lhs = c.v.eval(x).norm();
    const double rhs = c.s.eval(x)(0, 0);
    worst = std::max(worst, (lhs - rhs) / (1.0 + std::abs(rhs)));
  }
  return worst;
}

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::numerical_failure: return "numerical-failure";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// Barrier method

namespace {

// -weight * logdet(F0 + sum x_idx F_i)
struct LogdetBlock {
  int dim = 0;
  MatrixXd f0;
  std::vector<int> idx;
  std::vector<MatrixXd> fi;
  double weight = 1.0;
  bool objective = false;  // scaled by t in phase II
};

// sign * x_idx + offset > 0
struct Bound {
  int idx;
  double sign;
  double offset;
};

struct Compiled {
  int n = 0;
  std::vector<LogdetBlock> blocks;
  std::vector<Bound> bounds;
  VectorXd c;  // maximize c^T x (plus the objective logdet blocks)
  int barrier_dims = 0;
};

LogdetBlock block_from(const Affine& e, double weight, bool objective) {
  LogdetBlock b;
  b.dim = e.rows();
  b.f0 = e.constant_part();
  for (const auto& [k, c] : e.terms()) {
    b.idx.push_back(k);
    b.fi.push_back(c);
  }
  b.weight = weight;
  b.objective = objective;
  return b;
}

// ||v|| <= s  <=>  [[s I, v], [v^T, s]] >= 0
Affine arrow(const SocConstraint& soc) {
  const int k = soc.v.rows();
  Affine diag_s(k, k);
  diag_s += Affine::constant(MatrixXd::Identity(k, k) * soc.s.constant_part()(0, 0));
  for (const auto& [idx, c] : soc.s.terms()) diag_s.add_term(idx, MatrixXd::Identity(k, k) * c(0, 0));
  return Affine::blocks(diag_s, soc.v, soc.v.transpose(), soc.s);
}

Compiled compile(const SdpProblem& p, double box_radius) {
  Compiled out;
  out.n = p.num_scalars();
  for (const auto& c : p.psd_constraints()) out.blocks.push_back(block_from(c.expr, 1.0, false));
  for (const auto& c : p.soc_constraints()) out.blocks.push_back(block_from(arrow(c), 1.0, false));
  for (const auto& t : p.logdet_terms()) out.blocks.push_back(block_from(t.g, t.weight, true));
  for (int i = 0; i < out.n; ++i) {
    out.bounds.push_back({i, -1.0, box_radius});
    out.bounds.push_back({i, 1.0, box_radius});
  }
  out.c = VectorXd::Zero(out.n);
  for (const auto& [k, v] : p.linear_objective()) out.c(k) += v;
  for (const auto& b : out.blocks) {
    if (!b.objective) out.barrier_dims += b.dim;
  }
  out.barrier_dims += static_cast<int>(out.bounds.size());
  return out;
}

MatrixXd assemble(const LogdetBlock& b, const VectorXd& x) {
  MatrixXd f = b.f0;
  for (std::size_t a = 0; a < b.idx.size(); ++a) f.noalias() += x(b.idx[a]) * b.fi[a];
  return f;
}

struct Eval {
  double value = 0.0;
  VectorXd grad;
  MatrixXd hess;
};

// Value of  t * f0(x) + barrier(x)  where f0 = -c^T x - sum w logdet G.
// Returns nullopt outside the domain.
std::optional<Eval> evaluate(const Compiled& cp, const VectorXd& x, double t, bool derivs) {
  Eval e;
  if (derivs) {
    e.grad = VectorXd::Zero(cp.n);
    e.hess = MatrixXd::Zero(cp.n, cp.n);
  }
  e.value = -t * cp.c.dot(x);
  if (derivs) e.grad -= t * cp.c;

  for (const auto& b : cp.bounds) {
    const double r = b.sign * x(b.idx) + b.offset;
    if (!(r > 0.0)) return std::nullopt;
    e.value -= std::log(r);
    if (derivs) {
      e.grad(b.idx) -= b.sign / r;
      e.hess(b.idx, b.idx) += 1.0 / (r * r);
    }
  }

  std::vector<MatrixXd> m;
  for (const auto& b : cp.blocks) {
    const MatrixXd f = assemble(b, x);
    Eigen::LLT<MatrixXd> llt(f);
    if (llt.info() != Eigen::Success) return std::nullopt;
    const VectorXd d = llt.matrixLLT().diagonal();
    if (!(d.array() > 0.0).all() || !d.allFinite()) return std::nullopt;
    const double w = b.objective ? t * b.weight : b.weight;
    e.value -= w * 2.0 * d.array().log().sum();
    if (!derivs) continue;
    const MatrixXd inv = llt.solve(MatrixXd::Identity(b.dim, b.dim));
    const std::size_t k = b.idx.size();
    m.resize(k);
    for (std::size_t a = 0; a < k; ++a) {
      m[a].noalias() = inv * b.fi[a];
      e.grad(b.idx[a]) -= w * m[a].trace();
    }
    for (std::size_t a = 0; a < k; ++a) {
      for (std::size_t c = a; c < k; ++c) {
        const double h = w * m[a].cwiseProduct(m[c].transpose()).sum();
        e.hess(b.idx[a], b.idx[c]) += h;
        if (c != a) e.hess(b.idx[c], b.idx[a]) += h;
      }
    }
  }
  return e;
}

struct PathResult {
  VectorXd x;
  bool converged = false;
  bool stopped_early = false;
  int newton_steps = 0;
  double gap = std::numeric_limits<double>::infinity();  // bound at the last centered point
};

// Barrier path following from a strictly feasible x. `early_stop` is polled
// after every accepted step.
template <typename StopFn>
PathResult follow_path(const Compiled& cp, VectorXd x, const SolverOptions& opt, int& budget, StopFn early_stop) {
  PathResult res;
  res.x = x;
  double t = 1.0;
  constexpr double kCenterTol = 1e-9;
  constexpr int kMaxCentering = 80;
  while (true) {
    bool centered = false;
    for (int it = 0; it < kMaxCentering && budget > 0; ++it) {
      const auto ev = evaluate(cp, x, t, true);
      if (!ev) break;
      const MatrixXd h = ev->hess + 1e-14 * (1.0 + ev->hess.diagonal().cwiseAbs().maxCoeff()) *
                                         MatrixXd::Identity(cp.n, cp.n);
      Eigen::LDLT<MatrixXd> ldlt(h);
      const VectorXd dx = -ldlt.solve(ev->grad);
      if (!dx.allFinite()) break;
      const double dec = -ev->grad.dot(dx);
      if (dec / 2.0 <= kCenterTol) {
        centered = true;
        break;
      }
      double step = 1.0;
      bool accepted = false;
      for (int ls = 0; ls < 60; ++ls, step *= 0.5) {
        const VectorXd trial = x + step * dx;
        const auto tv = evaluate(cp, trial, t, false);
        if (tv && tv->value <= ev->value - 0.25 * step * dec) {
          x = trial;
          accepted = true;
          break;
        }
      }
      --budget;
      ++res.newton_steps;
      if (!accepted || step < 1e-10) {
        // Round-off floor: the decrease is no longer measurable. Accept the
        // point as centered only if the decrement is already modest.
        centered = dec / 2.0 < 1e-4;
        break;
      }
      if (early_stop(x)) {
        res.x = x;
        res.stopped_early = true;
        return res;
      }
    }
    if (!centered) return res;
    res.x = x;
    res.gap = cp.barrier_dims / t;
    if (res.gap < opt.gap_tol) {
      res.converged = true;
      return res;
    }
    t *= opt.mu;
  }
}

}  // namespace

SolveResult BarrierSolver::solve(const SdpProblem& problem, const SolverOptions& opt) const {
  const auto start = std::chrono::steady_clock::now();
  SolveResult out;
  auto finish = [&](SolveStatus status, std::string msg) {
    out.report.status = status;
    out.report.message = std::move(msg);
    out.report.solve_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
  };

  const Compiled cp = compile(problem, opt.box_radius);
  const int n = cp.n;
  int budget = opt.max_newton_steps;

  // Phase I:  minimize s  s.t.  F_k(x) + s I >= 0, G_l(x) + s I >= 0, s > -1.
  Compiled p1;
  p1.n = n + 1;
  const int s_idx = n;
  for (LogdetBlock b : cp.blocks) {
    b.idx.push_back(s_idx);
    b.fi.push_back(MatrixXd::Identity(b.dim, b.dim));
    b.weight = 1.0;
    b.objective = false;
    p1.blocks.push_back(std::move(b));
  }
  p1.bounds = cp.bounds;
  p1.bounds.push_back({s_idx, 1.0, 1.0});
  p1.bounds.push_back({s_idx, -1.0, opt.box_radius});
  p1.c = VectorXd::Zero(p1.n);
  p1.c(s_idx) = -1.0;
  p1.barrier_dims = cp.barrier_dims + 2;
  for (const auto& b : cp.blocks) {
    if (b.objective) p1.barrier_dims += b.dim;
  }

  VectorXd x0 = VectorXd::Zero(p1.n);
  double worst = 0.0;
  for (const auto& b : p1.blocks) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(assemble(cp.blocks[&b - p1.blocks.data()], x0.head(n)),
                                               Eigen::EigenvaluesOnly);
    worst = std::max(worst, -es.eigenvalues().minCoeff());
  }
  x0(s_idx) = worst + 1.0;
  if (!(x0(s_idx) < opt.box_radius)) return finish(SolveStatus::numerical_failure, "phase I start exceeds box");

  const double margin = opt.feasibility_margin;
  const PathResult ph1 = follow_path(p1, x0, opt, budget, [&](const VectorXd& x) { return x(s_idx) < -margin; });
  out.report.newton_steps += ph1.newton_steps;
  const double s_final = ph1.x(s_idx);
  if (!(s_final < 0.0)) {
    out.x = ph1.x.head(n);
    out.report.objective_value = s_final;
    if (ph1.converged || ph1.stopped_early || s_final > 1e-9)
      return finish(SolveStatus::infeasible, "phase I optimum " + std::to_string(s_final) + " >= 0");
    return finish(SolveStatus::numerical_failure, "phase I did not converge");
  }
  VectorXd x = ph1.x.head(n);

  if (opt.feasibility_only) {
    out.x = x;
    out.report.objective_value = s_final;
    out.report.residuals = problem.max_violation(x);
    return finish(SolveStatus::optimal, "strictly feasible point found");
  }

  const PathResult ph2 = follow_path(cp, x, opt, budget, [](const VectorXd&) { return false; });
  out.report.newton_steps += ph2.newton_steps;
  out.x = ph2.x;
  out.report.objective_value = problem.objective(out.x);
  out.report.residuals = problem.max_violation(out.x);
  for (int i = 0; i < n; ++i) {
    if (std::abs(out.x(i)) > 0.99 * opt.box_radius)
      return finish(SolveStatus::numerical_failure, "iterate reached the variable box; objective may be unbounded");
  }
  if (ph2.converged) return finish(SolveStatus::optimal, "");
  if (ph2.gap < opt.accept_gap)
    return finish(SolveStatus::optimal, "stalled at duality-gap bound " + std::to_string(ph2.gap));
  return finish(SolveStatus::numerical_failure, "barrier path stalled at gap bound " + std::to_string(ph2.gap));
}

std::unique_ptr<ConicSolver> default_solver() { return std::make_unique<BarrierSolver>(); }

}  // namespace bsc::sdp
