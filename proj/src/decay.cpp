#include "bsc/decay.hpp"

#include <cmath>
#include <string>

#include "bsc/errors.hpp"

namespace bsc {

void RecoverySpec::validate() const {
  if (!(delta_t > 0.0)) throw DomainError("recovery deadline must be positive");
  if (gamma && !(*gamma > 0.0)) throw DomainError("GUES rate gamma must be positive");
  if (m_const && !(*m_const > 0.0)) throw DomainError("GUES constant M must be positive");
  if (delta_small && !(*delta_small > 0.0 && *delta_small < 1.0))
    throw DomainError("GUES contraction delta must lie in (0, 1)");
}

double gamma_to_alpha(double gamma) {
  if (!(gamma > 0.0)) throw DomainError("gamma must be positive");
  return -std::expm1(-2.0 * gamma);
}

double alpha_to_gamma(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0, 1)");
  return -std::log1p(-alpha) / 2.0;
}

int deadline_steps(double delta_t, double h) {
  if (!(h > 0.0)) throw DomainError("sampling period must be positive");
  // Periods like 0.02 are not exact in binary; absorb representation error.
  return static_cast<int>(std::floor(delta_t / h + 1e-9));
}

bool strictly_inside(const Polytope& inner, const Polytope& outer) {
  if (inner.dim() != outer.dim()) throw DimensionError("polytope dimensions differ");
  for (const auto& v : inner.vertices()) {
    if (!(outer.slacks(v).minCoeff() > 0.0)) return false;
  }
  return true;
}

DecayTarget alpha_ref(const Polytope& sor, const Polytope& por, double delta_t, double h) {
  if (!(delta_t > 0.0)) throw DomainError("recovery deadline must be positive");
  const int dk = deadline_steps(delta_t, h);
  if (dk < 1) {
    throw DeadlineInfeasible("deadline " + std::to_string(delta_t) + " s is shorter than the period " +
                             std::to_string(h) + " s");
  }
  if (!strictly_inside(por, sor)) throw GeometryError("POR is not strictly inside the SOR");
  const double inner = boundary_norm_extrema(por).min_norm;
  const double outer = boundary_norm_extrema(sor).max_norm;
  const double ratio = inner / outer;
  DecayTarget t;
  t.h = h;
  t.delta_k = dk;
  // 1 - r^(2/dk) computed without cancellation for r close to 1.
  t.alpha_ref = -std::expm1(2.0 / dk * std::log(ratio));
  if (!(t.alpha_ref > 0.0 && t.alpha_ref < 1.0))
    throw GeometryError("decay target outside (0, 1); POR must be strictly interior to the SOR");
  return t;
}

DecayTarget alpha_ref(const Polytope& sor, const Polytope& por, double delta_t, double h, const VectorXd& norm_scale) {
  if (norm_scale.size() == 0) return alpha_ref(sor, por, delta_t, h);
  return alpha_ref(rescale(sor, norm_scale), rescale(por, norm_scale), delta_t, h);
}

}  // namespace bsc
