#pragma once

#include <optional>

#include "bsc/sysmodel.hpp"

namespace bsc {

/// Recovery requirement. Only `delta_t` drives synthesis; the GUES constants
/// are carried for reporting and are not used by the decay-rate bound.
struct RecoverySpec {
  double delta_t = 0.0;
  std::optional<double> gamma;
  std::optional<double> m_const;
  std::optional<double> delta_small;

  void validate() const;
};

/// Minimum per-step QLF decay needed at period h to meet the deadline.
struct DecayTarget {
  double h = 0.0;
  int delta_k = 0;
  double alpha_ref = 0.0;
};

/// QLF decay from a GUES rate: 1 - exp(-2 gamma).
double gamma_to_alpha(double gamma);
/// Inverse of gamma_to_alpha: -ln(1 - alpha) / 2.
double alpha_to_gamma(double alpha);

/// Number of whole sampling steps available before the deadline.
int deadline_steps(double delta_t, double h);

/// alpha_ref = 1 - (min |x| on dPOR / max |x| on dSOR)^(2 / delta_k).
/// Throws GeometryError when the POR is not strictly inside the SOR and
/// DeadlineInfeasible when delta_t < h.
DecayTarget alpha_ref(const Polytope& sor, const Polytope& por, double delta_t, double h);
/// Same bound with norms taken on x_i / norm_scale_i (per-axis units).
DecayTarget alpha_ref(const Polytope& sor, const Polytope& por, double delta_t, double h, const VectorXd& norm_scale);

/// True when every POR vertex satisfies every SOR facet strictly.
bool strictly_inside(const Polytope& inner, const Polytope& outer);

}  // namespace bsc
