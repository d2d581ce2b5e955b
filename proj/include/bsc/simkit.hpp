#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "bsc/scap.hpp"
#include "bsc/sysmodel.hpp"

namespace bsc {

// Impulsive disturbance: at the first sampling instant at or after t the
// plant state is replaced by x (deviation coordinates).
struct StateKick {
  double t = 0.0;
  VectorXd x;
};

struct SimConfig {
  double t_end = 3.0;
  double fine_step = 1e-3;
  bool noise_on = false;
  std::uint64_t seed = 0;
  bool observer_on = false;
  VectorXd x0;
  std::optional<VectorXd> xhat0;  // observer start; defaults to x0
  double deadline = 2.5;
  std::vector<StateKick> kicks;  // sorted by time

  void validate(double min_period) const;
};

enum class Outcome { recovered, deadline_missed, safety_violated, unrecoverable };
std::string_view to_string(Outcome o);

/// One row per sampling instant of the active controller.
struct SimTrace {
  std::vector<double> times;
  std::vector<VectorXd> states;
  std::vector<VectorXd> estimates;  // empty unless the observer ran
  std::vector<VectorXd> inputs;
  std::vector<ControllerId> active_controller;
  std::vector<double> periods;
  std::vector<double> glbf_values;
  std::vector<double> utils;
  std::vector<double> u_max;
  std::vector<bool> notify;
  std::vector<bool> kicked;  // a kick landed at this row
  std::vector<SwitchEvent> switch_events;

  Outcome outcome = Outcome::deadline_missed;
  double outcome_time = 0.0;
  std::optional<double> recovered_at;
  std::optional<double> safety_violated_at;
  // Feedback state outside the POR and every SFIR (noise, estimation error, or
  // the POC after recovery). The run stops there.
  std::optional<double> unrecoverable_at;
  int intersample_exits = 0;  // fine steps outside the SOR between samples

  std::size_t rows() const { return times.size(); }
};

/// Continuous plant under zero-order hold: RK4 over h with `steps` substeps.
VectorXd propagate_zoh(const LinearPlant& plant, const VectorXd& x, const VectorXd& u, double h, int steps);

/// Runs one closed loop. `scap` is reset to config.x0 first.
SimTrace simulate(const LinearPlant& plant, Scap& scap, const SimConfig& config);

using StateSampler = std::function<VectorXd(std::mt19937_64&)>;

/// Uniform rejection sampler on (SOR \ POR) intersected with the union of SFIRs.
/// The SOR must be a box; GeometryError after 10^6 rejections.
StateSampler sample_recovery_band(const Scap& scap);
/// Uniform sampler inside a box.
StateSampler sample_box(const Polytope& box);

struct RunRecord {
  std::uint64_t seed;
  VectorXd x0;
  Outcome outcome;
  double outcome_time;
  bool sor_exit;
};

struct BatchSummary {
  int n_runs = 0;
  double recovery_rate = 0.0;
  double max_recovery_time = 0.0;
  int violations_count = 0;
  int deadline_misses = 0;
  int unrecoverable_count = 0;
  std::vector<RunRecord> runs;
};

/// Independent runs; run r uses a seed derived from (config.seed, r) for both
/// the initial state and the noise stream.
BatchSummary batch_recovery(const LinearPlant& plant, const Scap& scap, const SimConfig& config, int n_runs,
                            const StateSampler& sampler);

struct DecayAudit {
  bool passed = true;
  int checked = 0;
  int skipped = 0;  // pairs under the POC or across a kick
  double worst_margin = -std::numeric_limits<double>::infinity();  // (V+ - (1-a)V) / V
  std::optional<std::size_t> failing_row;
};

/// Per-step certificate audit: V_i(x[k+1]) <= (1 - a_i) V_i(x[k]) + tol V_i(x[k])
/// for every row k run by backup controller i.
DecayAudit check_decay_trace(const SimTrace& trace, const std::vector<ControllerTuple>& tuples, double tol = 1e-7);

/// Columns: t, x_1..x_n, [xhat_1..xhat_n], u_1..u_p, controller_id, period_ms, glbf, util
void write_trace_csv(std::ostream& os, const SimTrace& trace);

std::string trace_basename(const std::string& benchmark, const std::string& scenario, std::uint64_t seed);

}  // namespace bsc
