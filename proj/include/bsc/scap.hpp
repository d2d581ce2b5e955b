#pragma once

#include <cstddef>
#include <optional>
#include <string_view>
#include <utility>
#include <vector>

#include "bsc/synth.hpp"
#include "bsc/sysmodel.hpp"

namespace bsc {

/// Log barrier over the SOR facets: sum_j -log(b_j - a_j^T x). Lower is safer.
class GlobalBarrier {
 public:
  explicit GlobalBarrier(Polytope sor) : sor_(std::move(sor)) {}
  const Polytope& sor() const { return sor_; }
  /// Throws BarrierDomainError unless x is strictly inside the SOR.
  double operator()(const VectorXd& x) const;

 private:
  Polytope sor_;
};

double glbf(const GlobalBarrier& b, const VectorXd& x);

/// Piecewise-constant utilization bound; entry i applies on [t_i, t_{i+1}).
class UtilizationBudget {
 public:
  struct Entry {
    double t_start;
    double u_max;
  };
  explicit UtilizationBudget(std::vector<Entry> schedule);
  static UtilizationBudget constant(double u_max) { return UtilizationBudget({{0.0, u_max}}); }
  /// Budget that admits a single task of execution time `wcet` at periods >= h_min.
  static UtilizationBudget from_min_periods(double wcet, const std::vector<std::pair<double, double>>& t_hmin);

  double u_max_at(double t) const;
  const std::vector<Entry>& schedule() const { return schedule_; }

 private:
  std::vector<Entry> schedule_;
};

/// wcet / h; SchedulabilityError unless 0 < wcet < h.
double utilization(double wcet, double h);

struct ControllerTuple {
  BackupController bsc;
  double util = 0.0;
  double sbf(const VectorXd& x) const { return bsc.barrier(x); }
};

/// Sorts by period (stable) and attaches utilizations.
std::vector<ControllerTuple> make_tuples(std::vector<BackupController> bscs);

/// argmax of alpha_i V_i(x) over tuples with V_i(x) - c_i <= 0. Ties go to the
/// larger period, then the lower index.
std::optional<std::size_t> policy_pi(const std::vector<ControllerTuple>& tuples, const VectorXd& x);

struct PocSpec {
  MatrixXd gain;
  double h = 0.0;
  double wcet = 0.0;
  VectorXd center;
  VectorXd control(const VectorXd& x) const { return -gain * (x - center); }
};

using ControllerId = int;
inline constexpr ControllerId kPocId = -1;

enum class SwitchReason { por_entry, decay_argmax, budget_period_up, notify };
std::string_view to_string(SwitchReason r);

struct SwitchEvent {
  double t;
  ControllerId from;
  ControllerId to;
  SwitchReason reason;
  double util;      // of the incoming controller
  double delta_lb;
};

struct ScapDecision {
  ControllerId active = kPocId;
  bool switched = false;
  std::optional<SwitchReason> reason;
  double util = 0.0;  // of the controller that runs until the next instant
  double u_max = 0.0;
  double glbf = 0.0;
  double delta_lb = 0.0;
  bool notify = false;
};

struct ScapState {
  std::vector<double> lb_window;
  double delta_lb = 0.0;
  int dwell = 0;
  ControllerId active = kPocId;
  double decay_best = 0.0;
  bool notify_flag = false;
};

struct ScapOptions {
  int dwell_reset = 2;
  // The loop is taken to have been under the POC before the first instant, so
  // the first call may switch immediately.
  int initial_dwell = 0;
};

class Scap {
 public:
  Scap(std::vector<BackupController> bscs, PocSpec poc, const Polytope& sor, Polytope por, UtilizationBudget budget,
       double delta_t, ScapOptions options = {});

  /// Seeds the GLBF window with glbf(x0) and makes the POC active.
  void reset(const VectorXd& x0);
  /// One sampling instant of the active controller.
  ScapDecision step(const VectorXd& x, double t);

  const ScapState& state() const { return state_; }
  const std::vector<ControllerTuple>& tuples() const { return tuples_; }
  const PocSpec& poc() const { return poc_; }
  const Polytope& por() const { return por_; }
  const GlobalBarrier& barrier() const { return barrier_; }
  const UtilizationBudget& budget() const { return budget_; }
  const std::vector<SwitchEvent>& events() const { return events_; }

  double period_of(ControllerId id) const;
  double util_of(ControllerId id) const;
  VectorXd control(ControllerId id, const VectorXd& x) const;

 private:
  std::vector<ControllerTuple> tuples_;
  PocSpec poc_;
  GlobalBarrier barrier_;
  Polytope por_;
  UtilizationBudget budget_;
  ScapOptions options_;
  std::size_t window_len_;
  ScapState state_;
  std::vector<SwitchEvent> events_;
};

}  // namespace bsc
