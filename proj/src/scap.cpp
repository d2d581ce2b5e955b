#include "bsc/scap.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <string>

#include "bsc/errors.hpp"

namespace bsc {

namespace {

constexpr double kUtilTol = 1e-12;

// Decay argmax restricted by `keep`. Scores within a relative 1e-12 count as
// ties, broken toward the larger period and then the lower index.
template <typename Keep>
std::optional<std::size_t> best_of(const std::vector<ControllerTuple>& tuples, const VectorXd& x, Keep keep,
                                   double* score_out = nullptr) {
  std::optional<std::size_t> best;
  double best_score = 0.0;
  for (std::size_t i = 0; i < tuples.size(); ++i) {
    const auto& tp = tuples[i];
    if (!(tp.sbf(x) <= 0.0) || !keep(i)) continue;
    const double score = tp.bsc.alpha * tp.bsc.lyapunov(x);
    if (!best) {
      best = i;
      best_score = score;
      continue;
    }
    const double tol = 1e-12 * std::max(std::abs(score), std::abs(best_score));
    if (score > best_score + tol) {
      best = i;
      best_score = score;
    } else if (score >= best_score - tol && tp.bsc.h > tuples[*best].bsc.h) {
      best = i;
      best_score = std::max(score, best_score);
    }
  }
  if (score_out != nullptr) *score_out = best_score;
  return best;
}

}  // namespace

double GlobalBarrier::operator()(const VectorXd& x) const {
  const VectorXd s = sor_.slacks(x);
  double v = 0.0;
  for (int j = 0; j < s.size(); ++j) {
    if (!(s(j) > 0.0)) throw BarrierDomainError("state on or outside the SOR boundary (facet " + std::to_string(j) + ")");
    v -= std::log(s(j));
  }
  return v;
}

double glbf(const GlobalBarrier& b, const VectorXd& x) { return b(x); }

UtilizationBudget::UtilizationBudget(std::vector<Entry> schedule) : schedule_(std::move(schedule)) {
  if (schedule_.empty() || schedule_.front().t_start != 0.0)
    throw ConfigError("utilization budget must start at t = 0");
  for (std::size_t i = 0; i < schedule_.size(); ++i) {
    const auto& e = schedule_[i];
    if (!(e.u_max > 0.0 && e.u_max <= 1.0)) throw ConfigError("utilization bound outside (0, 1]");
    if (i > 0 && !(e.t_start > schedule_[i - 1].t_start))
      throw ConfigError("utilization budget times must be strictly increasing");
  }
}

UtilizationBudget UtilizationBudget::from_min_periods(double wcet,
                                                      const std::vector<std::pair<double, double>>& t_hmin) {
  std::vector<Entry> s;
  for (const auto& [t, h] : t_hmin) s.push_back({t, utilization(wcet, h)});
  return UtilizationBudget(std::move(s));
}

double UtilizationBudget::u_max_at(double t) const {
  auto it = std::upper_bound(schedule_.begin(), schedule_.end(), t,
                             [](double v, const Entry& e) { return v < e.t_start; });
  if (it == schedule_.begin()) return schedule_.front().u_max;
  return std::prev(it)->u_max;
}

double utilization(double wcet, double h) {
  if (!(wcet > 0.0) || !(h > 0.0)) throw SchedulabilityError("wcet and period must be positive");
  if (!(wcet < h)) throw SchedulabilityError("wcet must be shorter than the period");
  return wcet / h;
}

std::vector<ControllerTuple> make_tuples(std::vector<BackupController> bscs) {
  std::stable_sort(bscs.begin(), bscs.end(),
                   [](const BackupController& a, const BackupController& b) { return a.h < b.h; });
  std::vector<ControllerTuple> out;
  out.reserve(bscs.size());
  for (auto& b : bscs) {
    const double u = utilization(b.wcet, b.h);
    out.push_back({std::move(b), u});
  }
  return out;
}

std::optional<std::size_t> policy_pi(const std::vector<ControllerTuple>& tuples, const VectorXd& x) {
  return best_of(tuples, x, [](std::size_t) { return true; });
}

std::string_view to_string(SwitchReason r) {
  switch (r) {
    case SwitchReason::por_entry: return "por-entry";
    case SwitchReason::decay_argmax: return "decay-argmax";
    case SwitchReason::budget_period_up: return "budget-period-up";
    case SwitchReason::notify: return "notify";
  }
  return "?";
}

Scap::Scap(std::vector<BackupController> bscs, PocSpec poc, const Polytope& sor, Polytope por,
           UtilizationBudget budget, double delta_t, ScapOptions options)
    : tuples_(make_tuples(std::move(bscs))),
      poc_(std::move(poc)),
      barrier_(sor),
      por_(std::move(por)),
      budget_(std::move(budget)),
      options_(options) {
  if (tuples_.empty()) throw PreconditionError("SCAP needs at least one backup controller");
  if (!(delta_t > 0.0)) throw DomainError("recovery deadline must be positive");
  utilization(poc_.wcet, poc_.h);
  if (poc_.center.size() == 0) poc_.center = VectorXd::Zero(sor.dim());
  const double h_max = tuples_.back().bsc.h;
  // At least two samples so that the mean slope is defined.
  window_len_ = std::max<std::size_t>(2, static_cast<std::size_t>(std::ceil(delta_t / h_max - 1e-9)));
  state_.lb_window.assign(window_len_, 0.0);
}

double Scap::period_of(ControllerId id) const { return id == kPocId ? poc_.h : tuples_.at(id).bsc.h; }
double Scap::util_of(ControllerId id) const { return id == kPocId ? utilization(poc_.wcet, poc_.h) : tuples_.at(id).util; }
VectorXd Scap::control(ControllerId id, const VectorXd& x) const {
  return id == kPocId ? poc_.control(x) : tuples_.at(id).bsc.control(x);
}

void Scap::reset(const VectorXd& x0) {
  state_ = ScapState{};
  state_.lb_window.assign(window_len_, barrier_(x0));
  state_.dwell = options_.initial_dwell;
  state_.active = kPocId;
  events_.clear();
}

ScapDecision Scap::step(const VectorXd& x, double t) {
  ScapDecision d;
  auto& st = state_;

  d.glbf = barrier_(x);
  std::rotate(st.lb_window.begin(), st.lb_window.begin() + 1, st.lb_window.end());
  st.lb_window.back() = d.glbf;
  double slope = 0.0;
  for (std::size_t i = 1; i < st.lb_window.size(); ++i) slope += st.lb_window[i] - st.lb_window[i - 1];
  st.delta_lb = slope / static_cast<double>(st.lb_window.size() - 1);
  d.delta_lb = st.delta_lb;

  const double util = util_of(st.active);
  st.dwell -= 1;
  d.u_max = budget_.u_max_at(t);
  const bool over = util > d.u_max + kUtilTol;
  const bool in_por = contains(por_, x);

  ControllerId target = st.active;
  std::optional<SwitchReason> reason;
  bool notify = false;

  if (in_por && st.dwell <= 0) {
    target = kPocId;
    reason = SwitchReason::por_entry;
  } else if (st.dwell <= 0) {
    // Budget overruns also wait for the dwell counter, so every switch keeps
    // the outgoing controller for at least `dwell_reset` instants.
    const double u_max = d.u_max;
    auto fits = [&](std::size_t i) { return tuples_[i].util <= u_max + kUtilTol; };
    auto any = [](std::size_t) { return true; };
    double score = 0.0;
    std::optional<std::size_t> pick;
    if (!over) {
      pick = best_of(tuples_, x, fits, &score);
      reason = SwitchReason::decay_argmax;
      if (!pick) {
        pick = best_of(tuples_, x, any, &score);
        notify = pick.has_value();
        reason = SwitchReason::notify;
      }
    } else if (st.delta_lb < 0.0) {
      const double h_active = period_of(st.active);
      auto slower = [&](std::size_t i) { return tuples_[i].bsc.h > h_active; };
      pick = best_of(tuples_, x, [&](std::size_t i) { return slower(i) && fits(i); }, &score);
      reason = SwitchReason::budget_period_up;
      if (!pick) {
        notify = true;
        reason = SwitchReason::notify;
        pick = best_of(tuples_, x, slower, &score);
        if (!pick && st.active != kPocId && tuples_[st.active].sbf(x) <= 0.0) pick = st.active;
        if (!pick) pick = best_of(tuples_, x, any, &score);
      }
    } else {
      pick = best_of(tuples_, x, any, &score);
      notify = true;
      reason = SwitchReason::notify;
    }
    if (pick) {
      target = static_cast<ControllerId>(*pick);
      st.decay_best = score;
    } else if (!in_por) {
      throw UnrecoverableState("state outside the POR and outside every SFIR at t=" + std::to_string(t));
    } else {
      reason.reset();
    }
  }

  d.notify = notify;
  st.notify_flag = notify;
  if (target != st.active) {
    events_.push_back({t, st.active, target, *reason, util_of(target), st.delta_lb});
    st.active = target;
    st.dwell = options_.dwell_reset;
    d.switched = true;
    d.reason = reason;
  }
  d.active = st.active;
  d.util = util_of(st.active);
  return d;
}

}  // namespace bsc
