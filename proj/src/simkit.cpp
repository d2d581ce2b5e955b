#include "bsc/simkit.hpp"

#include <cmath>
#include <map>
#include <ostream>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "bsc/errors.hpp"
#include "bsc/synth.hpp"

namespace bsc {

namespace {

bool strictly_inside(const Polytope& p, const VectorXd& x) { return (p.slacks(x).array() > 0.0).all(); }

// Square root of a PSD covariance (zero rows stay zero).
MatrixXd psd_sqrt(const MatrixXd& q) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (q + q.transpose()));
  const VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal();
}

std::uint64_t run_seed(std::uint64_t seed, std::uint64_t run) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(run), static_cast<std::uint32_t>(run >> 32)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

struct ObserverPeriod {
  MatrixXd a, b, l;
};

}  // namespace

void SimConfig::validate(double min_period) const {
  if (!(fine_step > 0.0)) throw ConfigError("fine_step must be positive");
  if (fine_step > min_period / 20.0 + 1e-15) throw ConfigError("fine_step must not exceed min period / 20");
  if (!(deadline > 0.0)) throw ConfigError("deadline must be positive");
  if (t_end < deadline) throw ConfigError("t_end must cover the deadline");
  for (std::size_t i = 0; i < kicks.size(); ++i) {
    if (!(kicks[i].t > 0.0)) throw ConfigError("kick times must be positive");
    if (i > 0 && !(kicks[i].t > kicks[i - 1].t)) throw ConfigError("kick times must increase");
  }
}

std::string_view to_string(Outcome o) {
  switch (o) {
    case Outcome::recovered: return "recovered";
    case Outcome::deadline_missed: return "deadline_missed";
    case Outcome::safety_violated: return "safety_violated";
    case Outcome::unrecoverable: return "unrecoverable";
  }
  return "?";
}

VectorXd propagate_zoh(const LinearPlant& plant, const VectorXd& x, const VectorXd& u, double h, int steps) {
  const double dt = h / steps;
  const VectorXd gu = plant.gamma * u;
  auto f = [&](const VectorXd& s) -> VectorXd { return plant.phi * s + gu; };
  VectorXd s = x;
  for (int i = 0; i < steps; ++i) {
    const VectorXd k1 = f(s);
    const VectorXd k2 = f(s + 0.5 * dt * k1);
    const VectorXd k3 = f(s + 0.5 * dt * k2);
    const VectorXd k4 = f(s + dt * k3);
    s += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return s;
}

SimTrace simulate(const LinearPlant& plant, Scap& scap, const SimConfig& config) {
  plant.validate();
  const int n = plant.states();
  if (config.x0.size() != n) throw DimensionError("x0 has the wrong dimension");

  // Every period lives on a common base grid (the shortest one).
  double base = scap.poc().h;
  for (const auto& tp : scap.tuples()) base = std::min(base, tp.bsc.h);
  auto ticks_of = [&](double h) {
    const double r = h / base;
    const long m = std::lround(r);
    if (m < 1 || std::abs(r - m) > 1e-9) throw ConfigError("controller periods must be multiples of the base period");
    return m;
  };
  ticks_of(scap.poc().h);
  for (const auto& tp : scap.tuples()) ticks_of(tp.bsc.h);
  config.validate(base);

  const Polytope& sor = scap.barrier().sor();
  auto check_start = [&](const VectorXd& s, const char* what) {
    if (s.size() != n) throw DimensionError(std::string(what) + " has the wrong dimension");
    if (!strictly_inside(sor, s)) throw PreconditionError(std::string(what) + " must lie strictly inside the SOR");
    bool covered = contains(scap.por(), s);
    for (const auto& tp : scap.tuples()) covered = covered || tp.sbf(s) <= 0.0;
    if (!covered) throw PreconditionError(std::string(what) + " lies outside the POR and outside every SFIR");
  };
  check_start(config.x0, "x0");
  for (const auto& k : config.kicks) check_start(k.x, "kick state");

  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const MatrixXd w_sqrt = psd_sqrt(plant.q_w);
  const MatrixXd v_sqrt = psd_sqrt(plant.r_v);
  auto draw = [&](int k) {
    VectorXd z(k);
    for (int i = 0; i < k; ++i) z(i) = gauss(rng);
    return z;
  };

  std::map<long, ObserverPeriod> observers;
  auto observer_for = [&](long ticks, double h) -> const ObserverPeriod& {
    auto it = observers.find(ticks);
    if (it != observers.end()) return it->second;
    const DiscreteLoop loop = discretize(plant, h);
    const MatrixXd l = synth_kalman(loop, plant.c_out, plant.q_w, plant.r_v);
    return observers.emplace(ticks, ObserverPeriod{loop.a, loop.b, l}).first->second;
  };

  SimTrace tr;
  VectorXd x = config.x0;
  VectorXd xhat = config.xhat0.value_or(config.x0);
  if (xhat.size() != n) throw DimensionError("xhat0 has the wrong dimension");
  scap.reset(config.observer_on ? xhat : x);

  const long end_ticks = static_cast<long>(std::floor(config.t_end / base + 1e-9));
  bool decided = false;
  long tick = 0;
  std::size_t next_kick = 0;
  while (tick <= end_ticks) {
    const double t = static_cast<double>(tick) * base;
    bool kicked = false;
    while (next_kick < config.kicks.size() && config.kicks[next_kick].t <= t + 1e-9) {
      x = config.kicks[next_kick++].x;
      kicked = true;
    }
    if (!strictly_inside(sor, x)) {
      tr.safety_violated_at = t;
      if (!decided) {
        tr.outcome = Outcome::safety_violated;
        tr.outcome_time = t;
      }
      break;
    }
    if (!decided && contains(scap.por(), x)) {
      decided = true;
      tr.outcome = Outcome::recovered;
      tr.outcome_time = t;
      tr.recovered_at = t;
    } else if (!decided && t > config.deadline) {
      decided = true;
      tr.outcome = Outcome::deadline_missed;
      tr.outcome_time = t;
    }

    VectorXd y = plant.c_out * x;
    if (config.noise_on) y += v_sqrt * draw(plant.outputs());
    const VectorXd& feedback = config.observer_on ? xhat : x;

    ScapDecision dec;
    try {
      dec = scap.step(feedback, t);
    } catch (const BarrierDomainError&) {
      // The estimate left the SOR; the controller has no safe action.
      tr.safety_violated_at = t;
      if (!decided) {
        tr.outcome = Outcome::safety_violated;
        tr.outcome_time = t;
      }
      break;
    } catch (const UnrecoverableState&) {
      tr.unrecoverable_at = t;
      if (!decided) {
        decided = true;
        tr.outcome = Outcome::unrecoverable;
        tr.outcome_time = t;
      }
      break;
    }
    const VectorXd u = scap.control(dec.active, feedback);
    const double h = scap.period_of(dec.active);
    const long step_ticks = ticks_of(h);

    tr.times.push_back(t);
    tr.states.push_back(x);
    if (config.observer_on) tr.estimates.push_back(xhat);
    tr.inputs.push_back(u);
    tr.active_controller.push_back(dec.active);
    tr.periods.push_back(h);
    tr.glbf_values.push_back(dec.glbf);
    tr.utils.push_back(dec.util);
    tr.u_max.push_back(dec.u_max);
    tr.notify.push_back(dec.notify);
    tr.kicked.push_back(kicked);

    if (config.observer_on) {
      const auto& ob = observer_for(step_ticks, h);
      xhat = ob.a * xhat + ob.b * u + ob.l * (y - plant.c_out * xhat);
    }

    const int sub = static_cast<int>(std::ceil(h / config.fine_step - 1e-9));
    const double dt = h / sub;
    for (int i = 0; i < sub; ++i) {
      x = propagate_zoh(plant, x, u, dt, 1);
      if (config.noise_on) x += std::sqrt(dt) * (w_sqrt * draw(n));
      if (i + 1 < sub && !strictly_inside(sor, x)) ++tr.intersample_exits;
    }
    tick += step_ticks;
  }
  if (!decided && !tr.safety_violated_at) {
    tr.outcome = Outcome::deadline_missed;
    tr.outcome_time = config.t_end;
  }
  tr.switch_events = scap.events();
  return tr;
}

StateSampler sample_box(const Polytope& box) {
  const auto [lo, hi] = bounding_box(box);
  if (box.is_box()) {
    return [lo, hi](std::mt19937_64& rng) {
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      VectorXd x(lo.size());
      for (int i = 0; i < x.size(); ++i) x(i) = lo(i) + (hi(i) - lo(i)) * unit(rng);
      return x;
    };
  }
  // rejection from the bounding box
  return [box, lo, hi](std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    VectorXd x(lo.size());
    for (int tries = 0; tries < 100000; ++tries) {
      for (int i = 0; i < x.size(); ++i) x(i) = lo(i) + (hi(i) - lo(i)) * unit(rng);
      if (contains(box, x)) return x;
    }
    throw GeometryError("rejection sampling found no interior point");
  };
}

StateSampler sample_recovery_band(const Scap& scap) {
  const Polytope sor = scap.barrier().sor();
  const auto inner = sample_box(sor);
  return [inner, sor, por = scap.por(), tuples = scap.tuples()](std::mt19937_64& rng) {
    for (int attempt = 0; attempt < 1000000; ++attempt) {
      VectorXd x = inner(rng);
      if (!strictly_inside(sor, x) || contains(por, x)) continue;
      for (const auto& tp : tuples) {
        if (tp.sbf(x) <= 0.0) return x;
      }
    }
    throw GeometryError("no sample in (SOR \\ POR) within the SFIRs after 10^6 draws");
  };
}

BatchSummary batch_recovery(const LinearPlant& plant, const Scap& scap, const SimConfig& config, int n_runs,
                            const StateSampler& sampler) {
  BatchSummary s;
  s.n_runs = n_runs;
  int recovered = 0;
  for (int r = 0; r < n_runs; ++r) {
    const std::uint64_t seed = run_seed(config.seed, static_cast<std::uint64_t>(r));
    std::mt19937_64 rng(seed);
    SimConfig cfg = config;
    cfg.x0 = sampler(rng);
    cfg.xhat0.reset();
    cfg.seed = seed;
    Scap local = scap;
    const SimTrace tr = simulate(plant, local, cfg);
    const bool exit = tr.safety_violated_at.has_value();
    s.runs.push_back({seed, cfg.x0, tr.outcome, tr.outcome_time, exit});
    if (exit) ++s.violations_count;
    if (tr.outcome == Outcome::recovered) {
      ++recovered;
      s.max_recovery_time = std::max(s.max_recovery_time, tr.outcome_time);
    } else if (tr.outcome == Outcome::deadline_missed) {
      ++s.deadline_misses;
    } else if (tr.outcome == Outcome::unrecoverable) {
      ++s.unrecoverable_count;
    }
  }
  s.recovery_rate = n_runs > 0 ? static_cast<double>(recovered) / n_runs : 0.0;
  return s;
}

DecayAudit check_decay_trace(const SimTrace& trace, const std::vector<ControllerTuple>& tuples, double tol) {
  DecayAudit a;
  for (std::size_t k = 0; k + 1 < trace.rows(); ++k) {
    const ControllerId id = trace.active_controller[k];
    const bool jump = k + 1 < trace.kicked.size() && trace.kicked[k + 1];
    if (id == kPocId || jump) {
      ++a.skipped;
      continue;
    }
    const auto& bsc = tuples.at(static_cast<std::size_t>(id)).bsc;
    const double v = bsc.lyapunov(trace.states[k]);
    const double v_next = bsc.lyapunov(trace.states[k + 1]);
    ++a.checked;
    if (v <= 0.0) {
      if (v_next > 0.0 && !a.failing_row) {
        a.passed = false;
        a.failing_row = k;
      }
      continue;
    }
    const double margin = (v_next - (1.0 - bsc.alpha) * v) / v;
    a.worst_margin = std::max(a.worst_margin, margin);
    if (margin > tol && !a.failing_row) {
      a.passed = false;
      a.failing_row = k;
    }
  }
  return a;
}

void write_trace_csv(std::ostream& os, const SimTrace& trace) {
  const auto prec = os.precision(17);
  const std::size_t n = trace.states.empty() ? 0 : static_cast<std::size_t>(trace.states.front().size());
  const std::size_t p = trace.inputs.empty() ? 0 : static_cast<std::size_t>(trace.inputs.front().size());
  const bool est = !trace.estimates.empty();
  os << "t";
  for (std::size_t i = 1; i <= n; ++i) os << ",x_" << i;
  if (est)
    for (std::size_t i = 1; i <= n; ++i) os << ",xhat_" << i;
  for (std::size_t i = 1; i <= p; ++i) os << ",u_" << i;
  os << ",controller_id,period_ms,glbf,util\n";
  for (std::size_t k = 0; k < trace.rows(); ++k) {
    os << trace.times[k];
    for (std::size_t i = 0; i < n; ++i) os << ',' << trace.states[k](i);
    if (est)
      for (std::size_t i = 0; i < n; ++i) os << ',' << trace.estimates[k](i);
    for (std::size_t i = 0; i < p; ++i) os << ',' << trace.inputs[k](i);
    os << ',' << trace.active_controller[k] << ',' << trace.periods[k] * 1000.0 << ',' << trace.glbf_values[k] << ','
       << trace.utils[k] << '\n';
  }
  os.precision(prec);
}

std::string trace_basename(const std::string& benchmark, const std::string& scenario, std::uint64_t seed) {
  return benchmark + "_" + scenario + "_" + std::to_string(seed);
}

}  // namespace bsc
