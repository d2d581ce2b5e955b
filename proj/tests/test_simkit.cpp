#include "doctest.h"

#include <cmath>
#include <random>
#include <sstream>

#include "bsc/benchmarks.hpp"
#include "bsc/errors.hpp"
#include "bsc/simkit.hpp"
#include "support.hpp"

using namespace bsc;
using namespace bsc::test;

namespace {

std::vector<BackupController> with_wcet(std::vector<BackupController> v, const BenchmarkDef& b) {
  for (auto& c : v) c.wcet = b.wcet_for(c.h);
  return v;
}

const std::vector<BackupController>& ipd_set() {
  static const auto set = [] {
    const auto b = builtin_benchmark("ipd");
    return with_wcet(sweep_periods(b.plant, b.sor, b.por, 2.5, b.h0, b.h_max, b.synth_options()).controllers, b);
  }();
  return set;
}

Scap ipd_scap(const std::vector<BackupController>& set) {
  const auto b = builtin_benchmark("ipd");
  return Scap(set, b.make_poc(), b.sor, b.por, b.budget, 2.5);
}

// Unstable scalar plant x' = 0.5 x + u at a single 100 ms period.
struct Scalar {
  LinearPlant plant = plant_of(mat(1, 1, {0.5}), mat(1, 1, {1.0}));
  Polytope sor = sym_box(vec({1.0}));
  Polytope por = sym_box(vec({0.2}));
  BackupController bsc;
  Scalar() {
    const auto sw = sweep_periods(plant, sor, por, 2.0, 0.1, 0.1);
    REQUIRE(sw.controllers.size() == 1);
    bsc = sw.controllers.front();
  }
  Scap scap() const {
    PocSpec poc;
    poc.gain = mat(1, 1, {2.0});
    poc.h = 0.1;
    poc.wcet = 0.005;
    return Scap({bsc}, poc, sor, por, UtilizationBudget::constant(1.0), 2.0);
  }
};

}  // namespace

TEST_CASE("zero-order hold integration matches the exact discrete map") {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 1 + trial % 4;
    MatrixXd phi(n, n), gamma(n, 1);
    for (int i = 0; i < n; ++i) {
      gamma(i, 0) = g(rng);
      for (int j = 0; j < n; ++j) phi(i, j) = g(rng);
    }
    const auto plant = plant_of(phi, gamma);
    const double h = 0.02 * (1 + trial % 15);
    const auto d = discretize(plant, h);
    VectorXd x(n), u(1);
    for (int i = 0; i < n; ++i) x(i) = g(rng);
    u(0) = g(rng);
    const VectorXd exact = d.a * x + d.b * u;
    const VectorXd rk = propagate_zoh(plant, x, u, h, static_cast<int>(std::ceil(h / 1e-3)));
    CHECK((rk - exact).norm() <= 1e-8 * std::max(1.0, exact.norm()));
  }
}

TEST_CASE("simulate: start inside the POR stays under the POC") {
  const auto b = builtin_benchmark("ipd");
  auto scap = ipd_scap(ipd_set());
  SimConfig cfg;
  cfg.x0 = vec({0.05, 0.0, 0.05, 0.0});
  cfg.deadline = 2.5;
  cfg.t_end = 2.5;
  const auto tr = simulate(b.plant, scap, cfg);
  CHECK(tr.outcome == Outcome::recovered);
  REQUIRE(tr.recovered_at.has_value());
  CHECK(*tr.recovered_at == 0.0);
  for (auto id : tr.active_controller) CHECK(id == kPocId);
  CHECK(tr.switch_events.empty());
}

TEST_CASE("simulate: scalar loop from the SFIR boundary decays and recovers within the deadline") {
  const Scalar s;
  auto scap = s.scap();
  SimConfig cfg;
  cfg.deadline = 2.0;
  cfg.t_end = 2.0;
  cfg.x0 = vec({-std::sqrt(s.bsc.level / s.bsc.qlf(0, 0)) * (1.0 - 1e-12)});
  const auto tr = simulate(s.plant, scap, cfg);
  CHECK(tr.outcome == Outcome::recovered);
  REQUIRE(tr.recovered_at.has_value());
  const int dk = deadline_steps(2.0, 0.1);
  CHECK(*tr.recovered_at <= dk * 0.1 + 1e-12);
  for (std::size_t k = 0; k + 1 < tr.rows() && tr.active_controller[k] == 0; ++k)
    CHECK(s.bsc.lyapunov(tr.states[k + 1]) < s.bsc.lyapunov(tr.states[k]));
  const auto audit = check_decay_trace(tr, scap.tuples());
  CHECK(audit.passed);
  CHECK(audit.checked > 0);
  CHECK(audit.skipped > 0);
}

TEST_CASE("simulate: IPD run from the recovery band is safe and audited") {
  const auto b = builtin_benchmark("ipd");
  auto scap = ipd_scap(ipd_set());
  std::mt19937_64 rng(4);
  SimConfig cfg;
  cfg.x0 = sample_recovery_band(scap)(rng);
  cfg.deadline = 2.5;
  cfg.t_end = 3.0;
  const auto tr = simulate(b.plant, scap, cfg);
  CHECK(tr.outcome == Outcome::recovered);
  CHECK(*tr.recovered_at <= 2.5);
  CHECK_FALSE(tr.safety_violated_at.has_value());
  CHECK(tr.intersample_exits == 0);
  CHECK(check_decay_trace(tr, scap.tuples()).passed);
  for (std::size_t k = 0; k < tr.rows(); ++k) CHECK(std::isfinite(tr.glbf_values[k]));
  for (std::size_t k = 1; k < tr.rows(); ++k) {
    const double step = tr.times[k] - tr.times[k - 1];
    CHECK(step == doctest::Approx(tr.periods[k - 1]).epsilon(1e-9));
  }
}

TEST_CASE("simulate: identical seeds give bit-identical noisy traces") {
  const auto b = builtin_benchmark("ipd");
  SimConfig cfg;
  cfg.x0 = vec({0.3, 0.0, 0.0, 0.0});
  cfg.noise_on = true;
  cfg.observer_on = true;
  cfg.seed = 42;
  cfg.deadline = 2.5;
  cfg.t_end = 2.5;
  auto s1 = ipd_scap(ipd_set());
  auto s2 = ipd_scap(ipd_set());
  std::mt19937_64 rng(8);
  cfg.x0 = sample_recovery_band(s1)(rng);
  const auto a = simulate(b.plant, s1, cfg);
  const auto c = simulate(b.plant, s2, cfg);
  REQUIRE(a.rows() == c.rows());
  CHECK(a.outcome == c.outcome);
  CHECK(a.unrecoverable_at == c.unrecoverable_at);
  for (std::size_t k = 0; k < a.rows(); ++k) {
    CHECK(a.states[k] == c.states[k]);
    CHECK(a.estimates[k] == c.estimates[k]);
    CHECK(a.active_controller[k] == c.active_controller[k]);
  }
  cfg.seed = 43;
  auto s3 = ipd_scap(ipd_set());
  const auto d = simulate(b.plant, s3, cfg);
  CHECK(d.states.back() != a.states.back());
}

TEST_CASE("observer error contracts at the spectral radius of A - LC") {
  const auto b = builtin_benchmark("ipd");
  auto scap = ipd_scap(ipd_set());
  SimConfig cfg;
  cfg.x0 = VectorXd::Zero(4);
  cfg.xhat0 = vec({0.01, 0.0, 0.01, 0.0});
  cfg.observer_on = true;
  cfg.deadline = 2.5;
  cfg.t_end = 6.0;
  const auto tr = simulate(b.plant, scap, cfg);
  for (auto id : tr.active_controller) REQUIRE(id == kPocId);
  const auto loop = discretize(b.plant, b.poc.h);
  const MatrixXd l = synth_kalman(loop, b.plant.c_out, b.plant.q_w, b.plant.r_v);
  const MatrixXd m = loop.a - l * b.plant.c_out;
  const double rho = spectral_radius(m);
  CHECK(rho < 1.0);
  // Error recursion e[k+1] = (A - LC) e[k] holds up to the ZOH integration error.
  for (std::size_t k = 0; k + 1 < tr.rows(); ++k) {
    const VectorXd e0 = tr.estimates[k] - tr.states[k];
    const VectorXd e1 = tr.estimates[k + 1] - tr.states[k + 1];
    CHECK((e1 - m * e0).norm() <= 1e-9 + 1e-6 * e0.norm());
  }
  const std::size_t kk = tr.rows() - 1;
  const double e_first = (tr.estimates[0] - tr.states[0]).norm();
  const double e_last = (tr.estimates[kk] - tr.states[kk]).norm();
  // Averaged contraction over the run (transients of a non-normal matrix wash out).
  CHECK(std::pow(e_last / e_first, 1.0 / static_cast<double>(kk)) <= rho + 1e-3);
}

TEST_CASE("check_decay_trace negative control and POC skipping") {
  const Scalar s;
  auto scap = s.scap();
  SimConfig cfg;
  cfg.deadline = 2.0;
  cfg.t_end = 2.0;
  cfg.x0 = vec({0.9 * std::sqrt(s.bsc.level / s.bsc.qlf(0, 0))});
  auto tr = simulate(s.plant, scap, cfg);
  REQUIRE(check_decay_trace(tr, scap.tuples()).passed);
  REQUIRE(tr.active_controller[0] == 0);
  REQUIRE(tr.active_controller[1] == 0);
  // The certified gain is nearly deadbeat; a disturbance that cancels the step fails the audit.
  tr.states[1] = tr.states[0];
  const auto bad = check_decay_trace(tr, scap.tuples());
  CHECK_FALSE(bad.passed);
  REQUIRE(bad.failing_row.has_value());
  CHECK(*bad.failing_row == 0);
  CHECK(bad.worst_margin > 0.0);

  SimTrace poc_only;
  poc_only.states = {vec({0.1}), vec({0.5})};
  poc_only.active_controller = {kPocId, kPocId};
  poc_only.times = {0.0, 0.1};
  const auto skip = check_decay_trace(poc_only, scap.tuples());
  CHECK(skip.passed);
  CHECK(skip.checked == 0);
  CHECK(skip.skipped == 1);
}

TEST_CASE("kicks reset the state at the next sampling instant and are excluded from the audit") {
  const Scalar s;
  auto scap = s.scap();
  SimConfig cfg;
  cfg.deadline = 2.0;
  cfg.t_end = 3.0;
  const double edge = std::sqrt(s.bsc.level / s.bsc.qlf(0, 0));
  cfg.x0 = vec({0.9 * edge});
  cfg.kicks = {{1.55, vec({-0.9 * edge})}};
  const auto tr = simulate(s.plant, scap, cfg);
  std::size_t hits = 0;
  for (std::size_t k = 0; k < tr.rows(); ++k) {
    if (!tr.kicked[k]) continue;
    ++hits;
    CHECK(tr.times[k] == doctest::Approx(1.6));
    CHECK(tr.states[k](0) == -0.9 * edge);
  }
  CHECK(hits == 1);
  CHECK(check_decay_trace(tr, scap.tuples()).passed);

  cfg.kicks = {{1.0, vec({1.2})}};
  CHECK_THROWS_AS(simulate(s.plant, scap, cfg), PreconditionError);
  cfg.kicks = {{1.0, vec({0.1})}, {0.5, vec({0.1})}};
  CHECK_THROWS_AS(simulate(s.plant, scap, cfg), ConfigError);
}

TEST_CASE("simulate configuration errors") {
  const Scalar s;
  auto scap = s.scap();
  SimConfig cfg;
  cfg.deadline = 2.0;
  cfg.t_end = 2.0;
  cfg.x0 = vec({1.5});
  CHECK_THROWS_AS(simulate(s.plant, scap, cfg), PreconditionError);
  cfg.x0 = vec({0.1, 0.1});
  CHECK_THROWS_AS(simulate(s.plant, scap, cfg), DimensionError);
  cfg.x0 = vec({0.1});
  cfg.fine_step = 0.01;
  CHECK_THROWS_AS(simulate(s.plant, scap, cfg), ConfigError);
  cfg.fine_step = 1e-3;
  cfg.t_end = 1.0;
  CHECK_THROWS_AS(simulate(s.plant, scap, cfg), ConfigError);
}

TEST_CASE("batch_recovery: empty batch and degenerate POR sampler") {
  const auto b = builtin_benchmark("ipd");
  const auto scap = ipd_scap(ipd_set());
  SimConfig cfg;
  cfg.deadline = 2.5;
  cfg.t_end = 2.5;
  const auto empty = batch_recovery(b.plant, scap, cfg, 0, sample_recovery_band(scap));
  CHECK(empty.n_runs == 0);
  CHECK(empty.runs.empty());
  CHECK(empty.violations_count == 0);

  const auto in_por = batch_recovery(b.plant, scap, cfg, 5, sample_box(b.por));
  CHECK(in_por.recovery_rate == 1.0);
  CHECK(in_por.max_recovery_time == 0.0);
  for (const auto& r : in_por.runs) CHECK(contains(b.por, r.x0));
}

TEST_CASE("batch_recovery is reproducible and the band sampler respects its region") {
  const auto b = builtin_benchmark("ipd");
  const auto scap = ipd_scap(ipd_set());
  SimConfig cfg;
  cfg.deadline = 2.5;
  cfg.t_end = 2.5;
  cfg.seed = 5;
  const auto r1 = batch_recovery(b.plant, scap, cfg, 4, sample_recovery_band(scap));
  const auto r2 = batch_recovery(b.plant, scap, cfg, 4, sample_recovery_band(scap));
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(r1.runs[i].x0 == r2.runs[i].x0);
    CHECK(r1.runs[i].outcome_time == r2.runs[i].outcome_time);
    const auto& x = r1.runs[i].x0;
    CHECK_FALSE(contains(b.por, x));
    bool in_sfir = false;
    for (const auto& tp : scap.tuples()) in_sfir = in_sfir || tp.sbf(x) <= 0.0;
    CHECK(in_sfir);
  }
  CHECK(r1.runs[0].seed != r1.runs[1].seed);
}

TEST_CASE("band sampler gives up on an empty region") {
  const Scalar s;
  BackupController tiny = s.bsc;
  tiny.level = 1e-6 * tiny.level;
  PocSpec poc;
  poc.gain = mat(1, 1, {2.0});
  poc.h = 0.1;
  poc.wcet = 0.005;
  const Scap scap({tiny}, poc, s.sor, s.por, UtilizationBudget::constant(1.0), 2.0);
  std::mt19937_64 rng(1);
  CHECK_THROWS_AS(sample_recovery_band(scap)(rng), GeometryError);
}

TEST_CASE("trace CSV layout and file naming") {
  const Scalar s;
  auto scap = s.scap();
  SimConfig cfg;
  cfg.deadline = 2.0;
  cfg.t_end = 2.0;
  cfg.x0 = vec({0.5});
  cfg.observer_on = true;
  const auto tr = simulate(s.plant, scap, cfg);
  std::ostringstream os;
  write_trace_csv(os, tr);
  std::istringstream is(os.str());
  std::string header;
  std::getline(is, header);
  CHECK(header == "t,x_1,xhat_1,u_1,controller_id,period_ms,glbf,util");
  std::size_t lines = 0;
  for (std::string line; std::getline(is, line);) ++lines;
  CHECK(lines == tr.rows());
  CHECK(trace_basename("ald", "budget", 7) == "ald_budget_7");
}
