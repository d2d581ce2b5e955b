#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <random>

#include "bsc/errors.hpp"
#include "bsc/scap.hpp"
#include "support.hpp"

using namespace bsc;
using namespace bsc::test;

namespace {

BackupController scalar_bsc(double p, double level, double alpha, double h, double wcet = 0.005) {
  BackupController b;
  b.gain = mat(1, 1, {1.0});
  b.qlf = mat(1, 1, {p});
  b.level = level;
  b.alpha = alpha;
  b.h = h;
  b.wcet = wcet;
  b.center = VectorXd::Zero(1);
  return b;
}

PocSpec scalar_poc(double h = 0.3) {
  PocSpec p;
  p.gain = mat(1, 1, {0.5});
  p.h = h;
  p.wcet = 0.005;
  p.center = VectorXd::Zero(1);
  return p;
}

// Periods 40/60/80/120 ms; the 40 ms controller only certifies |x| <= 0.5.
std::vector<BackupController> ladder() {
  return {scalar_bsc(1, 0.25, 0.9, 0.04), scalar_bsc(1, 1, 0.6, 0.06), scalar_bsc(1, 1, 0.3, 0.08),
          scalar_bsc(1, 1, 0.2, 0.12)};
}

const Polytope kSor = Polytope::box(vec({-1}), vec({1}));
const Polytope kPor = Polytope::box(vec({-0.1}), vec({0.1}));

}  // namespace

TEST_CASE("glbf examples") {
  const GlobalBarrier b(sym_box(vec({1, 1})));
  CHECK(glbf(b, vec({0, 0})) == 0.0);
  CHECK(glbf(b, vec({0.9, 0})) == doctest::Approx(-std::log(0.1) - std::log(1.9)).epsilon(1e-15));
  CHECK(glbf(b, vec({0.9, 0})) == doctest::Approx(1.66073).epsilon(1e-5));
  double prev = 0.0;
  for (double e : {1e-2, 1e-4, 1e-8, 1e-12}) {
    const double v = glbf(b, vec({1.0 - e, 0}));
    CHECK(v > prev);
    prev = v;
  }
  const double edge = 1.0 - 1e-12;
  CHECK(prev == doctest::Approx(-std::log(1.0 - edge) - std::log(1.0 + edge)).epsilon(1e-12));
  CHECK(prev > 26.9);
  CHECK_THROWS_AS(glbf(b, vec({1.0, 0})), BarrierDomainError);
  CHECK_THROWS_AS(glbf(b, vec({0, -1.5})), BarrierDomainError);
}

TEST_CASE("utilization examples and errors") {
  CHECK(utilization(0.010, 0.100) == doctest::Approx(0.1));
  CHECK(utilization(0.005, 0.020) == doctest::Approx(0.25));
  CHECK_THROWS_AS(utilization(0.1, 0.1), SchedulabilityError);
  CHECK_THROWS_AS(utilization(0.2, 0.1), SchedulabilityError);
  CHECK_THROWS_AS(utilization(0.0, 0.1), SchedulabilityError);
}

TEST_CASE("utilization budget schedule") {
  const auto b = UtilizationBudget::from_min_periods(0.005, {{0.0, 0.06}, {1.33, 0.3}, {1.88, 0.06}});
  CHECK(b.u_max_at(0.0) == doctest::Approx(0.005 / 0.06));
  CHECK(b.u_max_at(1.32) == doctest::Approx(0.005 / 0.06));
  CHECK(b.u_max_at(1.33) == doctest::Approx(0.005 / 0.3));
  CHECK(b.u_max_at(1.87) == doctest::Approx(0.005 / 0.3));
  CHECK(b.u_max_at(1.88) == doctest::Approx(0.005 / 0.06));
  CHECK(b.u_max_at(100.0) == doctest::Approx(0.005 / 0.06));
  CHECK_THROWS_AS(UtilizationBudget({}), ConfigError);
  CHECK_THROWS_AS(UtilizationBudget({{0.5, 0.5}}), ConfigError);
  CHECK_THROWS_AS(UtilizationBudget({{0.0, 0.5}, {0.0, 0.4}}), ConfigError);
  CHECK_THROWS_AS(UtilizationBudget({{0.0, 1.5}}), ConfigError);
  CHECK_THROWS_AS(UtilizationBudget({{0.0, 0.0}}), ConfigError);
}

TEST_CASE("policy_pi examples") {
  // At x = 1: V = 2 with alpha 0.3 scores 0.6; V = 0.9 with alpha 0.6 scores 0.54.
  const auto tuples = make_tuples({scalar_bsc(2.0, 3.0, 0.3, 0.1), scalar_bsc(0.9, 1.0, 0.6, 0.2)});
  const auto pick = policy_pi(tuples, vec({1.0}));
  REQUIRE(pick.has_value());
  CHECK(*pick == 0);

  const auto one = make_tuples({scalar_bsc(1.0, 4.0, 0.3, 0.1)});
  CHECK(policy_pi(one, vec({1.5})) == std::optional<std::size_t>(0));
  CHECK_FALSE(policy_pi(one, vec({2.5})).has_value());
}

TEST_CASE("policy_pi ties go to the longer period, then the lower index") {
  const auto tuples = make_tuples({scalar_bsc(1, 1, 0.5, 0.1), scalar_bsc(1, 1, 0.5, 0.3), scalar_bsc(1, 1, 0.5, 0.2)});
  CHECK(tuples[2].bsc.h == 0.3);
  CHECK(policy_pi(tuples, vec({0.5})) == std::optional<std::size_t>(2));
  const auto same = make_tuples({scalar_bsc(1, 1, 0.5, 0.1), scalar_bsc(1, 1, 0.5, 0.1)});
  CHECK(policy_pi(same, vec({0.5})) == std::optional<std::size_t>(0));
}

TEST_CASE("policy_pi selection is invariant under a common scaling of (V, c)") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.1, 2.0), a(0.05, 0.95), x(-1.5, 1.5), s(0.01, 100.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<BackupController> base, scaled;
    const double k = s(rng);
    for (int i = 0; i < 4; ++i) {
      const double p = u(rng), c = u(rng), al = a(rng);
      base.push_back(scalar_bsc(p, c, al, 0.02 * (i + 1)));
      scaled.push_back(scalar_bsc(k * p, k * c, al, 0.02 * (i + 1)));
    }
    const VectorXd pt = vec({x(rng)});
    CHECK(policy_pi(make_tuples(base), pt) == policy_pi(make_tuples(scaled), pt));
  }
}

TEST_CASE("scap_step: POR entry waits for the dwell counter") {
  Scap scap({scalar_bsc(1, 1, 0.5, 0.1)}, scalar_poc(), kSor, kPor, UtilizationBudget::constant(1.0), 0.5);
  scap.reset(vec({0.8}));
  auto d = scap.step(vec({0.8}), 0.0);
  CHECK(d.active == 0);
  CHECK(d.reason == SwitchReason::decay_argmax);
  CHECK(scap.state().dwell == 2);
  d = scap.step(vec({0.05}), 0.1);
  CHECK(d.active == 0);
  CHECK_FALSE(d.switched);
  d = scap.step(vec({0.05}), 0.2);
  CHECK(d.active == kPocId);
  CHECK(d.reason == SwitchReason::por_entry);
}

TEST_CASE("scap_step: a state in the POR with dwell 0 stays under the POC") {
  Scap scap({scalar_bsc(1, 1, 0.5, 0.1)}, scalar_poc(), kSor, kPor, UtilizationBudget::constant(1.0), 0.5);
  scap.reset(vec({0.0}));
  const auto d = scap.step(vec({0.0}), 0.0);
  CHECK(d.active == kPocId);
  CHECK_FALSE(d.switched);
  CHECK(scap.events().empty());
}

TEST_CASE("scap_step: within budget the argmax is activated") {
  Scap scap(ladder(), scalar_poc(), kSor, kPor, UtilizationBudget::constant(1.0), 0.24);
  scap.reset(vec({0.8}));
  auto d = scap.step(vec({0.8}), 0.0);
  CHECK(scap.period_of(d.active) == doctest::Approx(0.06));
  CHECK(d.reason == SwitchReason::decay_argmax);
  CHECK(scap.state().dwell == 2);
  CHECK_FALSE(d.notify);
}

TEST_CASE("scap_step: over budget with falling GLBF restricts to slower controllers that fit") {
  const UtilizationBudget budget({{0.0, 1.0}, {0.05, 0.07}});
  Scap scap(ladder(), scalar_poc(), kSor, kPor, budget, 0.24);
  CHECK(scap.state().lb_window.size() == 2);
  scap.reset(vec({0.8}));
  auto d = scap.step(vec({0.8}), 0.0);
  REQUIRE(scap.period_of(d.active) == doctest::Approx(0.06));
  d = scap.step(vec({0.7}), 0.06);
  CHECK_FALSE(d.switched);
  CHECK(d.util > d.u_max);
  // Unrestricted, the 40 ms controller would win at 0.4.
  CHECK(scap.period_of(static_cast<ControllerId>(*policy_pi(scap.tuples(), vec({0.4})))) == doctest::Approx(0.04));
  d = scap.step(vec({0.4}), 0.12);
  CHECK(d.delta_lb < 0.0);
  CHECK(d.switched);
  CHECK(d.reason == SwitchReason::budget_period_up);
  CHECK(scap.period_of(d.active) == doctest::Approx(0.08));
  CHECK(d.util <= d.u_max);
  CHECK_FALSE(d.notify);
}

TEST_CASE("scap_step: over budget with rising GLBF picks the best decay and notifies") {
  const UtilizationBudget budget({{0.0, 1.0}, {0.1, 0.07}});
  Scap scap(ladder(), scalar_poc(), kSor, kPor, budget, 0.24);
  scap.reset(vec({0.8}));
  scap.step(vec({0.8}), 0.0);
  scap.step(vec({0.3}), 0.06);
  const auto d = scap.step(vec({0.45}), 0.12);
  CHECK(d.delta_lb >= 0.0);
  CHECK(d.notify);
  CHECK(scap.state().notify_flag);
  CHECK(d.reason == SwitchReason::notify);
  CHECK(scap.period_of(d.active) == doctest::Approx(0.04));
}

TEST_CASE("scap_step: no safe controller outside the POR is unrecoverable") {
  Scap scap({scalar_bsc(1, 0.04, 0.5, 0.1)}, scalar_poc(), kSor, kPor, UtilizationBudget::constant(1.0), 0.5);
  scap.reset(vec({0.5}));
  CHECK_THROWS_AS(scap.step(vec({0.5}), 0.0), UnrecoverableState);
  scap.reset(vec({0.0}));
  CHECK_THROWS_AS(scap.step(vec({1.0}), 0.0), BarrierDomainError);
}

TEST_CASE("scap construction checks") {
  CHECK_THROWS_AS(Scap({}, scalar_poc(), kSor, kPor, UtilizationBudget::constant(1.0), 0.5), PreconditionError);
  CHECK_THROWS_AS(Scap(ladder(), scalar_poc(), kSor, kPor, UtilizationBudget::constant(1.0), 0.0), DomainError);
  auto bad = scalar_poc(0.004);
  CHECK_THROWS_AS(Scap(ladder(), bad, kSor, kPor, UtilizationBudget::constant(1.0), 0.5), SchedulabilityError);
}

TEST_CASE("scap properties on random walks: dwell, safety gate, window identity, budget direction") {
  std::mt19937_64 rng(99);
  std::normal_distribution<double> g(0.0, 0.15);
  std::uniform_real_distribution<double> ub(0.03, 0.2);
  for (int trial = 0; trial < 40; ++trial) {
    std::vector<BackupController> bscs;
    for (int i = 0; i < 5; ++i) bscs.push_back(scalar_bsc(1.0, 1.0 - 0.1 * (i % 2), 0.1 + 0.15 * i, 0.02 * (i + 1)));
    const UtilizationBudget budget({{0.0, ub(rng)}, {1.0, ub(rng)}, {2.0, ub(rng)}});
    const double dt = 0.3 + 0.1 * trial;
    Scap scap(bscs, scalar_poc(0.1), kSor, kPor, budget, dt);
    const std::size_t len = scap.state().lb_window.size();
    CHECK(len == std::max<std::size_t>(2, static_cast<std::size_t>(std::ceil(dt / 0.1 - 1e-9))));

    double x = 0.7;
    scap.reset(vec({x}));
    std::vector<ControllerId> active;
    std::vector<bool> switched;
    double t = 0.0;
    for (int k = 0; k < 120; ++k) {
      x = std::clamp(x + g(rng), -0.85, 0.85);
      const auto d = scap.step(vec({x}), t);
      active.push_back(d.active);
      switched.push_back(d.switched);
      const auto& w = scap.state().lb_window;
      CHECK(w.size() == len);
      CHECK(std::abs(d.delta_lb - (w.back() - w.front()) / static_cast<double>(len - 1)) <=
            1e-12 * (1.0 + std::abs(w.back()) + std::abs(w.front())));
      if (d.switched && d.active != kPocId) CHECK(scap.tuples()[d.active].sbf(vec({x})) <= 0.0);
      t += scap.period_of(d.active);
    }
    // Switches at least two instants apart (the first one may happen at k = 0).
    int last = -100;
    for (int k = 0; k < static_cast<int>(switched.size()); ++k) {
      if (!switched[k]) continue;
      CHECK(k - last >= 2);
      last = k;
    }
    for (const auto& e : scap.events()) {
      if (e.reason == SwitchReason::budget_period_up) CHECK(scap.period_of(e.to) > scap.period_of(e.from));
      CHECK(e.from != e.to);
    }
  }
}
