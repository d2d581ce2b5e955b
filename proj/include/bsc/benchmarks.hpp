#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "bsc/scap.hpp"
#include "bsc/simkit.hpp"
#include "bsc/synth.hpp"
#include "bsc/sysmodel.hpp"

namespace bsc {

struct PocDef {
  double h = 0.1;
  VectorXd q_diag;  // LQR state weights
  VectorXd r_diag;  // LQR input weights
};

// Shipped simulation setup: start state plus timed state resets.
struct Scenario {
  VectorXd x0;
  std::vector<StateKick> kicks;
  double t_end = 0.0;  // 0: use the deadline
};

struct BenchmarkDef {
  std::string name;
  std::string provenance;
  LinearPlant plant;
  Polytope sor;
  Polytope por;
  double h0 = 0.02;
  double h_max = 0.3;
  std::vector<double> deadlines;
  UtilizationBudget budget;
  double wcet_bsc = 0.005;
  double wcet_poc = 0.005;
  std::map<long, double> wcet_by_period_ms;
  PocDef poc;
  VectorXd norm_scale;  // empty: Euclidean decay target
  std::map<std::string, Scenario> scenarios;

  double wcet_for(double h) const;
  /// POR strictly inside SOR, h0 dividing h_max, dimensions consistent.
  void validate() const;
  SynthOptions synth_options() const;
  /// LQR primary controller at poc.h.
  PocSpec make_poc() const;
};

std::vector<std::string> builtin_names();
/// "ald" or "ipd"; ConfigError otherwise.
BenchmarkDef builtin_benchmark(std::string_view name);

}  // namespace bsc
