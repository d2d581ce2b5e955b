// bscctl: synthesize, verify and simulate backup safe controllers.
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "bsc/benchmarks.hpp"
#include "bsc/errors.hpp"
#include "bsc/io.hpp"
#include "bsc/simkit.hpp"
#include "bsc/synth.hpp"

namespace fs = std::filesystem;
using bsc::io::Json;

namespace {

enum Exit { kOk = 0, kError = 1, kCertificate = 2, kInfeasible = 3, kSafety = 4 };

struct Common {
  std::string benchmark;
  std::string config;
  std::string out = ".";
  std::vector<double> deadlines;
  bool maximize_alpha = false;
};

bsc::BenchmarkDef load_benchmark(const Common& c) {
  if (!c.config.empty()) {
    const Json j = bsc::io::read_file(c.config);
    return bsc::io::benchmark_from_json(j, j.value("name", std::string("custom")));
  }
  if (c.benchmark.empty()) throw bsc::ConfigError("give a benchmark name or --config <json>");
  return bsc::builtin_benchmark(c.benchmark);
}

std::vector<double> deadlines_of(const Common& c, const bsc::BenchmarkDef& b) {
  return c.deadlines.empty() ? b.deadlines : c.deadlines;
}

bsc::SynthOptions synth_options(const Common& c, const bsc::BenchmarkDef& b) {
  auto o = b.synth_options();
  if (c.maximize_alpha) o.alpha_search = bsc::AlphaSearch::maximize;
  return o;
}

std::vector<bsc::BackupController> with_wcets(std::vector<bsc::BackupController> cs, const bsc::BenchmarkDef& b) {
  for (auto& c : cs) c.wcet = b.wcet_for(c.h);
  return cs;
}

std::string deadline_tag(double d) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(2) << d;
  return s.str();
}

bsc::VectorXd parse_csv_vector(const std::string& text) {
  std::vector<double> vals;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      vals.push_back(std::stod(item, &used));
      if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw bsc::ConfigError("cannot parse '" + item + "' in --x0");
    }
  }
  return Eigen::Map<bsc::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw bsc::ConfigError("cannot create output directory '" + dir + "'");
}

int cmd_synth(const Common& c) {
  const auto bench = load_benchmark(c);
  ensure_dir(c.out);
  const auto opts = synth_options(c, bench);
  std::ofstream table(fs::path(c.out) / (bench.name + "_feasibility.csv"));
  table << "period_ms,deadline_s,feasible,alpha_ref,alpha\n";
  std::cout << "period_ms  deadline_s  feasible  alpha_ref  alpha\n";
  int exit_code = kOk;
  for (double d : deadlines_of(c, bench)) {
    const auto sw = bsc::sweep_periods(bench.plant, bench.sor, bench.por, d, bench.h0, bench.h_max, opts);
    bsc::io::ControllerSet set{bench, d, with_wcets(sw.controllers, bench), sw.outcomes};
    for (const auto& o : sw.outcomes) {
      table << o.h * 1000.0 << ',' << d << ',' << (o.feasible ? 1 : 0) << ',' << o.alpha_ref << ',' << o.alpha << '\n';
      std::cout << std::setw(9) << o.h * 1000.0 << std::setw(12) << d << std::setw(10) << (o.feasible ? "yes" : "no")
                << std::setw(11) << std::setprecision(5) << o.alpha_ref << std::setw(9) << o.alpha << '\n';
    }
    for (const auto& ctl : set.controllers) {
      if (!bsc::verify_certificate(ctl, bsc::discretize(bench.plant, ctl.h), bench.sor).passed()) exit_code = kCertificate;
    }
    const auto path = fs::path(c.out) / (bench.name + "_controllers_" + deadline_tag(d) + ".json");
    bsc::io::write_file(path.string(), bsc::io::controller_set_to_json(set));
    if (sw.controllers.empty()) {
      Json err{{"error", "infeasible"}, {"deadline_s", d}, {"message", sw.advice.value_or("no feasible period")}};
      std::cerr << err.dump() << '\n';
      if (exit_code == kOk) exit_code = kInfeasible;
    } else {
      std::cout << "wrote " << path.string() << " (" << sw.controllers.size() << " controllers)\n";
    }
  }
  return exit_code;
}

int cmd_verify(const std::string& file) {
  const auto set = bsc::io::controller_set_from_json(bsc::io::read_file(file));
  Json report = Json::array();
  bool ok = true;
  for (const auto& ctl : set.controllers) {
    const auto r = bsc::verify_certificate(ctl, bsc::discretize(set.benchmark.plant, ctl.h), set.benchmark.sor);
    bool wcet_ok = ctl.wcet > 0.0 && ctl.wcet < ctl.h;
    ok = ok && r.passed() && wcet_ok;
    report.push_back({{"h", ctl.h},
                      {"decay", r.decay_ok ? "pass" : "fail"},
                      {"decay_residual", r.decay_residual},
                      {"level", r.level_ok ? "pass" : "fail"},
                      {"calibrated_level", r.calibrated_level},
                      {"stable", r.stable ? "pass" : "fail"},
                      {"spectral_radius", r.spectral_radius},
                      {"wcet", wcet_ok ? "pass" : "fail"}});
  }
  std::cout << Json{{"file", file}, {"controllers", report}, {"passed", ok}}.dump(2) << '\n';
  if (!ok) {
    std::cerr << Json{{"error", "certificate"}, {"message", "one or more certificates failed"}}.dump() << '\n';
    return kCertificate;
  }
  return kOk;
}

std::vector<bsc::BackupController> controllers_for(const Common& c, const bsc::BenchmarkDef& bench, double deadline,
                                                   const std::string& file) {
  if (!file.empty()) return bsc::io::controller_set_from_json(bsc::io::read_file(file)).controllers;
  const auto sw = bsc::sweep_periods(bench.plant, bench.sor, bench.por, deadline, bench.h0, bench.h_max,
                                     synth_options(c, bench));
  if (sw.controllers.empty()) throw bsc::DeadlineInfeasible(sw.advice.value_or("no feasible period"));
  return with_wcets(sw.controllers, bench);
}

struct SimArgs {
  std::string controllers;
  std::string x0;
  std::vector<std::string> kicks;
  std::string scenario = "run";
  std::uint64_t seed = 0;
  bool observer = false;
  bool noise = false;
  double t_end = -1.0;
  double fine_step = 1e-3;
  int runs = 50;
};

bsc::SimConfig sim_config(const SimArgs& a, double deadline) {
  bsc::SimConfig cfg;
  cfg.deadline = deadline;
  cfg.t_end = a.t_end > 0.0 ? a.t_end : deadline;
  cfg.fine_step = a.fine_step;
  cfg.noise_on = a.noise;
  cfg.observer_on = a.observer;
  cfg.seed = a.seed;
  return cfg;
}

int cmd_simulate(const Common& c, const SimArgs& a) {
  const auto bench = load_benchmark(c);
  const double deadline = deadlines_of(c, bench).back();
  bsc::Scap scap(controllers_for(c, bench, deadline, a.controllers), bench.make_poc(), bench.sor, bench.por,
                 bench.budget, deadline);
  auto cfg = sim_config(a, deadline);
  const auto shipped = bench.scenarios.find(a.scenario);
  if (!a.x0.empty()) {
    cfg.x0 = parse_csv_vector(a.x0);
  } else if (shipped != bench.scenarios.end()) {
    cfg.x0 = shipped->second.x0;
    cfg.kicks = shipped->second.kicks;
    if (a.t_end <= 0.0 && shipped->second.t_end > 0.0) cfg.t_end = shipped->second.t_end;
  } else {
    throw bsc::ConfigError("--x0 is required unless --scenario names a shipped scenario");
  }
  for (const auto& k : a.kicks) {
    const auto colon = k.find(':');
    if (colon == std::string::npos) throw bsc::ConfigError("--kick expects t:x1,x2,...");
    bsc::StateKick kick;
    try {
      kick.t = std::stod(k.substr(0, colon));
    } catch (const std::exception&) {
      throw bsc::ConfigError("cannot parse kick time in '" + k + "'");
    }
    kick.x = parse_csv_vector(k.substr(colon + 1));
    cfg.kicks.push_back(kick);
  }
  const auto trace = bsc::simulate(bench.plant, scap, cfg);

  ensure_dir(c.out);
  const std::string base = bsc::trace_basename(bench.name, a.scenario, a.seed);
  {
    std::ofstream csv(fs::path(c.out) / (base + ".csv"));
    bsc::write_trace_csv(csv, trace);
  }
  Json summary = bsc::io::trace_summary(trace, bench.name, a.scenario, a.seed, scap);
  if (!a.noise && !a.observer) {
    const auto audit = bsc::check_decay_trace(trace, scap.tuples());
    summary["decay_audit"] = {{"passed", audit.passed}, {"checked", audit.checked}, {"worst_margin", audit.worst_margin}};
  }
  bsc::io::write_file((fs::path(c.out) / (base + ".json")).string(), summary);
  std::cout << summary.dump(2) << '\n';
  if (trace.safety_violated_at) {
    std::cerr << Json{{"error", "safety-violation"}, {"t", *trace.safety_violated_at}}.dump() << '\n';
    return kSafety;
  }
  return kOk;
}

int cmd_sweep(const Common& c, const SimArgs& a) {
  const auto bench = load_benchmark(c);
  const double deadline = deadlines_of(c, bench).back();
  bsc::Scap scap(controllers_for(c, bench, deadline, a.controllers), bench.make_poc(), bench.sor, bench.por,
                 bench.budget, deadline);
  const auto cfg = sim_config(a, deadline);
  const auto summary = bsc::batch_recovery(bench.plant, scap, cfg, a.runs, bsc::sample_recovery_band(scap));
  ensure_dir(c.out);
  Json j = bsc::io::batch_summary(summary);
  j["benchmark"] = bench.name;
  j["deadline_s"] = deadline;
  bsc::io::write_file((fs::path(c.out) / (bsc::trace_basename(bench.name, "sweep", a.seed) + ".json")).string(), j);
  j.erase("runs");
  std::cout << j.dump(2) << '\n';
  if (summary.violations_count > 0) {
    std::cerr << Json{{"error", "safety-violation"}, {"runs", summary.violations_count}}.dump() << '\n';
    return kSafety;
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Backup safe controller synthesis and simulation"};
  app.require_subcommand(1);
  Common common;
  SimArgs sim;
  std::string verify_file;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("name", common.benchmark, "builtin benchmark (ald, ipd)");
    sub->add_option("--benchmark", common.benchmark, "builtin benchmark (ald, ipd)");
    sub->add_option("--config", common.config, "benchmark definition JSON");
    sub->add_option("--deadline", common.deadlines, "recovery deadline(s) in seconds");
    sub->add_option("--out", common.out, "output directory");
    sub->add_flag("--maximize-alpha", common.maximize_alpha, "bisect for the largest feasible decay");
  };
  auto add_sim = [&](CLI::App* sub) {
    sub->add_option("--controllers", sim.controllers, "controller-set JSON from `synth` (default: synthesize)");
    sub->add_option("--seed", sim.seed, "random seed");
    sub->add_flag("--observer", sim.observer, "feed back the Kalman estimate instead of the true state");
    sub->add_flag("--noise", sim.noise, "process and measurement noise");
    sub->add_option("--t-end", sim.t_end, "simulated time (default: the deadline)");
    sub->add_option("--fine-step", sim.fine_step, "plant integration step");
    sub->add_option("--scenario", sim.scenario, "scenario label used in file names");
  };

  auto* synth = app.add_subcommand("synth", "sweep periods and write the controller set");
  add_common(synth);
  auto* verify = app.add_subcommand("verify", "re-check every certificate in a controller-set file");
  verify->add_option("file", verify_file, "controller-set JSON")->required();
  auto* simulate = app.add_subcommand("simulate", "run one closed-loop scenario");
  add_common(simulate);
  add_sim(simulate);
  simulate->add_option("--x0", sim.x0, "initial state deviation, comma separated");
  simulate->add_option("--kick", sim.kicks, "state reset t:x1,x2,... (repeatable)");
  auto* sweep = app.add_subcommand("sweep", "batch recovery from sampled unsafe states");
  add_common(sweep);
  add_sim(sweep);
  sweep->add_option("--runs", sim.runs, "number of runs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*synth) return cmd_synth(common);
    if (*verify) return cmd_verify(verify_file);
    if (*simulate) return cmd_simulate(common, sim);
    if (*sweep) return cmd_sweep(common, sim);
  } catch (const bsc::Error& e) {
    std::cerr << Json{{"error", e.kind()}, {"message", e.what()}}.dump() << '\n';
    return kError;
  } catch (const std::exception& e) {
    std::cerr << Json{{"error", "internal"}, {"message", e.what()}}.dump() << '\n';
    return kError;
  }
  return kError;
}
