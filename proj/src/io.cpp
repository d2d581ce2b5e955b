#include "bsc/io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "bsc/errors.hpp"

namespace bsc::io {

namespace {

double num(const Json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_number()) throw ConfigError(std::string("missing numeric field '") + key + "'");
  return j.at(key).get<double>();
}

Polytope region_from_json(const Json& j, const char* what, int n) {
  if (j.contains("lo") && j.contains("hi")) {
    const VectorXd lo = vector_from_json(j.at("lo"), what);
    const VectorXd hi = vector_from_json(j.at("hi"), what);
    if (lo.size() != n || hi.size() != n) throw DimensionError(std::string(what) + ": box bounds need n entries");
    if (j.contains("center")) return Polytope::box(lo, hi, vector_from_json(j.at("center"), what));
    return Polytope::box(lo, hi);
  }
  if (j.contains("A") && j.contains("b")) {
    const MatrixXd a = matrix_from_json(j.at("A"), what);
    const VectorXd b = vector_from_json(j.at("b"), what);
    const VectorXd c = j.contains("center") ? vector_from_json(j.at("center"), what) : VectorXd::Zero(a.cols());
    return Polytope(a, b, c);
  }
  throw ConfigError(std::string(what) + ": expected {lo, hi} or {A, b}");
}

Json region_to_json(const Polytope& p) {
  Json j;
  j["A"] = matrix_to_json(p.a());
  j["b"] = vector_to_json(p.b());
  j["center"] = vector_to_json(p.center());
  return j;
}

MatrixXd square_or_default(const Json& plant, const char* key, int dim) {
  if (plant.contains(key)) return matrix_from_json(plant.at(key), key);
  return 1e-6 * MatrixXd::Identity(dim, dim);
}

}  // namespace

Json matrix_to_json(const MatrixXd& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
    rows.push_back(std::move(row));
  }
  return rows;
}

MatrixXd matrix_from_json(const Json& j, const char* what) {
  if (!j.is_array() || j.empty()) throw ConfigError(std::string(what) + ": expected a non-empty row-major array");
  const auto rows = static_cast<Eigen::Index>(j.size());
  if (!j.front().is_array()) throw ConfigError(std::string(what) + ": expected nested rows");
  const auto cols = static_cast<Eigen::Index>(j.front().size());
  MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& row = j.at(i);
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
      throw ConfigError(std::string(what) + ": ragged matrix");
    for (Eigen::Index k = 0; k < cols; ++k) {
      if (!row.at(k).is_number()) throw ConfigError(std::string(what) + ": non-numeric entry");
      m(i, k) = row.at(k).get<double>();
    }
  }
  return m;
}

Json vector_to_json(const VectorXd& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

VectorXd vector_from_json(const Json& j, const char* what) {
  if (!j.is_array()) throw ConfigError(std::string(what) + ": expected an array");
  VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j.at(i).is_number()) throw ConfigError(std::string(what) + ": non-numeric entry");
    v(static_cast<Eigen::Index>(i)) = j.at(i).get<double>();
  }
  return v;
}

BenchmarkDef benchmark_from_json(const Json& j, const std::string& name) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  if (!j.contains("plant")) throw ConfigError("config is missing 'plant'");
  const Json& pj = j.at("plant");
  LinearPlant plant;
  plant.phi = matrix_from_json(pj.at("phi"), "plant.phi");
  plant.gamma = matrix_from_json(pj.at("gamma"), "plant.gamma");
  plant.c_out = matrix_from_json(pj.at("c"), "plant.c");
  const int n = static_cast<int>(plant.phi.rows());
  plant.q_w = square_or_default(pj, "q_w", n);
  plant.r_v = square_or_default(pj, "r_v", static_cast<int>(plant.c_out.rows()));
  plant.x_ref = pj.contains("x_ref") ? vector_from_json(pj.at("x_ref"), "plant.x_ref") : VectorXd::Zero(n);
  plant.u_ref = pj.contains("u_ref") ? vector_from_json(pj.at("u_ref"), "plant.u_ref")
                                     : VectorXd::Zero(plant.gamma.cols());
  plant.validate();

  if (!j.contains("sor") || !j.contains("por")) throw ConfigError("config needs 'sor' and 'por'");
  Polytope sor = region_from_json(j.at("sor"), "sor", n);
  Polytope por = region_from_json(j.at("por"), "por", n);

  double h0 = 0.02, h_max = 0.3;
  if (j.contains("periods")) {
    h0 = num(j.at("periods"), "h0");
    h_max = num(j.at("periods"), "h_max");
  }
  std::vector<double> deadlines;
  if (j.contains("deadlines")) deadlines = j.at("deadlines").get<std::vector<double>>();
  if (j.contains("deadline_s")) deadlines.push_back(num(j, "deadline_s"));

  double wcet_bsc = 0.005, wcet_poc = 0.005;
  std::map<long, double> by_period;
  if (j.contains("wcets")) {
    const Json& w = j.at("wcets");
    if (w.contains("bsc")) wcet_bsc = num(w, "bsc");
    if (w.contains("poc")) wcet_poc = num(w, "poc");
    if (w.contains("per_period_ms"))
      for (const auto& [k, v] : w.at("per_period_ms").items()) by_period[std::stol(k)] = v.get<double>();
  }

  std::vector<UtilizationBudget::Entry> entries;
  if (j.contains("budget")) {
    for (const auto& e : j.at("budget")) {
      const double t = num(e, "t");
      if (e.contains("u"))
        entries.push_back({t, num(e, "u")});
      else
        entries.push_back({t, utilization(wcet_bsc, num(e, "h_min"))});
    }
  } else {
    entries.push_back({0.0, 1.0});
  }

  PocDef poc;
  const auto [lo, hi] = bounding_box(sor);
  poc.h = h_max;
  poc.q_diag = (0.5 * (hi - lo)).array().square().inverse().matrix();
  poc.r_diag = VectorXd::Ones(plant.inputs());
  if (j.contains("poc")) {
    const Json& pc = j.at("poc");
    if (pc.contains("h")) poc.h = num(pc, "h");
    if (pc.contains("q_diag")) poc.q_diag = vector_from_json(pc.at("q_diag"), "poc.q_diag");
    if (pc.contains("r_diag")) poc.r_diag = vector_from_json(pc.at("r_diag"), "poc.r_diag");
  }

  std::map<std::string, Scenario> scenarios;
  if (j.contains("scenarios")) {
    for (const auto& [key, sj] : j.at("scenarios").items()) {
      Scenario sc;
      sc.x0 = vector_from_json(sj.at("x0"), "scenario x0");
      sc.t_end = sj.value("t_end", 0.0);
      if (sj.contains("kicks"))
        for (const auto& k : sj.at("kicks")) sc.kicks.push_back({num(k, "t"), vector_from_json(k.at("x"), "kick x")});
      scenarios.emplace(key, std::move(sc));
    }
  }

  BenchmarkDef b{
      .name = name,
      .provenance = j.value("provenance", std::string()),
      .plant = std::move(plant),
      .sor = std::move(sor),
      .por = std::move(por),
      .h0 = h0,
      .h_max = h_max,
      .deadlines = std::move(deadlines),
      .budget = UtilizationBudget(std::move(entries)),
      .wcet_bsc = wcet_bsc,
      .wcet_poc = wcet_poc,
      .wcet_by_period_ms = std::move(by_period),
      .poc = std::move(poc),
      .norm_scale = j.contains("norm_scale") ? vector_from_json(j.at("norm_scale"), "norm_scale") : VectorXd(),
      .scenarios = std::move(scenarios),
  };
  b.validate();
  return b;
}

Json benchmark_to_json(const BenchmarkDef& b) {
  Json j;
  j["provenance"] = b.provenance;
  Json p;
  p["phi"] = matrix_to_json(b.plant.phi);
  p["gamma"] = matrix_to_json(b.plant.gamma);
  p["c"] = matrix_to_json(b.plant.c_out);
  p["q_w"] = matrix_to_json(b.plant.q_w);
  p["r_v"] = matrix_to_json(b.plant.r_v);
  p["x_ref"] = vector_to_json(b.plant.x_ref);
  p["u_ref"] = vector_to_json(b.plant.u_ref);
  j["plant"] = std::move(p);
  j["sor"] = region_to_json(b.sor);
  j["por"] = region_to_json(b.por);
  j["periods"] = {{"h0", b.h0}, {"h_max", b.h_max}};
  j["deadlines"] = b.deadlines;
  Json budget = Json::array();
  for (const auto& e : b.budget.schedule()) budget.push_back({{"t", e.t_start}, {"u", e.u_max}});
  j["budget"] = std::move(budget);
  Json w;
  w["bsc"] = b.wcet_bsc;
  w["poc"] = b.wcet_poc;
  Json per = Json::object();
  for (const auto& [ms, v] : b.wcet_by_period_ms) per[std::to_string(ms)] = v;
  w["per_period_ms"] = std::move(per);
  j["wcets"] = std::move(w);
  j["poc"] = {{"h", b.poc.h}, {"q_diag", vector_to_json(b.poc.q_diag)}, {"r_diag", vector_to_json(b.poc.r_diag)}};
  if (b.norm_scale.size() != 0) j["norm_scale"] = vector_to_json(b.norm_scale);
  if (!b.scenarios.empty()) {
    Json sc = Json::object();
    for (const auto& [key, s] : b.scenarios) {
      Json kicks = Json::array();
      for (const auto& k : s.kicks) kicks.push_back({{"t", k.t}, {"x", vector_to_json(k.x)}});
      sc[key] = {{"t_end", s.t_end}, {"x0", vector_to_json(s.x0)}, {"kicks", kicks}};
    }
    j["scenarios"] = sc;
  }
  return j;
}

Json controller_to_json(const BackupController& c) {
  Json j;
  j["h"] = c.h;
  j["K"] = matrix_to_json(c.gain);
  j["P"] = matrix_to_json(c.qlf);
  j["c"] = c.level;
  j["alpha"] = c.alpha;
  j["wcet"] = c.wcet;
  j["center"] = vector_to_json(c.center);
  return j;
}

BackupController controller_from_json(const Json& j) {
  BackupController c;
  c.h = num(j, "h");
  c.gain = matrix_from_json(j.at("K"), "K");
  c.qlf = matrix_from_json(j.at("P"), "P");
  c.level = num(j, "c");
  c.alpha = num(j, "alpha");
  c.wcet = num(j, "wcet");
  c.center = j.contains("center") ? vector_from_json(j.at("center"), "center") : VectorXd::Zero(c.qlf.rows());
  if (c.qlf.rows() != c.qlf.cols() || c.gain.cols() != c.qlf.rows() || c.center.size() != c.qlf.rows())
    throw DimensionError("controller matrices have inconsistent shapes");
  return c;
}

Json controller_set_to_json(const ControllerSet& s) {
  Json j;
  j["benchmark"] = s.benchmark.name;
  j["deadline_s"] = s.deadline;
  j["definition"] = benchmark_to_json(s.benchmark);
  Json cs = Json::array();
  for (const auto& c : s.controllers) cs.push_back(controller_to_json(c));
  j["controllers"] = std::move(cs);
  Json table = Json::array();
  for (const auto& o : s.table) {
    Json row;
    row["h"] = o.h;
    row["feasible"] = o.feasible;
    row["alpha_ref"] = o.alpha_ref;
    row["alpha"] = o.alpha;
    row["diagnostic"] = o.diagnostic;
    table.push_back(std::move(row));
  }
  j["feasibility"] = std::move(table);
  return j;
}

ControllerSet controller_set_from_json(const Json& j) {
  if (!j.contains("definition") || !j.contains("controllers")) throw ConfigError("not a controller-set document");
  ControllerSet s{.benchmark = benchmark_from_json(j.at("definition"), j.value("benchmark", std::string("custom"))),
                  .deadline = num(j, "deadline_s"),
                  .controllers = {},
                  .table = {}};
  for (const auto& c : j.at("controllers")) s.controllers.push_back(controller_from_json(c));
  if (j.contains("feasibility")) {
    for (const auto& r : j.at("feasibility")) {
      s.table.push_back({num(r, "h"), r.value("feasible", false), num(r, "alpha_ref"), num(r, "alpha"),
                         r.value("diagnostic", std::string())});
    }
  }
  return s;
}

Json trace_summary(const SimTrace& trace, const std::string& benchmark, const std::string& scenario,
                   std::uint64_t seed, const Scap& scap) {
  Json j;
  j["benchmark"] = benchmark;
  j["scenario"] = scenario;
  j["seed"] = seed;
  j["outcome"] = std::string(to_string(trace.outcome));
  j["outcome_time"] = trace.outcome_time;
  j["recovered_at"] = trace.recovered_at ? Json(*trace.recovered_at) : Json(nullptr);
  j["safety_violated_at"] = trace.safety_violated_at ? Json(*trace.safety_violated_at) : Json(nullptr);
  j["unrecoverable_at"] = trace.unrecoverable_at ? Json(*trace.unrecoverable_at) : Json(nullptr);
  j["samples"] = trace.rows();
  j["intersample_exits"] = trace.intersample_exits;
  Json ev = Json::array();
  for (const auto& e : trace.switch_events) {
    Json r;
    r["t"] = e.t;
    r["from_controller"] = e.from;
    r["to_controller"] = e.to;
    r["from_period_ms"] = scap.period_of(e.from) * 1000.0;
    r["to_period_ms"] = scap.period_of(e.to) * 1000.0;
    r["reason"] = std::string(to_string(e.reason));
    r["util"] = e.util;
    r["delta_lb"] = e.delta_lb;
    ev.push_back(std::move(r));
  }
  j["switch_events"] = std::move(ev);
  return j;
}

Json batch_summary(const BatchSummary& s) {
  Json j;
  j["n_runs"] = s.n_runs;
  j["recovery_rate"] = s.recovery_rate;
  j["max_recovery_time"] = s.max_recovery_time;
  j["violations_count"] = s.violations_count;
  j["deadline_misses"] = s.deadline_misses;
  j["unrecoverable"] = s.unrecoverable_count;
  Json runs = Json::array();
  for (const auto& r : s.runs) {
    Json row;
    row["seed"] = r.seed;
    row["x0"] = vector_to_json(r.x0);
    row["outcome"] = std::string(to_string(r.outcome));
    row["time"] = r.outcome_time;
    row["sor_exit"] = r.sor_exit;
    runs.push_back(std::move(row));
  }
  j["runs"] = std::move(runs);
  return j;
}

Json read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("'" + path + "' is not valid JSON: " + e.what());
  }
}

void write_file(const std::string& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << j.dump(2) << '\n';
}

}  // namespace bsc::io
