#include "bsc/benchmarks.hpp"

#include <cmath>

#include "bsc/decay.hpp"
#include "bsc/errors.hpp"
#include "bsc/io.hpp"

namespace bsc {

namespace detail {
extern const std::string_view kBenchmarkData;
}

double BenchmarkDef::wcet_for(double h) const {
  const auto it = wcet_by_period_ms.find(std::lround(h * 1000.0));
  return it != wcet_by_period_ms.end() ? it->second : wcet_bsc;
}

void BenchmarkDef::validate() const {
  plant.validate();
  const int n = plant.states();
  if (sor.dim() != n || por.dim() != n) throw DimensionError(name + ": region dimension differs from the plant");
  if (!strictly_inside(por, sor)) throw GeometryError(name + ": POR is not strictly inside the SOR");
  if (!(h0 > 0.0) || !(h_max >= h0)) throw ConfigError(name + ": need 0 < h0 <= h_max");
  const double m = h_max / h0;
  if (std::abs(m - std::round(m)) > 1e-12 * std::max(1.0, m)) throw ConfigError(name + ": h0 must divide h_max");
  if (deadlines.empty()) throw ConfigError(name + ": no recovery deadline");
  for (double d : deadlines)
    if (!(d > 0.0)) throw ConfigError(name + ": deadlines must be positive");
  if (norm_scale.size() != 0 && norm_scale.size() != n) throw DimensionError(name + ": norm_scale dimension");
  if (poc.q_diag.size() != n || poc.r_diag.size() != plant.inputs())
    throw DimensionError(name + ": POC weight dimensions");
  utilization(wcet_poc, poc.h);
  for (const auto& [key, sc] : scenarios) {
    if (sc.x0.size() != n) throw DimensionError(name + ": scenario '" + key + "' x0 dimension");
    for (const auto& k : sc.kicks)
      if (k.x.size() != n) throw DimensionError(name + ": scenario '" + key + "' kick dimension");
  }
}

SynthOptions BenchmarkDef::synth_options() const {
  SynthOptions o;
  o.wcet = wcet_bsc;
  o.norm_scale = norm_scale;
  return o;
}

PocSpec BenchmarkDef::make_poc() const {
  const DiscreteLoop loop = discretize(plant, poc.h);
  PocSpec p;
  p.gain = synth_poc(loop, poc.q_diag.asDiagonal(), poc.r_diag.asDiagonal());
  p.h = poc.h;
  p.wcet = wcet_poc;
  p.center = sor.center();
  return p;
}

std::vector<std::string> builtin_names() {
  const auto doc = io::Json::parse(detail::kBenchmarkData);
  std::vector<std::string> out;
  for (const auto& [k, v] : doc.at("benchmarks").items()) out.push_back(k);
  return out;
}

BenchmarkDef builtin_benchmark(std::string_view name) {
  const auto doc = io::Json::parse(detail::kBenchmarkData);
  const auto& all = doc.at("benchmarks");
  const std::string key(name);
  if (!all.contains(key)) throw ConfigError("unknown benchmark '" + key + "'");
  return io::benchmark_from_json(all.at(key), key);
}

}  // namespace bsc
