#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "bsc/benchmarks.hpp"
#include "bsc/simkit.hpp"
#include "bsc/synth.hpp"

namespace bsc::io {

using Json = nlohmann::ordered_json;

Json matrix_to_json(const MatrixXd& m);  // row-major nested arrays
MatrixXd matrix_from_json(const Json& j, const char* what);
Json vector_to_json(const VectorXd& v);
VectorXd vector_from_json(const Json& j, const char* what);

/// Config document: {plant:{phi,gamma,c,q_w,r_v,x_ref[,u_ref]}, sor:{lo,hi}|{A,b[,center]},
/// por:{...}, periods:{h0,h_max}, deadline_s | deadlines, budget:[{t,u}|{t,h_min}],
/// wcets:{bsc,poc,per_period_ms}, [poc:{h,q_diag,r_diag}], [norm_scale]}.
BenchmarkDef benchmark_from_json(const Json& j, const std::string& name = "custom");
Json benchmark_to_json(const BenchmarkDef& b);

struct ControllerSet {
  BenchmarkDef benchmark;
  double deadline = 0.0;
  std::vector<BackupController> controllers;
  std::vector<PeriodOutcome> table;
};

Json controller_to_json(const BackupController& c);
BackupController controller_from_json(const Json& j);
Json controller_set_to_json(const ControllerSet& s);
ControllerSet controller_set_from_json(const Json& j);

Json trace_summary(const SimTrace& trace, const std::string& benchmark, const std::string& scenario,
                   std::uint64_t seed, const Scap& scap);
Json batch_summary(const BatchSummary& s);

Json read_file(const std::string& path);
void write_file(const std::string& path, const Json& j);

}  // namespace bsc::io
