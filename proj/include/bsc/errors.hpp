#pragma once

#include <stdexcept>
#include <string>

namespace bsc {

// Base for every error raised by the toolkit. `kind()` is a stable
// machine-readable tag used by the CLI's JSON error channel.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define BSC_DEFINE_ERROR(Name, tag)                                  \
  class Name : public Error {                                       \
   public:                                                          \
    explicit Name(const std::string& what) : Error(tag, what) {}    \
  };

BSC_DEFINE_ERROR(NumericError, "numeric-failure")
BSC_DEFINE_ERROR(GeometryError, "geometry")
BSC_DEFINE_ERROR(DomainError, "domain")
BSC_DEFINE_ERROR(DimensionError, "dimension")
BSC_DEFINE_ERROR(DeadlineInfeasible, "deadline-infeasible")
BSC_DEFINE_ERROR(SchedulabilityError, "schedulability")
BSC_DEFINE_ERROR(BarrierDomainError, "barrier-domain")
BSC_DEFINE_ERROR(UnrecoverableState, "unrecoverable-state")
BSC_DEFINE_ERROR(PreconditionError, "precondition")
BSC_DEFINE_ERROR(ConvergenceError, "non-convergence")
BSC_DEFINE_ERROR(ConfigError, "config")

#undef BSC_DEFINE_ERROR

}  // namespace bsc
