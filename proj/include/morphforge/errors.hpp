#pragma once

#include <stdexcept>
#include <string>

namespace morphforge {

// All failures carry a stable name (machine-readable, goes into JSON error
// reports) and an exit code class: 2 = invalid input, 3 = numerical failure.
struct Error : std::runtime_error {
  std::string name;
  int exit_code;
  Error(std::string n, const std::string& msg, int code)
      : std::runtime_error(msg), name(std::move(n)), exit_code(code) {}
};

struct ValidationError : Error {
  explicit ValidationError(const std::string& msg, const std::string& n = "ValidationError")
      : Error(n, msg, 2) {}
};

struct NumericalError : Error {
  explicit NumericalError(const std::string& msg, const std::string& n = "NumericalError")
      : Error(n, msg, 3) {}
};

#define MORPHFORGE_DEFINE_ERROR(NAME, BASE)                      \
  struct NAME : BASE {                                           \
    explicit NAME(const std::string& msg) : BASE(msg, #NAME) {} \
  }

MORPHFORGE_DEFINE_ERROR(SingularMetric, NumericalError);
MORPHFORGE_DEFINE_ERROR(DegenerateNormal, NumericalError);
MORPHFORGE_DEFINE_ERROR(OffManifold, NumericalError);
MORPHFORGE_DEFINE_ERROR(LeftDomain, NumericalError);
MORPHFORGE_DEFINE_ERROR(NoConvergence, NumericalError);
MORPHFORGE_DEFINE_ERROR(InverseFailure, NumericalError);
MORPHFORGE_DEFINE_ERROR(GridTooCoarse, NumericalError);
MORPHFORGE_DEFINE_ERROR(DegenerateIntermediate, NumericalError);
MORPHFORGE_DEFINE_ERROR(DomainError, NumericalError);
MORPHFORGE_DEFINE_ERROR(PoleHit, NumericalError);
MORPHFORGE_DEFINE_ERROR(QuadratureFailure, NumericalError);
MORPHFORGE_DEFINE_ERROR(BracketFailure, NumericalError);
MORPHFORGE_DEFINE_ERROR(NonFiniteInput, NumericalError);
MORPHFORGE_DEFINE_ERROR(Infeasible, ValidationError);
MORPHFORGE_DEFINE_ERROR(DegenerateMap, ValidationError);

#undef MORPHFORGE_DEFINE_ERROR

}  // namespace morphforge
