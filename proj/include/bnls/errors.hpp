#pragma once

#include <stdexcept>
#include <string>

namespace bnls {

// malformed input document
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// structurally valid document that violates a network invariant
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// joint state space larger than the configured enumeration cap
struct StateCapError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// planning request that cannot be satisfied (bad range, p = 0, monotonicity breach)
struct PlanError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// sigma above the certifiable cap for the default search bracket
struct InfeasibleSigmaError : PlanError {
  InfeasibleSigmaError(double sigma, double cap)
      : PlanError("sigma " + std::to_string(sigma) +
                  " exceeds the certifiable cap " + std::to_string(cap) +
                  " for this bracket; enable bracket expansion or lower sigma"),
        sigma(sigma),
        cap(cap) {}
  double sigma;
  double cap;
};

}  // namespace bnls
