#pragma once

#include <stdexcept>
#include <string>

namespace loopwbc {

/// Base class for all errors raised by the library. The CLI maps these to
/// exit code 2 (validation) or 3 (runtime/scenario), see tools/main.cpp.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct ParseError : Error {
  using Error::Error;
};

struct ValidationError : Error {
  using Error::Error;
};

/// Ground normal (nearly) parallel to the wheel axis; the contour parameter
/// is undefined there.
struct DegenerateContact : Error {
  using Error::Error;
};

struct DegenerateDirection : Error {
  using Error::Error;
};

struct SingularConstraintSystem : Error {
  using Error::Error;
};

struct Infeasible : Error {
  using Error::Error;
};

struct MaxIterations : Error {
  using Error::Error;
};

struct NotStabilizable : Error {
  using Error::Error;
};

struct NoConvergence : Error {
  using Error::Error;
};

struct DegeneratePendulum : Error {
  using Error::Error;
};

struct NoContactForce : Error {
  using Error::Error;
};

struct OutOfTerrain : Error {
  using Error::Error;
};

struct EnergyBlowup : Error {
  using Error::Error;
};

struct ScenarioFailed : Error {
  using Error::Error;
};

}  // namespace loopwbc
