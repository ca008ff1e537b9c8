#pragma once

#include <stdexcept>
#include <string>

namespace hinftune {

enum class ErrorKind {
  InvalidArgument,
  SingularAtFrequency,
  EigenFailure,
  NotHermitian,
  SizeCap,
  IllPosedLoop,
  NonConvergence,
  UnmodeledBus,
  SingularAlgebraicJacobian,
  MultipleZeroModes,
  NoZeroMode,
  InitialUnstable,
  NoProgress,
  AlgebraicNewtonFailure,
  NoSteadyState,
  Config,
  Io,
};

const char* to_string(ErrorKind kind);

// Single exception type for the library; the kind decides how the C API and
// the CLI map it onto status and exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  // Config and Io errors are user-input problems; everything else is numerical.
  bool is_config() const noexcept {
    return kind_ == ErrorKind::Config || kind_ == ErrorKind::Io ||
           kind_ == ErrorKind::InvalidArgument;
  }

 private:
  ErrorKind kind_;
};

}  // namespace hinftune
