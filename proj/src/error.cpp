#include "hinftune/error.hpp"

namespace hinftune {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::SingularAtFrequency: return "SingularAtFrequency";
    case ErrorKind::EigenFailure: return "EigenFailure";
    case ErrorKind::NotHermitian: return "NotHermitian";
    case ErrorKind::SizeCap: return "SizeCap";
    case ErrorKind::IllPosedLoop: return "IllPosedLoop";
    case ErrorKind::NonConvergence: return "NonConvergence";
    case ErrorKind::UnmodeledBus: return "UnmodeledBus";
    case ErrorKind::SingularAlgebraicJacobian: return "SingularAlgebraicJacobian";
    case ErrorKind::MultipleZeroModes: return "MultipleZeroModes";
    case ErrorKind::NoZeroMode: return "NoZeroMode";
    case ErrorKind::InitialUnstable: return "InitialUnstable";
    case ErrorKind::NoProgress: return "NoProgress";
    case ErrorKind::AlgebraicNewtonFailure: return "AlgebraicNewtonFailure";
    case ErrorKind::NoSteadyState: return "NoSteadyState";
    case ErrorKind::Config: return "ConfigError";
    case ErrorKind::Io: return "IoError";
  }
  return "Unknown";
}

}  // namespace hinftune
