#include "refmi/error.hpp"

namespace refmi {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::Io: return "IoError";
    case ErrorKind::MalformedRow: return "MalformedRow";
    case ErrorKind::MissingBaseline: return "MissingBaseline";
    case ErrorKind::NonMonotoneMissingness: return "NonMonotoneMissingness";
    case ErrorKind::DuplicateId: return "DuplicateId";
    case ErrorKind::EmptyArm: return "EmptyArm";
    case ErrorKind::InsufficientData: return "InsufficientData";
    case ErrorKind::NoObservedReference: return "NoObservedReference";
    case ErrorKind::DegenerateVariance: return "DegenerateVariance";
    case ErrorKind::TooFewImputations: return "TooFewImputations";
    case ErrorKind::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorKind::SingularDesign: return "SingularDesign";
    case ErrorKind::BootstrapFailed: return "BootstrapFailed";
    case ErrorKind::ScenarioFailed: return "ScenarioFailed";
  }
  return "UnknownError";
}

bool Error::is_data_error() const noexcept {
  return kind_ != ErrorKind::InvalidArgument;
}

}  // namespace refmi
