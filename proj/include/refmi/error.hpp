#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace refmi {

enum class ErrorKind {
  InvalidArgument,
  Io,
  MalformedRow,
  MissingBaseline,
  NonMonotoneMissingness,
  DuplicateId,
  EmptyArm,
  InsufficientData,
  NoObservedReference,
  DegenerateVariance,
  TooFewImputations,
  NotPositiveDefinite,
  SingularDesign,
  BootstrapFailed,
  ScenarioFailed,
};

std::string_view to_string(ErrorKind kind) noexcept;

// Single exception type for the library; `kind` drives the C API status mapping.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  // True for failures caused by the input data rather than by the caller.
  bool is_data_error() const noexcept;

 private:
  ErrorKind kind_;
};

}  // namespace refmi
