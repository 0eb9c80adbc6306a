// SPDX-License-Identifier: Apache-2.0
//
// Exception hierarchy shared by every module. Each error carries a stable
// machine-readable kind so the CLI can map failures onto exit codes.

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace urae {

enum class ErrorKind {
  Shape,
  Rank,
  Domain,
  Contract,
  Regime,
  Numerical,
  Divergence,
  Validation,
  Format,
  Corruption,
  Io,
};

[[nodiscard]] std::string_view to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define URAE_DEFINE_ERROR(Name, Kind)                                  \
  class Name : public Error {                                          \
   public:                                                             \
    explicit Name(const std::string& message) : Error(Kind, message) {} \
  };

URAE_DEFINE_ERROR(ShapeError, ErrorKind::Shape)
URAE_DEFINE_ERROR(RankError, ErrorKind::Rank)
URAE_DEFINE_ERROR(DomainError, ErrorKind::Domain)
URAE_DEFINE_ERROR(ContractError, ErrorKind::Contract)
URAE_DEFINE_ERROR(RegimeError, ErrorKind::Regime)
URAE_DEFINE_ERROR(NumericalError, ErrorKind::Numerical)
URAE_DEFINE_ERROR(ValidationError, ErrorKind::Validation)
URAE_DEFINE_ERROR(FormatError, ErrorKind::Format)
URAE_DEFINE_ERROR(CorruptionError, ErrorKind::Corruption)
URAE_DEFINE_ERROR(IoError, ErrorKind::Io)

#undef URAE_DEFINE_ERROR

// Divergence keeps the step at which the iterate blew up.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& message, std::size_t step)
      : Error(ErrorKind::Divergence, message), step_(step) {}

  [[nodiscard]] std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

}  // namespace urae
