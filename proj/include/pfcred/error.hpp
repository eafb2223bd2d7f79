#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pfcred {

enum class ErrorKind {
  InvalidInput,
  SchemaError,
  ParseError,
  DegenerateResponse,
  RankDeficientBasis,
  SingularMatrix,
  NotPSD,
  ResidualCovSingular,
  NumericalDegeneracy,
  IterationDiverged,
  Internal,
};

std::string_view to_string(ErrorKind kind);

/// True for failures caused by the caller's data or arguments, false for
/// failures of the numerics on otherwise well-formed input.
bool is_input_error(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace pfcred
