#include "pfcred/error.hpp"

namespace pfcred {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidInput: return "InvalidInput";
    case ErrorKind::SchemaError: return "SchemaError";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::DegenerateResponse: return "DegenerateResponse";
    case ErrorKind::RankDeficientBasis: return "RankDeficientBasis";
    case ErrorKind::SingularMatrix: return "SingularMatrix";
    case ErrorKind::NotPSD: return "NotPSD";
    case ErrorKind::ResidualCovSingular: return "ResidualCovSingular";
    case ErrorKind::NumericalDegeneracy: return "NumericalDegeneracy";
    case ErrorKind::IterationDiverged: return "IterationDiverged";
    case ErrorKind::Internal: return "Internal";
  }
  return "Unknown";
}

bool is_input_error(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidInput:
    case ErrorKind::SchemaError:
    case ErrorKind::ParseError:
    case ErrorKind::DegenerateResponse:
    case ErrorKind::RankDeficientBasis:
      return true;
    default:
      return false;
  }
}

}  // namespace pfcred
