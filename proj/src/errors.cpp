#include "holomech/errors.hpp"

namespace holomech {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonHermitianInput: return "NonHermitianInput";
    case ErrorCode::SingularInput: return "SingularInput";
    case ErrorCode::NotUnitary: return "NotUnitary";
    case ErrorCode::ExpressionDomainError: return "ExpressionDomainError";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::GridTooCoarse: return "GridTooCoarse";
    case ErrorCode::OpenPath: return "OpenPath";
    case ErrorCode::StepLimitExceeded: return "StepLimitExceeded";
    case ErrorCode::IntervalMismatch: return "IntervalMismatch";
    case ErrorCode::DegenerateErrorSequence: return "DegenerateErrorSequence";
    case ErrorCode::NonScalarHolonomy: return "NonScalarHolonomy";
    case ErrorCode::EigenspaceNotPreserved: return "EigenspaceNotPreserved";
    case ErrorCode::DriftingProjectors: return "DriftingProjectors";
    case ErrorCode::SyntaxError: return "SyntaxError";
    case ErrorCode::UnknownIdentifier: return "UnknownIdentifier";
    case ErrorCode::FormatError: return "FormatError";
    case ErrorCode::NonHermitianBasis: return "NonHermitianBasis";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

int exit_class(ErrorCode code) {
  switch (code) {
    case ErrorCode::SingularInput:
    case ErrorCode::NotUnitary:
    case ErrorCode::GridTooCoarse:
    case ErrorCode::StepLimitExceeded:
    case ErrorCode::DegenerateErrorSequence:
    case ErrorCode::NonScalarHolonomy:
    case ErrorCode::EigenspaceNotPreserved:
    case ErrorCode::DriftingProjectors:
      return 1;
    default:
      return 2;
  }
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

namespace {

std::string describe(std::size_t line, std::size_t column, const std::vector<std::string>& expected,
                     const std::string& found) {
  std::string msg = "line " + std::to_string(line) + ", column " + std::to_string(column) +
                    ": unexpected " + (found.empty() ? std::string("end of input") : "'" + found + "'");
  if (!expected.empty()) {
    msg += "; expected one of {";
    for (std::size_t i = 0; i < expected.size(); ++i) {
      if (i) msg += ", ";
      msg += expected[i];
    }
    msg += "}";
  }
  return msg;
}

}  // namespace

SyntaxError::SyntaxError(std::size_t line, std::size_t column, std::vector<std::string> expected,
                         const std::string& found)
    : Error(ErrorCode::SyntaxError, describe(line, column, expected, found)),
      line_(line),
      column_(column),
      expected_(std::move(expected)) {}

}  // namespace holomech
