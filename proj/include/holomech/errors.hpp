#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace holomech {

enum class ErrorCode {
  NonHermitianInput,
  SingularInput,
  NotUnitary,
  ExpressionDomainError,
  DimensionMismatch,
  GridTooCoarse,
  OpenPath,
  StepLimitExceeded,
  IntervalMismatch,
  DegenerateErrorSequence,
  NonScalarHolonomy,
  EigenspaceNotPreserved,
  DriftingProjectors,
  SyntaxError,
  UnknownIdentifier,
  FormatError,
  NonHermitianBasis,
  InvalidArgument,
};

std::string_view to_string(ErrorCode code);

// CLI exit class: 1 for numerical failures, 2 for input errors.
int exit_class(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Parse failure with a 1-based source position and the tokens that would
// have been accepted there.
class SyntaxError : public Error {
 public:
  SyntaxError(std::size_t line, std::size_t column, std::vector<std::string> expected,
              const std::string& found);

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }
  const std::vector<std::string>& expected() const noexcept { return expected_; }

 private:
  std::size_t line_;
  std::size_t column_;
  std::vector<std::string> expected_;
};

}  // namespace holomech
