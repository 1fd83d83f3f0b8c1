#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ecgdx {

enum class ErrorCode {
  MissingColumn,
  BadValue,
  EmptyCohort,
  UnknownTarget,
  TooFewRows,
  SingleClass,
  SingleClassTrain,
  SingleClassVal,
  EmptySet,
  SchemaMismatch,
  LengthMismatch,
  ResampleExhausted,
  TooManyFeatures,
  BadSpec,
  BadConfig,
  IoError,
};

std::string_view to_string(ErrorCode code) noexcept;

// All library failures surface as this exception; `code()` lets callers
// (the CLI in particular) map failures onto exit statuses.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace ecgdx
