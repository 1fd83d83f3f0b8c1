#include "ecgdx/error.hpp"
#include "ecgdx/schema.hpp"

namespace ecgdx {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::BadValue: return "BadValue";
    case ErrorCode::EmptyCohort: return "EmptyCohort";
    case ErrorCode::UnknownTarget: return "UnknownTarget";
    case ErrorCode::TooFewRows: return "TooFewRows";
    case ErrorCode::SingleClass: return "SingleClass";
    case ErrorCode::SingleClassTrain: return "SingleClassTrain";
    case ErrorCode::SingleClassVal: return "SingleClassVal";
    case ErrorCode::EmptySet: return "EmptySet";
    case ErrorCode::SchemaMismatch: return "SchemaMismatch";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::ResampleExhausted: return "ResampleExhausted";
    case ErrorCode::TooManyFeatures: return "TooManyFeatures";
    case ErrorCode::BadSpec: return "BadSpec";
    case ErrorCode::BadConfig: return "BadConfig";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

std::optional<std::size_t> feature_index(std::string_view name) {
  for (std::size_t i = 0; i < kNumFeatures; ++i) {
    if (kFeatureNames[i] == name) return i;
  }
  return std::nullopt;
}

std::vector<std::string> schema_names() { return {kFeatureNames.begin(), kFeatureNames.end()}; }

std::string normalize_target(std::string_view target) {
  if (target.starts_with(kLabelPrefix)) target.remove_prefix(kLabelPrefix.size());
  return std::string(target);
}

}  // namespace ecgdx
