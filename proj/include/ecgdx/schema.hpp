#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ecgdx {

inline constexpr std::size_t kNumFeatures = 10;
inline constexpr std::size_t kNumEcgFeatures = 8;

// Harmonized predictor order. Intervals are in milliseconds, axes in degrees,
// age in years, sex is 0 = female / 1 = male. Only the eight ECG columns may
// be missing.
inline constexpr std::array<std::string_view, kNumFeatures> kFeatureNames = {
    "rr_interval_ms",  "pr_interval_ms",  "qrs_duration_ms", "qt_interval_ms",
    "qtc_interval_ms", "p_wave_axis_deg", "qrs_axis_deg",    "t_wave_axis_deg",
    "age_years",       "sex",
};

namespace feature {
inline constexpr std::size_t kRR = 0;
inline constexpr std::size_t kPR = 1;
inline constexpr std::size_t kQRS = 2;
inline constexpr std::size_t kQT = 3;
inline constexpr std::size_t kQTc = 4;
inline constexpr std::size_t kPAxis = 5;
inline constexpr std::size_t kQRSAxis = 6;
inline constexpr std::size_t kTAxis = 7;
inline constexpr std::size_t kAge = 8;
inline constexpr std::size_t kSex = 9;
}  // namespace feature

enum class FeatureKind { Interval, Axis, Age, Sex };

constexpr FeatureKind feature_kind(std::size_t index) {
  if (index < 5) return FeatureKind::Interval;
  if (index < 8) return FeatureKind::Axis;
  if (index == feature::kAge) return FeatureKind::Age;
  return FeatureKind::Sex;
}

std::optional<std::size_t> feature_index(std::string_view name);

std::vector<std::string> schema_names();

// Prefix that marks a label column in cohort files.
inline constexpr std::string_view kLabelPrefix = "dx_";

// "dx_C34" and "C34" both name target "C34".
std::string normalize_target(std::string_view target);

}  // namespace ecgdx
